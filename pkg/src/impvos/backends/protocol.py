"""Framed wire protocol between the engine and external backend workers.

Each frame on the wire is a 4-byte big-endian unsigned length prefix
followed by exactly that many bytes of UTF-8 JSON encoding one message
object.  The JSON is canonical: keys sorted alphabetically, no whitespace,
so a message always serializes to the same bytes.

Every message carries the same six fields::

    {"height": H, "id": N, "payload": ..., "session": S, "type": T, "width": W}

Message types and payloads:

* INIT      -> {"protocol_version": 1}; engine to worker, starts the handshake
* READY     -> {"protocol_version": 1, "parallel": bool}; worker reply
* DETECT    -> {"frame": <rgb>}; expects a RESULT carrying {"mask": <mask>}
* PROPAGATE -> {"reference_frame": <rgb>, "reference_mask": <mask>,
                "target_frame": <rgb>}; expects RESULT {"mask": <mask>}
* ESTIMATE  -> {"frame": <rgb>, "mask": <mask>}; expects RESULT {"value": x}
* RESULT    -> reply payload as above, id matching the request
* ERROR     -> {"message": str}, id matching the offending request
* SHUTDOWN  -> null payload; worker exits after acknowledging nothing

Rasters travel base64-encoded, row-major: masks one byte per pixel with the
probability quantized to 0-255, RGB frames three bytes per pixel.  ``width``
and ``height`` describe every raster in the message.  Dimension-free
messages (INIT, READY, SHUTDOWN, scalar results, errors) use width =
height = 0.  Stateful propagators key their memory on ``session``; the
engine guarantees chain-ordered requests per session.
"""

from __future__ import annotations

import base64
import json
import struct
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, BinaryIO, Optional

import numpy as np

PROTOCOL_VERSION = 1
LENGTH_PREFIX = struct.Struct(">I")
MAX_FRAME_BYTES = 64 * 1024 * 1024


class ProtocolError(Exception):
    """Malformed frame, unexpected message, or protocol version mismatch."""


class MessageType(str, Enum):
    INIT = "INIT"
    READY = "READY"
    DETECT = "DETECT"
    PROPAGATE = "PROPAGATE"
    ESTIMATE = "ESTIMATE"
    RESULT = "RESULT"
    ERROR = "ERROR"
    SHUTDOWN = "SHUTDOWN"


@dataclass(frozen=True)
class Message:
    id: int
    type: MessageType
    session: str = ""
    width: int = 0
    height: int = 0
    payload: Any = None

    def to_bytes(self) -> bytes:
        body = json.dumps(
            {
                "height": self.height,
                "id": self.id,
                "payload": self.payload,
                "session": self.session,
                "type": self.type.value,
                "width": self.width,
            },
            sort_keys=True,
            separators=(",", ":"),
            ensure_ascii=True,
        ).encode("utf-8")
        return LENGTH_PREFIX.pack(len(body)) + body

    @classmethod
    def from_body(cls, body: bytes) -> "Message":
        try:
            obj = json.loads(body.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ProtocolError(f"malformed message body: {exc}") from exc
        if not isinstance(obj, dict):
            raise ProtocolError("message body must be a JSON object")
        missing = {"id", "type", "session", "width", "height", "payload"} - set(obj)
        if missing:
            raise ProtocolError(f"message missing fields: {sorted(missing)}")
        try:
            mtype = MessageType(obj["type"])
        except ValueError as exc:
            raise ProtocolError(f"unknown message type {obj['type']!r}") from exc
        return cls(
            id=int(obj["id"]),
            type=mtype,
            session=str(obj["session"]),
            width=int(obj["width"]),
            height=int(obj["height"]),
            payload=obj["payload"],
        )


def write_message(stream: BinaryIO, message: Message) -> None:
    stream.write(message.to_bytes())
    stream.flush()


def read_message(stream: BinaryIO) -> Optional[Message]:
    """Read one framed message; None on clean EOF at a frame boundary."""
    header = _read_exact(stream, LENGTH_PREFIX.size, allow_eof=True)
    if header is None:
        return None
    (length,) = LENGTH_PREFIX.unpack(header)
    if length > MAX_FRAME_BYTES:
        raise ProtocolError(f"frame of {length} bytes exceeds limit")
    body = _read_exact(stream, length, allow_eof=False)
    return Message.from_body(body)


def _read_exact(stream: BinaryIO, n: int, allow_eof: bool) -> Optional[bytes]:
    chunks = b""
    while len(chunks) < n:
        chunk = stream.read(n - len(chunks))
        if not chunk:
            if allow_eof and not chunks:
                return None
            raise ProtocolError(
                f"stream ended mid-frame ({len(chunks)} of {n} bytes)"
            )
        chunks += chunk
    return chunks


def encode_mask(mask: np.ndarray) -> str:
    """Probability mask to base64 of row-major bytes, quantized to 0-255."""
    arr = np.asarray(mask, dtype=np.float64)
    q = np.round(arr * 255.0).astype(np.uint8)
    return base64.b64encode(q.tobytes()).decode("ascii")


def decode_mask(data: str, height: int, width: int) -> np.ndarray:
    raw = base64.b64decode(data.encode("ascii"), validate=True)
    if len(raw) != height * width:
        raise ProtocolError(
            f"mask payload has {len(raw)} bytes, expected {height * width}"
        )
    q = np.frombuffer(raw, dtype=np.uint8).reshape(height, width)
    return q.astype(np.float64) / 255.0


def encode_rgb(pixels: np.ndarray) -> str:
    """H×W×3 uint8 raster to base64 of row-major bytes."""
    arr = np.ascontiguousarray(pixels, dtype=np.uint8)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected H×W×3 raster, got {arr.shape}")
    return base64.b64encode(arr.tobytes()).decode("ascii")


def decode_rgb(data: str, height: int, width: int) -> np.ndarray:
    raw = base64.b64decode(data.encode("ascii"), validate=True)
    if len(raw) != height * width * 3:
        raise ProtocolError(
            f"rgb payload has {len(raw)} bytes, expected {height * width * 3}"
        )
    return np.frombuffer(raw, dtype=np.uint8).reshape(height, width, 3).copy()


def init_message(msg_id: int) -> Message:
    return Message(
        id=msg_id,
        type=MessageType.INIT,
        payload={"protocol_version": PROTOCOL_VERSION},
    )


def ready_message(msg_id: int, parallel: bool = False) -> Message:
    return Message(
        id=msg_id,
        type=MessageType.READY,
        payload={"parallel": parallel, "protocol_version": PROTOCOL_VERSION},
    )
