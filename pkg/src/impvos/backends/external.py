"""Client side of the external-backend protocol: spawns a worker process,
performs the INIT/READY handshake, and exposes detector / propagator /
estimator backends that ride it."""

from __future__ import annotations

import queue
import shlex
import subprocess
import threading
from typing import List, Optional, Union

import numpy as np

from ..core import Frame, PipelineError, VideoSequence
from . import protocol
from .protocol import Message, MessageType, ProtocolError

DEFAULT_TIMEOUT = 60.0


class ExternalBackendError(PipelineError):
    """Worker died, timed out, or answered out of protocol."""


class ExternalWorker:
    """One worker subprocess speaking the framed protocol on stdin/stdout.

    Calls are serialized: one request in flight at a time, responses
    matched by id.  Chain ordering per session is therefore guaranteed.
    """

    def __init__(self, command: Union[str, List[str]], timeout: float = DEFAULT_TIMEOUT):
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        self.timeout = timeout
        self.parallel = False
        self._proc: Optional[subprocess.Popen] = None
        self._responses: "queue.Queue[Union[Message, Exception, None]]" = queue.Queue()
        self._next_id = 0
        self._next_session = 0
        self._lock = threading.Lock()

    def start(self) -> None:
        self._proc = subprocess.Popen(
            self.command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
        )
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()
        reply = self._call(protocol.init_message(self._take_id()))
        if reply.type != MessageType.READY:
            raise ExternalBackendError(
                f"worker answered INIT with {reply.type.value}, expected READY"
            )
        payload = reply.payload or {}
        version = payload.get("protocol_version")
        if version != protocol.PROTOCOL_VERSION:
            raise ExternalBackendError(
                f"protocol version mismatch: engine speaks "
                f"{protocol.PROTOCOL_VERSION}, worker speaks {version}"
            )
        self.parallel = bool(payload.get("parallel", False))

    def _read_loop(self) -> None:
        assert self._proc is not None and self._proc.stdout is not None
        try:
            while True:
                message = protocol.read_message(self._proc.stdout)
                if message is None:
                    self._responses.put(None)
                    return
                self._responses.put(message)
        except Exception as exc:  # surfaced to the waiting request
            self._responses.put(exc)

    def _take_id(self) -> int:
        self._next_id += 1
        return self._next_id

    def new_session(self) -> str:
        self._next_session += 1
        return f"chain-{self._next_session}"

    def _call(self, message: Message) -> Message:
        if self._proc is None or self._proc.stdin is None:
            raise ExternalBackendError("worker not started")
        if self._proc.poll() is not None:
            raise ExternalBackendError(
                f"worker exited with code {self._proc.returncode} "
                f"before message {message.id}"
            )
        with self._lock:
            try:
                protocol.write_message(self._proc.stdin, message)
            except (BrokenPipeError, OSError) as exc:
                raise ExternalBackendError(
                    f"worker pipe closed while sending message {message.id}: {exc}"
                ) from exc
            try:
                reply = self._responses.get(timeout=self.timeout)
            except queue.Empty:
                raise ExternalBackendError(
                    f"worker response to message {message.id} timed out "
                    f"after {self.timeout}s"
                ) from None
        if reply is None:
            raise ExternalBackendError(
                f"worker exited while handling message {message.id}"
            )
        if isinstance(reply, Exception):
            raise ExternalBackendError(
                f"protocol failure on message {message.id}: {reply}"
            ) from reply
        if reply.id != message.id:
            raise ExternalBackendError(
                f"worker answered message {message.id} with id {reply.id}"
            )
        if reply.type == MessageType.ERROR:
            detail = (reply.payload or {}).get("message", "unknown error")
            raise ExternalBackendError(
                f"worker error on message {message.id}: {detail}"
            )
        return reply

    def request(
        self,
        mtype: MessageType,
        payload,
        session: str = "",
        width: int = 0,
        height: int = 0,
    ) -> Message:
        return self._call(
            Message(
                id=self._take_id(),
                type=mtype,
                session=session,
                width=width,
                height=height,
                payload=payload,
            )
        )

    def detect(self, pixels: np.ndarray) -> np.ndarray:
        h, w = pixels.shape[:2]
        reply = self.request(
            MessageType.DETECT,
            {"frame": protocol.encode_rgb(pixels)},
            width=w,
            height=h,
        )
        return self._mask_result(reply)

    def propagate(
        self,
        session: str,
        reference_pixels: np.ndarray,
        reference_mask: np.ndarray,
        target_pixels: np.ndarray,
    ) -> np.ndarray:
        h, w = reference_pixels.shape[:2]
        reply = self.request(
            MessageType.PROPAGATE,
            {
                "reference_frame": protocol.encode_rgb(reference_pixels),
                "reference_mask": protocol.encode_mask(reference_mask),
                "target_frame": protocol.encode_rgb(target_pixels),
            },
            session=session,
            width=w,
            height=h,
        )
        return self._mask_result(reply)

    def estimate(self, pixels: np.ndarray, mask: np.ndarray) -> float:
        h, w = pixels.shape[:2]
        reply = self.request(
            MessageType.ESTIMATE,
            {
                "frame": protocol.encode_rgb(pixels),
                "mask": protocol.encode_mask(mask),
            },
            width=w,
            height=h,
        )
        payload = reply.payload or {}
        if "value" not in payload:
            raise ExternalBackendError(
                f"ESTIMATE result {reply.id} carries no value"
            )
        return float(payload["value"])

    def _mask_result(self, reply: Message) -> np.ndarray:
        if reply.type != MessageType.RESULT:
            raise ExternalBackendError(
                f"expected RESULT for message {reply.id}, got {reply.type.value}"
            )
        payload = reply.payload or {}
        if "mask" not in payload:
            raise ExternalBackendError(f"result {reply.id} carries no mask")
        try:
            return protocol.decode_mask(payload["mask"], reply.height, reply.width)
        except ProtocolError as exc:
            raise ExternalBackendError(str(exc)) from exc

    def shutdown(self) -> None:
        if self._proc is None:
            return
        try:
            if self._proc.poll() is None and self._proc.stdin is not None:
                protocol.write_message(
                    self._proc.stdin,
                    Message(id=self._take_id(), type=MessageType.SHUTDOWN),
                )
                self._proc.stdin.close()
            self._proc.wait(timeout=5.0)
        except (OSError, subprocess.TimeoutExpired, BrokenPipeError):
            self._proc.kill()
            self._proc.wait()
        finally:
            self._proc = None

    def __enter__(self) -> "ExternalWorker":
        self.start()
        return self

    def __exit__(self, *exc) -> None:
        self.shutdown()


class ExternalDetector:
    def __init__(self, worker: ExternalWorker):
        self.worker = worker

    @property
    def shareable(self) -> bool:
        return self.worker.parallel

    def detect(self, frame: Frame) -> np.ndarray:
        return self.worker.detect(frame.pixels)


class ExternalPropagator:
    """Drives a worker chain step by step.  Every step sends the previous
    frame and mask as the reference plus the target frame, under one
    session id, so stateless echo workers and stateful memory models both
    fit."""

    def __init__(self, worker: ExternalWorker):
        self.worker = worker

    @property
    def shareable(self) -> bool:
        return self.worker.parallel

    def propagate_chain(
        self,
        video: VideoSequence,
        start: int,
        reference_mask: np.ndarray,
        direction: str,
        stop: int,
    ) -> List[np.ndarray]:
        step = 1 if stop >= start else -1
        if direction == "forward" and step != 1 or direction == "backward" and step != -1:
            if start != stop:
                raise ValueError(
                    f"direction {direction!r} inconsistent with {start}->{stop}"
                )
        session = self.worker.new_session()
        masks: List[np.ndarray] = []
        mask = reference_mask
        prev = start
        for idx in range(start + step, stop + step, step):
            mask = self.worker.propagate(
                session, video.frames[prev].pixels, mask, video.frames[idx].pixels
            )
            masks.append(mask)
            prev = idx
        return masks


class ExternalEstimator:
    def __init__(self, worker: ExternalWorker):
        self.worker = worker

    @property
    def shareable(self) -> bool:
        return self.worker.parallel

    def estimate(self, frame: Frame, cue: np.ndarray) -> float:
        value = self.worker.estimate(frame.pixels, cue)
        return min(max(value, 0.0), 1.0)
