#!/usr/bin/env python3
"""Regenerate the golden wire-format fixtures.

Every conforming implementation must produce these exact bytes for the
messages described below and parse them back to the same contents.  The
rasters are 2x3 (width 2, height 3): RGB bytes count up from 0, mask bytes
step by 51 so the quantized probabilities are exact multiples of 0.2.
"""

from pathlib import Path

from impvos.backends.protocol import Message, MessageType, encode_mask, encode_rgb

import numpy as np

HERE = Path(__file__).parent

WIDTH, HEIGHT = 2, 3
RGB = np.arange(HEIGHT * WIDTH * 3, dtype=np.uint8).reshape(HEIGHT, WIDTH, 3)
RGB2 = (RGB + 100).astype(np.uint8)
MASK = (np.arange(HEIGHT * WIDTH, dtype=np.uint8).reshape(HEIGHT, WIDTH) * 51) / 255.0


def fixtures():
    yield "init", Message(
        id=1, type=MessageType.INIT, payload={"protocol_version": 1}
    )
    yield "ready", Message(
        id=1, type=MessageType.READY, payload={"parallel": False, "protocol_version": 1}
    )
    yield "detect_request", Message(
        id=2,
        type=MessageType.DETECT,
        width=WIDTH,
        height=HEIGHT,
        payload={"frame": encode_rgb(RGB)},
    )
    yield "detect_result", Message(
        id=2,
        type=MessageType.RESULT,
        width=WIDTH,
        height=HEIGHT,
        payload={"mask": encode_mask(MASK)},
    )
    yield "propagate_request", Message(
        id=3,
        type=MessageType.PROPAGATE,
        session="chain-1",
        width=WIDTH,
        height=HEIGHT,
        payload={
            "reference_frame": encode_rgb(RGB),
            "reference_mask": encode_mask(MASK),
            "target_frame": encode_rgb(RGB2),
        },
    )
    yield "propagate_result", Message(
        id=3,
        type=MessageType.RESULT,
        session="chain-1",
        width=WIDTH,
        height=HEIGHT,
        payload={"mask": encode_mask(MASK)},
    )
    yield "estimate_request", Message(
        id=4,
        type=MessageType.ESTIMATE,
        width=WIDTH,
        height=HEIGHT,
        payload={"frame": encode_rgb(RGB), "mask": encode_mask(MASK)},
    )
    yield "estimate_result", Message(
        id=4, type=MessageType.RESULT, payload={"value": 0.8125}
    )
    yield "error", Message(
        id=5, type=MessageType.ERROR, payload={"message": "detector failed"}
    )
    yield "shutdown", Message(id=6, type=MessageType.SHUTDOWN)


def main():
    for name, message in fixtures():
        path = HERE / f"{name}.bin"
        path.write_bytes(message.to_bytes())
        print(f"wrote {path.name} ({path.stat().st_size} bytes)")


if __name__ == "__main__":
    main()
