import io
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from impvos.backends.external import (
    ExternalBackendError,
    ExternalPropagator,
    ExternalWorker,
)
from impvos.backends.protocol import (
    Message,
    MessageType,
    ProtocolError,
    decode_mask,
    decode_rgb,
    encode_mask,
    encode_rgb,
    read_message,
    write_message,
)
from impvos.backends import IdentityPropagator
from impvos.core import Frame, VideoSequence

FIXTURE_DIR = Path(__file__).parent.parent / "fixtures" / "protocol"
ECHO_WORKER = [sys.executable, str(Path(__file__).parent / "helpers" / "echo_worker.py")]


def make_video(n=4, h=6, w=5):
    rng = np.random.default_rng(0)
    frames = [
        Frame(i, rng.integers(0, 255, size=(h, w, 3), dtype=np.uint8))
        for i in range(n)
    ]
    return VideoSequence("v", frames)


class TestCodecs:
    def test_mask_round_trip_on_quantized_values(self):
        mask = np.arange(12, dtype=np.float64).reshape(3, 4) * 51 / 561
        quantized = np.round(mask * 255) / 255
        decoded = decode_mask(encode_mask(mask), 3, 4)
        assert np.allclose(decoded, quantized, atol=1e-12)

    def test_binary_masks_survive_exactly(self):
        mask = (np.random.default_rng(1).uniform(size=(5, 7)) > 0.5).astype(float)
        assert np.array_equal(decode_mask(encode_mask(mask), 5, 7), mask)

    def test_rgb_round_trip(self):
        rgb = np.random.default_rng(2).integers(0, 255, size=(4, 6, 3), dtype=np.uint8)
        assert np.array_equal(decode_rgb(encode_rgb(rgb), 4, 6), rgb)

    def test_mask_length_checked(self):
        with pytest.raises(ProtocolError):
            decode_mask(encode_mask(np.zeros((2, 2))), 3, 3)


messages = st.builds(
    Message,
    id=st.integers(0, 2**31 - 1),
    type=st.sampled_from(list(MessageType)),
    session=st.text(st.characters(min_codepoint=32, max_codepoint=126), max_size=12),
    width=st.integers(0, 64),
    height=st.integers(0, 64),
    payload=st.one_of(
        st.none(),
        st.dictionaries(
            st.sampled_from(["frame", "mask", "value", "message", "protocol_version"]),
            st.one_of(st.integers(-5, 5), st.floats(0, 1), st.text(max_size=8)),
            max_size=3,
        ),
    ),
)


class TestFraming:
    @settings(max_examples=100, deadline=None)
    @given(messages)
    def test_serialize_parse_round_trip(self, message):
        data = message.to_bytes()
        stream = io.BytesIO(data)
        parsed = read_message(stream)
        assert parsed == message
        assert parsed.to_bytes() == data

    def test_eof_at_boundary_returns_none(self):
        assert read_message(io.BytesIO(b"")) is None

    def test_truncated_frame_raises(self):
        data = Message(id=1, type=MessageType.INIT).to_bytes()
        with pytest.raises(ProtocolError):
            read_message(io.BytesIO(data[:-3]))

    def test_unknown_type_rejected(self):
        bad = b'{"height":0,"id":1,"payload":null,"session":"","type":"NOPE","width":0}'
        import struct

        with pytest.raises(ProtocolError):
            read_message(io.BytesIO(struct.pack(">I", len(bad)) + bad))

    def test_missing_field_rejected(self):
        bad = b'{"id":1,"payload":null,"type":"INIT"}'
        import struct

        with pytest.raises(ProtocolError):
            read_message(io.BytesIO(struct.pack(">I", len(bad)) + bad))

    def test_write_then_read_stream_of_messages(self):
        stream = io.BytesIO()
        sent = [
            Message(id=i, type=MessageType.ESTIMATE, payload={"value": i / 7})
            for i in range(5)
        ]
        for m in sent:
            write_message(stream, m)
        stream.seek(0)
        received = [read_message(stream) for _ in range(5)]
        assert received == sent


class TestGoldenFixtures:
    @pytest.mark.parametrize(
        "name",
        [
            "init",
            "ready",
            "detect_request",
            "detect_result",
            "propagate_request",
            "propagate_result",
            "estimate_request",
            "estimate_result",
            "error",
            "shutdown",
        ],
    )
    def test_fixture_round_trips_byte_exact(self, name):
        data = (FIXTURE_DIR / f"{name}.bin").read_bytes()
        message = read_message(io.BytesIO(data))
        assert message is not None
        assert message.to_bytes() == data

    def test_fixture_semantics(self):
        init = read_message(io.BytesIO((FIXTURE_DIR / "init.bin").read_bytes()))
        assert init.type == MessageType.INIT
        assert init.payload == {"protocol_version": 1}

        prop = read_message(
            io.BytesIO((FIXTURE_DIR / "propagate_request.bin").read_bytes())
        )
        assert prop.session == "chain-1"
        assert prop.width == 2 and prop.height == 3
        mask = decode_mask(prop.payload["reference_mask"], 3, 2)
        assert np.allclose(mask.ravel(), np.arange(6) * 51 / 255)

        est = read_message(
            io.BytesIO((FIXTURE_DIR / "estimate_result.bin").read_bytes())
        )
        assert est.payload == {"value": 0.8125}


class TestEchoWorker:
    def test_handshake_and_calls(self):
        with ExternalWorker(ECHO_WORKER) as worker:
            assert worker.parallel is False
            pixels = np.zeros((6, 5, 3), dtype=np.uint8)
            mask = worker.detect(pixels)
            assert mask.shape == (6, 5)
            assert np.allclose(mask, 128 / 255)

            ref = (np.random.default_rng(0).uniform(size=(6, 5)) > 0.5).astype(float)
            out = worker.propagate("chain-1", pixels, ref, pixels)
            assert np.array_equal(out, ref)

            assert worker.estimate(pixels, ref) == 0.5

    def test_version_mismatch_names_both_versions(self):
        worker = ExternalWorker(ECHO_WORKER + ["--bad-version"])
        with pytest.raises(ExternalBackendError, match=r"1.*99|99.*1"):
            worker.start()
        worker.shutdown()

    def test_propagate_chain_matches_identity_backend(self):
        video = make_video(5)
        ref = (np.random.default_rng(3).uniform(size=(6, 5)) > 0.5).astype(float)
        with ExternalWorker(ECHO_WORKER) as worker:
            external = ExternalPropagator(worker).propagate_chain(
                video, 1, ref, "forward", 4
            )
        builtin = IdentityPropagator().propagate_chain(video, 1, ref, "forward", 4)
        assert len(external) == len(builtin) == 3
        for a, b in zip(external, builtin):
            assert np.array_equal(a, b)

    def test_dead_worker_names_message(self):
        worker = ExternalWorker([sys.executable, "-c", "import sys; sys.exit(3)"])
        with pytest.raises(ExternalBackendError, match="message 1"):
            worker.start()
        worker.shutdown()
