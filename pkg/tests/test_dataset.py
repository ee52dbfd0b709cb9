import numpy as np
import pytest
from PIL import Image

from impvos.dataset import (
    DatasetError,
    ingest,
    load_schedules,
    read_probability_mask,
    save_sequence,
    save_suite,
    write_mask_png,
    write_probability_png,
)
from impvos.backends import CorruptionSchedule
from impvos.core import Frame, VideoSequence
from impvos.synthgen import MotionPath, SceneSpec, generate


def tiny_video(name="seq", n=3, h=8, w=8, sparse_gt=False):
    rng = np.random.default_rng(0)
    frames = [
        Frame(i, rng.integers(0, 255, size=(h, w, 3), dtype=np.uint8))
        for i in range(n)
    ]
    gt = []
    for i in range(n):
        if sparse_gt and i % 2 == 1:
            gt.append(None)
        else:
            m = np.zeros((h, w), dtype=bool)
            m[2 : 2 + i + 1, 3 : 3 + i + 1] = True
            gt.append(m)
    return VideoSequence(name, frames, gt=gt)


class TestRoundTrip:
    def test_sequence_round_trips(self, tmp_path):
        video = tiny_video()
        schedule = CorruptionSchedule(severities=[0.1, 0.2, 0.3], seed=4)
        save_sequence(tmp_path, video, schedule)
        loaded = ingest(tmp_path)
        assert len(loaded) == 1
        got = loaded[0]
        assert got.name == video.name
        for a, b in zip(got.frames, video.frames):
            assert np.array_equal(a.pixels, b.pixels)
        for a, b in zip(got.gt, video.gt):
            assert np.array_equal(a, b)
        schedules = load_schedules(tmp_path)
        assert schedules["seq"].severities == [0.1, 0.2, 0.3]
        assert schedules["seq"].seed == 4

    def test_generated_suite_round_trips(self, tmp_path):
        video, schedule = generate(
            SceneSpec(
                name="gen",
                n_frames=4,
                motion=MotionPath(kind="linear", start=(32, 32), velocity=(1, 1)),
                severities=(0.1, 0.1, 0.1, 0.1),
                seed=9,
            )
        )
        save_suite(tmp_path, [(video, schedule)])
        loaded = ingest(tmp_path)[0]
        for a, b in zip(loaded.frames, video.frames):
            assert np.array_equal(a.pixels, b.pixels)
        for a, b in zip(loaded.gt, video.gt):
            assert np.array_equal(a, b)

    def test_mask_png_round_trip(self, tmp_path):
        mask = np.random.default_rng(1).uniform(size=(16, 16)) > 0.5
        path = tmp_path / "m.png"
        write_mask_png(path, mask)
        with Image.open(path) as img:
            back = np.asarray(img.convert("L")) > 0
        assert np.array_equal(back, mask)

    def test_probability_png_quantizes(self, tmp_path):
        mask = np.linspace(0, 1, 64).reshape(8, 8)
        path = tmp_path / "p.png"
        write_probability_png(path, mask)
        back = read_probability_mask(path)
        assert np.allclose(back, np.round(mask * 255) / 255, atol=1e-12)


class TestSparseAnnotations:
    def test_sparse_gt_loaded_with_nones(self, tmp_path):
        video = tiny_video(sparse_gt=True)
        save_sequence(tmp_path, video)
        got = ingest(tmp_path)[0]
        assert got.annotated_indices() == [0, 2]

    def test_unannotated_sequence(self, tmp_path):
        video = VideoSequence("plain", tiny_video().frames, gt=None)
        save_sequence(tmp_path, video)
        got = ingest(tmp_path)[0]
        assert got.gt is None


class TestErrors:
    def test_missing_root(self, tmp_path):
        with pytest.raises(DatasetError):
            ingest(tmp_path / "nope")

    def test_empty_sequence_dir(self, tmp_path):
        (tmp_path / "JPEGImages" / "seq").mkdir(parents=True)
        with pytest.raises(DatasetError):
            ingest(tmp_path)

    def test_non_numeric_frame_names(self, tmp_path):
        d = tmp_path / "JPEGImages" / "seq"
        d.mkdir(parents=True)
        Image.fromarray(np.zeros((4, 4, 3), dtype=np.uint8)).save(d / "frame_a.png")
        with pytest.raises(DatasetError):
            ingest(tmp_path)

    def test_mixed_resolution_is_hard_error(self, tmp_path):
        d = tmp_path / "JPEGImages" / "seq"
        d.mkdir(parents=True)
        Image.fromarray(np.zeros((4, 4, 3), dtype=np.uint8)).save(d / "00000.png")
        Image.fromarray(np.zeros((4, 5, 3), dtype=np.uint8)).save(d / "00001.png")
        with pytest.raises(DatasetError):
            ingest(tmp_path)

    def test_unreadable_image(self, tmp_path):
        d = tmp_path / "JPEGImages" / "seq"
        d.mkdir(parents=True)
        (d / "00000.png").write_bytes(b"not a png")
        with pytest.raises(DatasetError):
            ingest(tmp_path)

    def test_frames_sorted_numerically(self, tmp_path):
        d = tmp_path / "JPEGImages" / "seq"
        d.mkdir(parents=True)
        for i, value in ((2, 20), (10, 100), (1, 10)):
            Image.fromarray(
                np.full((4, 4, 3), value, dtype=np.uint8)
            ).save(d / f"{i}.png")
        got = ingest(tmp_path)[0]
        values = [f.pixels[0, 0, 0] for f in got.frames]
        assert values == [10, 20, 100]
