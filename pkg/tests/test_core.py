import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from impvos.core import (
    Frame,
    FrameScore,
    PipelineConfig,
    VideoSequence,
    aggregate_mean,
    area_fraction,
    binarize,
    boundary_pixels,
)


def make_frame(index=0, h=4, w=4, value=0):
    return Frame(index=index, pixels=np.full((h, w, 3), value, dtype=np.uint8))


prob_masks = arrays(
    np.float64,
    st.tuples(st.integers(1, 8), st.integers(1, 8)),
    elements=st.floats(0.0, 1.0),
)


class TestBinarize:
    def test_all_high(self):
        m = np.full((3, 3), 0.9)
        assert binarize(m, 0.5).all()

    def test_all_zero(self):
        m = np.zeros((3, 3))
        assert not binarize(m, 0.5).any()

    def test_boundary_inclusive(self):
        m = np.array([[0.4, 0.6], [0.5, 0.49]])
        expected = np.array([[False, True], [True, False]])
        assert (binarize(m, 0.5) == expected).all()

    @pytest.mark.parametrize("threshold", [0.0, 1.0, -0.1, 1.5])
    def test_threshold_out_of_range(self, threshold):
        with pytest.raises(ValueError):
            binarize(np.zeros((2, 2)), threshold)

    @given(prob_masks, st.floats(0.01, 0.99))
    def test_idempotent(self, mask, threshold):
        once = binarize(mask, threshold)
        again = binarize(once.astype(np.float64), threshold)
        assert (once == again).all()


class TestAreaFraction:
    def test_all_ones(self):
        assert area_fraction(np.ones((4, 4), dtype=bool)) == 1.0

    def test_all_zeros(self):
        assert area_fraction(np.zeros((4, 4), dtype=bool)) == 0.0

    def test_partial(self):
        m = np.zeros((4, 4), dtype=bool)
        m[0, :4] = True
        assert area_fraction(m) == 0.25

    @given(prob_masks, st.floats(0.01, 0.98))
    def test_nonincreasing_in_threshold(self, mask, t):
        lo = area_fraction(binarize(mask, t))
        hi = area_fraction(binarize(mask, min(t + 0.01, 0.99)))
        assert hi <= lo


class TestAggregateMean:
    def test_two_constant_masks(self):
        out = aggregate_mean([np.ones((2, 2)), np.zeros((2, 2))])
        assert np.allclose(out, 0.5)

    def test_single_mask_identity(self):
        m = np.random.default_rng(0).uniform(size=(3, 3))
        assert np.array_equal(aggregate_mean([m]), m)

    def test_three_masks(self):
        out = aggregate_mean(
            [np.full((2, 2), 0.2), np.full((2, 2), 0.4), np.full((2, 2), 0.9)]
        )
        assert np.allclose(out, 0.5)

    def test_empty_list(self):
        with pytest.raises(ValueError):
            aggregate_mean([])

    def test_mismatched_dims(self):
        with pytest.raises(ValueError):
            aggregate_mean([np.zeros((2, 2)), np.zeros((3, 2))])

    @settings(max_examples=30)
    @given(st.lists(arrays(np.float64, (4, 5), elements=st.floats(0, 1)), min_size=2, max_size=5),
           st.randoms())
    def test_permutation_invariant(self, masks, rnd):
        shuffled = list(masks)
        rnd.shuffle(shuffled)
        assert np.allclose(aggregate_mean(masks), aggregate_mean(shuffled))


class TestBoundaryPixels:
    def test_all_zeros(self):
        assert not boundary_pixels(np.zeros((4, 4), dtype=bool)).any()

    def test_single_pixel(self):
        m = np.zeros((5, 5), dtype=bool)
        m[2, 2] = True
        assert (boundary_pixels(m) == m).all()

    def test_filled_square_ring(self):
        m = np.zeros((5, 5), dtype=bool)
        m[1:4, 1:4] = True
        ring = boundary_pixels(m)
        # enumerate: all 9 square pixels except the center have a bg 4-neighbor
        expected = m.copy()
        expected[2, 2] = False
        assert (ring == expected).all()
        assert np.count_nonzero(ring) == 8

    def test_edge_counts_as_background(self):
        m = np.ones((3, 3), dtype=bool)
        ring = boundary_pixels(m)
        expected = np.ones((3, 3), dtype=bool)
        expected[1, 1] = False
        assert (ring == expected).all()

    @given(prob_masks)
    def test_subset_of_foreground(self, mask):
        m = binarize(mask, 0.5)
        assert not (boundary_pixels(m) & ~m).any()


class TestTypes:
    def test_frame_requires_rgb(self):
        with pytest.raises(ValueError):
            Frame(index=0, pixels=np.zeros((4, 4), dtype=np.uint8))

    def test_sequence_rejects_mixed_resolution(self):
        with pytest.raises(ValueError):
            VideoSequence("bad", [make_frame(0, 4, 4), make_frame(1, 4, 5)])

    def test_sequence_gt_length_checked(self):
        frames = [make_frame(0), make_frame(1)]
        with pytest.raises(ValueError):
            VideoSequence("bad", frames, gt=[np.zeros((4, 4), dtype=bool)])

    def test_sparse_gt_annotated_indices(self):
        frames = [make_frame(i) for i in range(3)]
        gt = [np.zeros((4, 4), dtype=bool), None, np.ones((4, 4), dtype=bool)]
        seq = VideoSequence("s", frames, gt=gt)
        assert seq.annotated_indices() == [0, 2]

    def test_frame_score_checks_product(self):
        with pytest.raises(ValueError):
            FrameScore(frame_index=0, s_hat=0.9, size_ok=0, score=0.9)
        s = FrameScore(frame_index=0, s_hat=0.9, size_ok=1, score=0.9)
        assert s.score == s.s_hat * s.size_ok

    def test_config_threshold_ordering(self):
        with pytest.raises(ValueError):
            PipelineConfig(th_small=0.6, th_large=0.6)
        with pytest.raises(ValueError):
            PipelineConfig(th_small=0.7, th_large=0.6)
