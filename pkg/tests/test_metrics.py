import math

import numpy as np
import pytest

from impvos.core import binarize, boundary_pixels
from impvos.metrics import (
    SequenceStats,
    boundary_f,
    default_boundary_tolerance,
    f_max,
    fbeta,
    mae,
    region_j,
    s_measure,
    sequence_stats,
)


def disk(h, w, cy, cx, r):
    yy, xx = np.mgrid[0:h, 0:w]
    return (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r


def erode_disk(mask, radius):
    """Brute-force erosion: keep pixels whose whole disk neighborhood is fg."""
    if radius == 0:
        return mask.copy()
    h, w = mask.shape
    out = np.zeros_like(mask)
    offsets = [
        (dy, dx)
        for dy in range(-radius, radius + 1)
        for dx in range(-radius, radius + 1)
        if dy * dy + dx * dx <= radius * radius
    ]
    for y in range(h):
        for x in range(w):
            if not mask[y, x]:
                continue
            ok = True
            for dy, dx in offsets:
                yy, xx = y + dy, x + dx
                if yy < 0 or yy >= h or xx < 0 or xx >= w or not mask[yy, xx]:
                    ok = False
                    break
            out[y, x] = ok
    return out


def brute_force_fmax(pred, gt):
    """Independent threshold sweep with naive precision/recall."""
    best = 0.0
    for k in range(1, 256):
        pb = pred >= k / 256
        tp = np.count_nonzero(pb & gt)
        n_pred = np.count_nonzero(pb)
        n_gt = np.count_nonzero(gt)
        if tp == 0 or n_pred == 0 or n_gt == 0:
            continue
        prec = tp / n_pred
        rec = tp / n_gt
        f = 1.3 * prec * rec / (0.3 * prec + rec)
        best = max(best, f)
    return best


def brute_force_boundary_f(pred, gt, tol):
    """Quadratic-time boundary matching."""
    pb = list(zip(*np.nonzero(boundary_pixels(pred))))
    gb = list(zip(*np.nonzero(boundary_pixels(gt))))
    if not pb and not gb:
        return 1.0

    def matched(points, targets):
        if not targets:
            return 0
        hits = 0
        for y, x in points:
            if min(math.hypot(y - ty, x - tx) for ty, tx in targets) <= tol:
                hits += 1
        return hits

    precision = matched(pb, gb) / len(pb) if pb else 1.0
    recall = matched(gb, pb) / len(gb) if gb else 1.0
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


class TestMae:
    def test_exact_match(self):
        g = disk(16, 16, 8, 8, 4)
        assert mae(g.astype(float), g) == 0.0

    def test_total_mismatch(self):
        assert mae(np.ones((16, 16)), np.zeros((16, 16), dtype=bool)) == 1.0

    def test_counted_pixels(self):
        pred = np.zeros((4, 4))
        pred[0, :4] = 1.0
        gt = np.zeros((4, 4), dtype=bool)
        assert mae(pred, gt) == 0.25

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            mae(np.zeros((4, 4)), np.zeros((4, 5), dtype=bool))


class TestRegionJ:
    def test_identical_nonempty(self):
        g = disk(16, 16, 8, 8, 5)
        assert region_j(g, g) == 1.0

    def test_disjoint(self):
        a = np.zeros((16, 16), dtype=bool)
        b = np.zeros((16, 16), dtype=bool)
        a[2, 2] = True
        b[10, 10] = True
        assert region_j(a, b) == 0.0

    def test_both_empty(self):
        z = np.zeros((8, 8), dtype=bool)
        assert region_j(z, z) == 1.0

    def test_one_third(self):
        pred = np.zeros((3, 3), dtype=bool)
        gt = np.zeros((3, 3), dtype=bool)
        pred[0, 0] = pred[0, 1] = True
        gt[0, 1] = gt[0, 2] = True
        assert region_j(pred, gt) == pytest.approx(1 / 3, abs=1e-12)


class TestBoundaryF:
    def test_identical(self):
        g = disk(16, 16, 8, 8, 5)
        for tol in (0, 1, 2):
            assert boundary_f(g, g, tol) == 1.0

    def test_empty_pred(self):
        g = disk(16, 16, 8, 8, 5)
        assert boundary_f(np.zeros_like(g), g, 2) == 0.0

    def test_shifted_square_within_tolerance(self):
        a = np.zeros((16, 16), dtype=bool)
        b = np.zeros((16, 16), dtype=bool)
        a[4:7, 4:7] = True
        b[4:7, 5:8] = True  # shifted right by one pixel
        assert boundary_f(a, b, 1) == brute_force_boundary_f(a, b, 1) == 1.0
        assert boundary_f(a, b, 0) < 1.0

    def test_matches_brute_force(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            a = rng.uniform(size=(12, 12)) > 0.6
            b = rng.uniform(size=(12, 12)) > 0.6
            for tol in (0, 1, 2):
                assert boundary_f(a, b, tol) == pytest.approx(
                    brute_force_boundary_f(a, b, tol), abs=1e-12
                )

    def test_default_tolerance_is_diagonal_fraction(self):
        assert default_boundary_tolerance(480, 854) == math.ceil(
            0.008 * math.hypot(480, 854)
        )


class TestFMax:
    def test_exact_match(self):
        g = disk(16, 16, 8, 8, 4)
        assert f_max(g.astype(float), g) == pytest.approx(1.0, abs=1e-12)

    def test_all_zero_pred(self):
        g = disk(16, 16, 8, 8, 4)
        assert f_max(np.zeros((16, 16)), g) == 0.0

    def test_scaled_prediction_still_perfect(self):
        g = disk(16, 16, 8, 8, 4)
        assert f_max(g.astype(float) * 0.6, g) == pytest.approx(1.0, abs=1e-12)

    def test_empty_gt_raises(self):
        with pytest.raises(ValueError):
            f_max(np.ones((8, 8)) * 0.5, np.zeros((8, 8), dtype=bool))

    def test_matches_brute_force(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            pred = rng.uniform(size=(16, 16))
            gt = disk(16, 16, 8, 8, rng.integers(2, 6))
            assert f_max(pred, gt) == pytest.approx(
                brute_force_fmax(pred, gt), abs=1e-12
            )

    def test_dominates_fbeta_at_half(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            pred = rng.uniform(size=(16, 16))
            gt = rng.uniform(size=(16, 16)) > 0.5
            if not gt.any():
                continue
            assert f_max(pred, gt) >= fbeta(pred, gt, 0.5) - 1e-12


class TestSMeasure:
    def test_perfect_prediction(self):
        g = disk(16, 16, 8, 8, 4)
        assert s_measure(g.astype(float), g) == pytest.approx(1.0, abs=1e-9)

    def test_all_background_gt(self):
        z = np.zeros((16, 16), dtype=bool)
        assert s_measure(np.zeros((16, 16)), z) == 1.0
        assert s_measure(np.full((16, 16), 0.25), z) == pytest.approx(0.75)

    def test_all_foreground_gt(self):
        o = np.ones((16, 16), dtype=bool)
        assert s_measure(np.full((16, 16), 0.8), o) == pytest.approx(0.8)

    def test_eroded_prediction_scores_lower(self):
        g = disk(32, 32, 16, 16, 10)
        eroded = erode_disk(g, 2)
        assert s_measure(eroded.astype(float), g) < s_measure(g.astype(float), g)

    def test_output_in_unit_interval(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            pred = rng.uniform(size=(16, 16))
            gt = rng.uniform(size=(16, 16)) > 0.5
            assert 0.0 <= s_measure(pred, gt) <= 1.0


class TestMonotoneCorruption:
    def test_metrics_monotone_under_erosion(self):
        # 20 seeded disk geometries, erosion radius 0..3
        rng = np.random.default_rng(2024)
        for _ in range(20):
            r = int(rng.integers(8, 12))
            cy = int(rng.integers(r + 4, 32 - r - 4))
            cx = int(rng.integers(r + 4, 32 - r - 4))
            gt = disk(32, 32, cy, cx, r)
            preds = [erode_disk(gt, rad) for rad in range(4)]
            s_vals = [s_measure(p.astype(float), gt) for p in preds]
            f_vals = [f_max(p.astype(float), gt) for p in preds]
            j_vals = [region_j(p, gt) for p in preds]
            m_vals = [mae(p.astype(float), gt) for p in preds]
            for a, b in zip(s_vals, s_vals[1:]):
                assert b <= a + 1e-12
            for a, b in zip(f_vals, f_vals[1:]):
                assert b <= a + 1e-12
            for a, b in zip(j_vals, j_vals[1:]):
                assert b <= a + 1e-12
            for a, b in zip(m_vals, m_vals[1:]):
                assert b >= a - 1e-12


class TestSequenceStats:
    def test_constant_values(self):
        stats = sequence_stats([0.8, 0.8, 0.8, 0.8])
        assert stats == SequenceStats(mean=pytest.approx(0.8), recall=1.0, decay=pytest.approx(0.0))

    def test_step_down(self):
        stats = sequence_stats([1, 1, 0, 0])
        assert stats.mean == 0.5
        assert stats.recall == 0.5
        assert stats.decay == 1.0

    def test_recall_is_strict(self):
        assert sequence_stats([0.4, 0.4, 0.4]).recall == 0.0
        assert sequence_stats([0.5, 0.5]).recall == 0.0

    def test_empty_list(self):
        with pytest.raises(ValueError):
            sequence_stats([])

    def test_quartile_ceiling_split(self):
        # n=5 -> quartile size 2: first [1.0, 0.8], last [0.2, 0.0]
        stats = sequence_stats([1.0, 0.8, 0.5, 0.2, 0.0])
        assert stats.decay == pytest.approx(0.9 - 0.1)


class TestBinaryMaeEquivalence:
    def test_zero_iff_equal_binary(self):
        rng = np.random.default_rng(13)
        g = rng.uniform(size=(8, 8)) > 0.5
        assert mae(g.astype(float), g) == 0.0
        soft = np.where(g, 0.9, 0.0)
        assert mae(soft, g) > 0.0
