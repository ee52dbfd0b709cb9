"""Evaluation metrics: region similarity J, boundary accuracy F, MAE,
max F-measure, and the structure measure S, plus DAVIS-style
mean/recall/decay statistics over a sequence.

All metrics take a prediction first and the ground truth second and check
that dimensions match.  Probability predictions are float masks in [0, 1];
ground truth is always a binary mask.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
from scipy.ndimage import distance_transform_edt

from .core import as_binary_mask, as_probability_mask, binarize, boundary_pixels

_EPS = np.spacing(1)

FBETA_SQUARED = 0.3
SMEASURE_ALPHA = 0.5
BOUNDARY_TOLERANCE_RATIO = 0.008


@dataclass(frozen=True)
class SequenceStats:
    """Mean / recall / decay of a per-frame metric, DAVIS-style."""

    mean: float
    recall: float
    decay: float


def _check_dims(pred: np.ndarray, gt: np.ndarray) -> None:
    if pred.shape != gt.shape:
        raise ValueError(f"dimension mismatch: pred {pred.shape} vs gt {gt.shape}")


def mae(pred: np.ndarray, gt: np.ndarray) -> float:
    """Mean absolute per-pixel error between probabilities and ground truth."""
    p = as_probability_mask(pred)
    g = as_binary_mask(gt)
    _check_dims(p, g)
    return float(np.mean(np.abs(p - g.astype(np.float64))))


def region_j(pred: np.ndarray, gt: np.ndarray) -> float:
    """Intersection over union; 1.0 when both masks are empty."""
    p = as_binary_mask(pred)
    g = as_binary_mask(gt)
    _check_dims(p, g)
    union = np.count_nonzero(p | g)
    if union == 0:
        return 1.0
    return float(np.count_nonzero(p & g)) / union


def default_boundary_tolerance(height: int, width: int) -> int:
    """Pixel tolerance for F, a fixed fraction of the image diagonal."""
    return int(math.ceil(BOUNDARY_TOLERANCE_RATIO * math.hypot(height, width)))


def boundary_f(pred: np.ndarray, gt: np.ndarray, tolerance: int | None = None) -> float:
    """Boundary F-measure with bipartite matching within a pixel tolerance.

    Precision is the fraction of prediction boundary pixels within
    ``tolerance`` (Euclidean) of any ground-truth boundary pixel; recall is
    symmetric; F = 2PR/(P+R).
    """
    p = as_binary_mask(pred)
    g = as_binary_mask(gt)
    _check_dims(p, g)
    if tolerance is None:
        tolerance = default_boundary_tolerance(*p.shape)
    if tolerance < 0:
        raise ValueError("tolerance must be >= 0")

    pb = boundary_pixels(p)
    gb = boundary_pixels(g)
    n_p = np.count_nonzero(pb)
    n_g = np.count_nonzero(gb)
    if n_p == 0 and n_g == 0:
        return 1.0
    if n_p == 0:
        precision, recall = 1.0, 0.0
    elif n_g == 0:
        precision, recall = 0.0, 1.0
    else:
        dist_to_g = distance_transform_edt(~gb)
        dist_to_p = distance_transform_edt(~pb)
        precision = float(np.count_nonzero(pb & (dist_to_g <= tolerance))) / n_p
        recall = float(np.count_nonzero(gb & (dist_to_p <= tolerance))) / n_g
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def fbeta(pred: np.ndarray, gt: np.ndarray, threshold: float) -> float:
    """F-measure (beta^2 = 0.3) of the thresholded prediction; 0 when no hits."""
    p = as_probability_mask(pred)
    g = as_binary_mask(gt)
    _check_dims(p, g)
    pb = binarize(p, threshold)
    tp = float(np.count_nonzero(pb & g))
    if tp == 0.0:
        return 0.0
    n_pred = float(np.count_nonzero(pb))
    n_gt = float(np.count_nonzero(g))
    # (1+b^2)PR/(b^2 P + R) rewritten over counts so empty denominators vanish
    return (1.0 + FBETA_SQUARED) * tp / (FBETA_SQUARED * n_gt + n_pred)


def f_max(pred: np.ndarray, gt: np.ndarray) -> float:
    """Maximum F-measure over the 255 thresholds t = 1/256 ... 255/256."""
    p = as_probability_mask(pred)
    g = as_binary_mask(gt)
    _check_dims(p, g)
    if not g.any():
        raise ValueError("f_max undefined for all-background ground truth")
    n_gt = float(np.count_nonzero(g))
    # histogram of quantized predictions inside/outside gt gives all 255
    # (tp, pred-count) pairs at once
    q = np.minimum((p * 256.0).astype(np.int64), 255)
    fg_hist = np.bincount(q[g].ravel(), minlength=256)
    bg_hist = np.bincount(q[~g].ravel(), minlength=256)
    # threshold k/256 keeps pixels with value >= k/256, i.e. bins >= k
    tp = np.cumsum(fg_hist[::-1])[::-1]
    n_pred = tp + np.cumsum(bg_hist[::-1])[::-1]
    best = 0.0
    for k in range(1, 256):
        if tp[k] == 0:
            continue
        f = (1.0 + FBETA_SQUARED) * tp[k] / (FBETA_SQUARED * n_gt + n_pred[k])
        if f > best:
            best = float(f)
    return best


def _object_score(values: np.ndarray) -> float:
    """Similarity of a region's prediction values to an all-ones target."""
    if values.size == 0:
        return 0.0
    x = float(np.mean(values))
    sigma = float(np.std(values, ddof=1)) if values.size > 1 else 0.0
    return 2.0 * x / (x * x + 1.0 + sigma + _EPS)


def _ssim_block(pred: np.ndarray, gt: np.ndarray) -> float:
    n = pred.size
    if n == 0:
        return 1.0
    x = float(np.mean(pred))
    y = float(np.mean(gt))
    if n > 1:
        sigma_x = float(np.sum((pred - x) ** 2)) / (n - 1)
        sigma_y = float(np.sum((gt - y) ** 2)) / (n - 1)
        sigma_xy = float(np.sum((pred - x) * (gt - y))) / (n - 1)
    else:
        sigma_x = sigma_y = sigma_xy = 0.0
    alpha = 4.0 * x * y * sigma_xy
    beta = (x * x + y * y) * (sigma_x + sigma_y)
    if alpha != 0.0:
        return alpha / (beta + _EPS)
    if beta == 0.0:
        return 1.0
    return 0.0


def s_measure(pred: np.ndarray, gt: np.ndarray) -> float:
    """Structure measure: object-aware plus region-aware similarity.

    Degenerate ground truths short-circuit: all background scores
    1 - mean(pred), all foreground scores mean(pred).  Otherwise
    S = alpha * S_object + (1 - alpha) * S_region, clamped to [0, 1].
    """
    p = as_probability_mask(pred)
    g = as_binary_mask(gt)
    _check_dims(p, g)

    mu = float(np.count_nonzero(g)) / g.size
    if mu == 0.0:
        return 1.0 - float(np.mean(p))
    if mu == 1.0:
        return float(np.mean(p))

    s_fg = _object_score(p[g])
    s_bg = _object_score(1.0 - p[~g])
    s_object = mu * s_fg + (1.0 - mu) * s_bg

    # split into four blocks at the gt foreground centroid; the centroid
    # pixel belongs to the top-left block
    rows, cols = np.nonzero(g)
    cy = int(np.round(rows.mean()))
    cx = int(np.round(cols.mean()))
    h, w = g.shape
    y_split = min(cy + 1, h)
    x_split = min(cx + 1, w)
    blocks = (
        (slice(0, y_split), slice(0, x_split)),
        (slice(0, y_split), slice(x_split, w)),
        (slice(y_split, h), slice(0, x_split)),
        (slice(y_split, h), slice(x_split, w)),
    )
    fg_total = float(np.count_nonzero(g))
    s_region = 0.0
    for ys, xs in blocks:
        gb = g[ys, xs]
        weight = float(np.count_nonzero(gb)) / fg_total
        if weight == 0.0:
            continue
        s_region += weight * _ssim_block(p[ys, xs], gb.astype(np.float64))

    s = SMEASURE_ALPHA * s_object + (1.0 - SMEASURE_ALPHA) * s_region
    return float(min(max(s, 0.0), 1.0))


def sequence_stats(per_frame: Sequence[float]) -> SequenceStats:
    """Mean / recall / decay over per-frame metric values in frame order.

    Recall counts frames strictly above 0.5.  Decay is the mean of the
    first quartile minus the mean of the last, where a quartile holds
    ceil(N/4) frames.
    """
    values = [float(v) for v in per_frame]
    if not values:
        raise ValueError("sequence_stats needs at least one value")
    n = len(values)
    q = math.ceil(n / 4)
    mean = sum(values) / n
    recall = sum(1 for v in values if v > 0.5) / n
    decay = sum(values[:q]) / q - sum(values[-q:]) / q
    return SequenceStats(mean=mean, recall=recall, decay=decay)


def jf_mean(j: float, f: float) -> float:
    return 0.5 * (j + f)


def per_frame_region_j(preds: List[np.ndarray], gts: List[np.ndarray]) -> List[float]:
    return [region_j(p, g) for p, g in zip(preds, gts)]
