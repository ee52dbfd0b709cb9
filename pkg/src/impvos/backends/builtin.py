"""Built-in backends: ground-truth oracles, a seeded noisy oracle that
stands in for an imperfect detector, and a classical template-matching
propagator that recovers integer translations.

Everything here is pure and deterministic given (inputs, seed), so
instances are freely shareable across workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Protocol, Sequence

import numpy as np
from scipy import ndimage

from ..core import Frame, VideoSequence, binarize, boundary_pixels
from ..metrics import mae, s_measure

# dilation is more likely than erosion: detectors that over-segment
# (attached shadows, reflections) are the common failure, and a symmetric
# mix would let large ensembles cancel the corruption outright
DILATE_PROBABILITY = 0.8
MORPH_RADIUS_PER_SEVERITY = 5.0
BLOB_AREA_PER_SEVERITY = 0.02
NCC_CONTEXT_MARGIN = 2
BASE_MAX_SHIFT = 7
BASE_RESOLUTION = 64


class Detector(Protocol):
    """Per-frame foreground detector producing a saliency cue."""

    shareable: bool

    def detect(self, frame: Frame) -> np.ndarray: ...


@dataclass(frozen=True)
class CorruptionSchedule:
    """Per-frame corruption severity in [0, 1] for the noisy oracle."""

    severities: List[float]
    seed: int

    def __post_init__(self):
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        for c in self.severities:
            if not 0.0 <= c <= 1.0:
                raise ValueError(f"severity {c} outside [0, 1]")

    def __len__(self) -> int:
        return len(self.severities)

    @property
    def mean_severity(self) -> float:
        return sum(self.severities) / len(self.severities)


def _disk_footprint(radius: int) -> np.ndarray:
    yy, xx = np.mgrid[-radius : radius + 1, -radius : radius + 1]
    return yy * yy + xx * xx <= radius * radius


def oracle_detect(frame: Frame, gt: Optional[np.ndarray]) -> np.ndarray:
    if gt is None:
        raise ValueError(f"no ground truth for frame {frame.index}")
    return gt.astype(np.float64)


def noisy_detect(
    frame: Frame, gt: Optional[np.ndarray], c: float, seed: int
) -> np.ndarray:
    """Deterministically corrupt the ground truth at severity c.

    The mask is dilated or eroded by radius round(5c), and with probability
    c a spurious disk covering 2c% of the frame lands uniformly at random.
    All randomness derives from (seed, frame index) only.
    """
    if gt is None:
        raise ValueError(f"no ground truth for frame {frame.index}")
    if not 0.0 <= c <= 1.0:
        raise ValueError(f"severity {c} outside [0, 1]")
    rng = np.random.default_rng([seed, frame.index])
    mask = gt.astype(bool)

    radius = int(round(c * MORPH_RADIUS_PER_SEVERITY))
    dilate = rng.random() < DILATE_PROBABILITY
    if radius > 0:
        footprint = _disk_footprint(radius)
        if dilate:
            mask = ndimage.binary_dilation(mask, structure=footprint)
        else:
            mask = ndimage.binary_erosion(mask, structure=footprint)

    if rng.random() < c:
        h, w = mask.shape
        blob_cy = int(rng.integers(0, h))
        blob_cx = int(rng.integers(0, w))
        blob_area = c * BLOB_AREA_PER_SEVERITY * h * w
        blob_r = math.sqrt(blob_area / math.pi)
        yy, xx = np.mgrid[0:h, 0:w]
        blob = (yy - blob_cy) ** 2 + (xx - blob_cx) ** 2 <= blob_r * blob_r
        mask = mask | blob

    return np.clip(mask.astype(np.float64), 0.0, 1.0)


@dataclass(frozen=True)
class OracleDetector:
    """Returns the ground truth as probabilities; test-only."""

    gt: Sequence[Optional[np.ndarray]]
    shareable: bool = True

    def detect(self, frame: Frame) -> np.ndarray:
        return oracle_detect(frame, self.gt[frame.index])


@dataclass(frozen=True)
class NoisyOracleDetector:
    """Ground truth corrupted per a fixed schedule; the desk-scale stand-in
    for an imperfect salient-object detector."""

    gt: Sequence[Optional[np.ndarray]]
    schedule: CorruptionSchedule
    shareable: bool = True

    def detect(self, frame: Frame) -> np.ndarray:
        return noisy_detect(
            frame,
            self.gt[frame.index],
            self.schedule.severities[frame.index],
            self.schedule.seed,
        )


def _grayscale(pixels: np.ndarray) -> np.ndarray:
    return pixels.astype(np.float64).mean(axis=2)


def classical_propagate_step(
    prev_frame: Frame,
    prev_mask: np.ndarray,
    next_frame: Frame,
    max_shift: int,
) -> np.ndarray:
    """One propagation step: find the integer translation within
    ±max_shift that maximizes normalized cross-correlation between the
    patch at the mask's bounding box (plus a small context margin) in the
    previous frame and the next frame, then shift the mask accordingly
    with zero fill.

    Ties go to the smallest |dx|+|dy|, then lexicographic (dx, dy).  An
    empty mask is returned unchanged.
    """
    if max_shift < 0:
        raise ValueError("max_shift must be >= 0")
    fg = np.asarray(prev_mask) >= 0.5
    if not fg.any():
        return np.array(prev_mask, dtype=np.float64, copy=True)

    h, w = fg.shape
    rows, cols = np.nonzero(fg)
    y0 = max(int(rows.min()) - NCC_CONTEXT_MARGIN, 0)
    y1 = min(int(rows.max()) + 1 + NCC_CONTEXT_MARGIN, h)
    x0 = max(int(cols.min()) - NCC_CONTEXT_MARGIN, 0)
    x1 = min(int(cols.max()) + 1 + NCC_CONTEXT_MARGIN, w)

    gray_prev = _grayscale(prev_frame.pixels)
    gray_next = _grayscale(next_frame.pixels)
    template = gray_prev[y0:y1, x0:x1]

    best_score = -np.inf
    best = (0, 0)
    for dy in range(-max_shift, max_shift + 1):
        ty0, ty1 = y0 + dy, y1 + dy
        oy0, oy1 = max(ty0, 0), min(ty1, h)
        if oy1 <= oy0:
            continue
        for dx in range(-max_shift, max_shift + 1):
            tx0, tx1 = x0 + dx, x1 + dx
            ox0, ox1 = max(tx0, 0), min(tx1, w)
            if ox1 <= ox0:
                continue
            a = template[oy0 - ty0 : oy1 - ty0, ox0 - tx0 : ox1 - tx0]
            b = gray_next[oy0:oy1, ox0:ox1]
            if a.size < 2:
                continue
            am = a - a.mean()
            bm = b - b.mean()
            denom = math.sqrt(float(np.sum(am * am)) * float(np.sum(bm * bm)))
            score = float(np.sum(am * bm)) / denom if denom > 0.0 else 0.0
            if score > best_score or (
                score == best_score
                and (abs(dx) + abs(dy), dx, dy) < (abs(best[0]) + abs(best[1]), *best)
            ):
                best_score = score
                best = (dx, dy)

    return shift_mask(np.asarray(prev_mask, dtype=np.float64), best[0], best[1])


def shift_mask(mask: np.ndarray, dx: int, dy: int) -> np.ndarray:
    """Translate by (dx, dy) = (columns, rows), zero-filling at edges."""
    h, w = mask.shape
    out = np.zeros_like(mask)
    src_y0, src_y1 = max(-dy, 0), min(h - dy, h)
    src_x0, src_x1 = max(-dx, 0), min(w - dx, w)
    if src_y1 > src_y0 and src_x1 > src_x0:
        out[src_y0 + dy : src_y1 + dy, src_x0 + dx : src_x1 + dx] = mask[
            src_y0:src_y1, src_x0:src_x1
        ]
    return out


def default_max_shift(height: int, width: int) -> int:
    """Shift search radius, scaled linearly with resolution from the
    64-pixel synthetic baseline."""
    return max(1, round(BASE_MAX_SHIFT * max(height, width) / BASE_RESOLUTION))


def _chain_indices(start: int, stop: int) -> List[int]:
    if stop >= start:
        return list(range(start + 1, stop + 1))
    return list(range(start - 1, stop - 1, -1))


@dataclass(frozen=True)
class IdentityPropagator:
    """Copies the reference mask to every visited frame; stub backend."""

    shareable: bool = True

    def propagate_chain(
        self,
        video: VideoSequence,
        start: int,
        reference_mask: np.ndarray,
        direction: str,
        stop: int,
    ) -> List[np.ndarray]:
        _check_chain_args(video, start, direction, stop)
        return [reference_mask.copy() for _ in _chain_indices(start, stop)]


@dataclass(frozen=True)
class ClassicalPropagator:
    """Frame-to-frame template matching; each step consumes the previous
    step's mask."""

    max_shift: Optional[int] = None
    shareable: bool = True

    def propagate_chain(
        self,
        video: VideoSequence,
        start: int,
        reference_mask: np.ndarray,
        direction: str,
        stop: int,
    ) -> List[np.ndarray]:
        _check_chain_args(video, start, direction, stop)
        shift = self.max_shift
        if shift is None:
            shift = default_max_shift(video.height, video.width)
        masks = []
        current = reference_mask
        prev_idx = start
        for idx in _chain_indices(start, stop):
            current = classical_propagate_step(
                video.frames[prev_idx], current, video.frames[idx], shift
            )
            masks.append(current)
            prev_idx = idx
        return masks


def _check_chain_args(video: VideoSequence, start: int, direction: str, stop: int):
    n = len(video)
    if not (0 <= start < n and 0 <= stop < n):
        raise ValueError(f"chain endpoints ({start}, {stop}) outside [0, {n})")
    if direction == "forward" and stop < start:
        raise ValueError(f"forward chain must have stop >= start ({start}->{stop})")
    if direction == "backward" and stop > start:
        raise ValueError(f"backward chain must have stop <= start ({start}->{stop})")
    if direction not in ("forward", "backward"):
        raise ValueError(f"unknown direction {direction!r}")


@dataclass(frozen=True)
class OracleEstimator:
    """True structure measure against ground truth; test/ablation use."""

    gt: Sequence[Optional[np.ndarray]]
    shareable: bool = True

    def estimate(self, frame: Frame, cue: np.ndarray) -> float:
        g = self.gt[frame.index]
        if g is None:
            raise ValueError(f"no ground truth for frame {frame.index}")
        return s_measure(cue, g)


@dataclass(frozen=True)
class MaeOracleEstimator:
    """1 - MAE against ground truth; the pixel-wise ablation arm."""

    gt: Sequence[Optional[np.ndarray]]
    shareable: bool = True

    def estimate(self, frame: Frame, cue: np.ndarray) -> float:
        g = self.gt[frame.index]
        if g is None:
            raise ValueError(f"no ground truth for frame {frame.index}")
        return 1.0 - mae(cue, g)


@dataclass(frozen=True)
class HeuristicEstimator:
    """Ground-truth-free quality proxy: fewer connected components, compact
    boundary, and strong inside/outside color contrast all raise the score."""

    binarize_threshold: float = 0.5
    shareable: bool = True

    def estimate(self, frame: Frame, cue: np.ndarray) -> float:
        mask = binarize(cue, self.binarize_threshold)
        n_fg = int(np.count_nonzero(mask))
        if n_fg == 0 or n_fg == mask.size:
            return 0.0

        _, n_components = ndimage.label(mask)
        component_score = 1.0 / n_components

        perimeter = int(np.count_nonzero(boundary_pixels(mask)))
        compactness = min(1.0, 4.0 * math.pi * n_fg / (perimeter * perimeter))

        pixels = frame.pixels.astype(np.float64)
        inside = pixels[mask].mean(axis=0)
        outside = pixels[~mask].mean(axis=0)
        contrast = min(1.0, float(np.abs(inside - outside).mean()) / 255.0)

        return (component_score + compactness + contrast) / 3.0
