"""Domain types and deterministic mask algebra shared by the whole pipeline.

Masks come in two flavors, both plain numpy arrays:

* probability mask: float64 H×W with every value in [0, 1] (the "saliency cue")
* binary mask: bool H×W, always derived from a probability mask by
  thresholding, never authoritative on its own
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np


class PipelineError(Exception):
    """A pipeline stage failed in a way that names the offending frame/message."""


def as_probability_mask(values: np.ndarray) -> np.ndarray:
    """Validate and normalize an array into a float64 probability mask."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"probability mask must be 2-D, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError("probability mask must be non-empty")
    if np.min(arr) < 0.0 or np.max(arr) > 1.0:
        raise ValueError("probability mask values must lie in [0, 1]")
    return arr


def as_binary_mask(values: np.ndarray) -> np.ndarray:
    arr = np.asarray(values)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError(f"binary mask must be non-empty 2-D, got shape {arr.shape}")
    if arr.dtype != np.bool_:
        if not np.isin(arr, (0, 1)).all():
            raise ValueError("binary mask values must be 0/1")
        arr = arr.astype(bool)
    return arr


@dataclass(frozen=True)
class Frame:
    """One RGB video frame (8-bit per channel, H×W×3)."""

    index: int
    pixels: np.ndarray

    def __post_init__(self):
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 3:
            raise ValueError(f"frame pixels must be H×W×3, got {self.pixels.shape}")
        if self.pixels.dtype != np.uint8:
            raise ValueError("frame pixels must be uint8")
        if self.height < 1 or self.width < 1:
            raise ValueError("frame must be at least 1×1")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass
class VideoSequence:
    """Ordered frames plus optional ground-truth masks.

    ``gt`` entries may be None for unannotated frames (sparse annotation,
    as in FBMS-style datasets).
    """

    name: str
    frames: List[Frame]
    gt: Optional[List[Optional[np.ndarray]]] = None

    def __post_init__(self):
        if len(self.frames) < 1:
            raise ValueError(f"sequence {self.name!r} has no frames")
        h, w = self.frames[0].height, self.frames[0].width
        for f in self.frames:
            if (f.height, f.width) != (h, w):
                raise ValueError(
                    f"sequence {self.name!r}: frame {f.index} is "
                    f"{f.height}×{f.width}, expected {h}×{w}"
                )
        if self.gt is not None:
            if len(self.gt) != len(self.frames):
                raise ValueError(
                    f"sequence {self.name!r}: {len(self.gt)} gt entries for "
                    f"{len(self.frames)} frames"
                )
            for i, g in enumerate(self.gt):
                if g is not None and g.shape != (h, w):
                    raise ValueError(
                        f"sequence {self.name!r}: gt {i} shape {g.shape} != ({h}, {w})"
                    )

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def height(self) -> int:
        return self.frames[0].height

    @property
    def width(self) -> int:
        return self.frames[0].width

    def annotated_indices(self) -> List[int]:
        if self.gt is None:
            return []
        return [i for i, g in enumerate(self.gt) if g is not None]


# One probability mask per frame, in frame order.  Mutated (replaced) across
# IMP iterations.
CueSet = List[np.ndarray]


@dataclass(frozen=True)
class FrameScore:
    """Per-frame easy/hard verdict: quality estimate, size filter bit, product."""

    frame_index: int
    s_hat: float
    size_ok: int
    score: float

    def __post_init__(self):
        if not 0.0 <= self.s_hat <= 1.0:
            raise ValueError(f"s_hat {self.s_hat} outside [0, 1]")
        if self.size_ok not in (0, 1):
            raise ValueError(f"size_ok must be 0 or 1, got {self.size_ok}")
        if self.score != self.s_hat * self.size_ok:
            raise ValueError("score must equal s_hat * size_ok")


@dataclass(frozen=True)
class PipelineConfig:
    k: int = 2
    iterations: int = 4
    th_small: float = 0.005
    th_large: float = 0.60
    binarize_threshold: float = 0.5
    rng_seed: int = 0
    tiu_enabled: bool = True
    reference_policy: str = "efs"  # efs | first-frame | all-frames

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not (0.0 <= self.th_small < self.th_large <= 1.0):
            raise ValueError(
                f"need 0 <= th_small < th_large <= 1, got "
                f"({self.th_small}, {self.th_large})"
            )
        if not 0.0 < self.binarize_threshold < 1.0:
            raise ValueError("binarize_threshold must lie in (0, 1)")
        if self.reference_policy not in ("efs", "first-frame", "all-frames"):
            raise ValueError(f"unknown reference_policy {self.reference_policy!r}")


@dataclass
class IterationTrace:
    """Record of one IMP iteration: who was selected, from what scores."""

    iteration: int
    selected: List[int]
    scores: List[FrameScore]
    cues: CueSet = field(repr=False, default_factory=list)
    frame_metrics: Optional[List[float]] = None

    def __post_init__(self):
        if len(set(self.selected)) != len(self.selected):
            raise ValueError("selected easy frames must be distinct")


def binarize(mask: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """Threshold a probability mask; comparison is inclusive (>= threshold)."""
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    return np.asarray(mask, dtype=np.float64) >= threshold


def area_fraction(mask: np.ndarray) -> float:
    """Foreground area as a fraction of total pixels, in [0, 1]."""
    m = as_binary_mask(mask)
    return float(np.count_nonzero(m)) / m.size


def aggregate_mean(masks: Sequence[np.ndarray]) -> np.ndarray:
    """Pixel-wise arithmetic mean of probability masks."""
    if len(masks) == 0:
        raise ValueError("cannot aggregate an empty list of masks")
    shape = masks[0].shape
    for m in masks[1:]:
        if m.shape != shape:
            raise ValueError(f"mask shape {m.shape} != {shape}")
    out = np.zeros(shape, dtype=np.float64)
    for m in masks:
        out += np.asarray(m, dtype=np.float64)
    out /= len(masks)
    return np.clip(out, 0.0, 1.0)


def boundary_pixels(mask: np.ndarray) -> np.ndarray:
    """Foreground pixels with at least one background 4-neighbor.

    The frame edge counts as background, so a foreground pixel on the
    border is always boundary.
    """
    m = as_binary_mask(mask)
    padded = np.pad(m, 1, mode="constant", constant_values=False)
    interior = (
        padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    )
    return m & ~interior
