"""Deterministic synthetic videos with known ground truth and controllable
per-frame difficulty.

A scene is a flat-shaded shape moving over a smooth textured background,
optionally joined by same-colored distractor shapes.  Every pixel derives
from the scene seed, so identical specs render byte-identical videos.  The
paired corruption schedule drives the noisy oracle detector, letting tests
place easy and hard frames wherever they need them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.ndimage import gaussian_filter

from .backends.builtin import CorruptionSchedule
from .core import Frame, VideoSequence

OBJECT_COLOR = (220, 90, 50)
BACKGROUND_LOW = 30
BACKGROUND_HIGH = 110
EDGE_MARGIN = 1
_RENDER_STREAM = 999_983
_WALK_STREAM = 424_242


@dataclass(frozen=True)
class MotionPath:
    """Per-frame center positions for a shape.

    linear:      start + t * velocity
    sinusoidal:  center + amplitude * sin(2*pi*t/period + phase), rounded;
                 the x axis may run on its own period/phase (circles,
                 Lissajous sweeps)
    random-walk: start plus seeded integer steps in [-step, step], clamped
                 to keep the shape just inside the frame
    """

    kind: str  # linear | sinusoidal | random-walk
    start: Tuple[int, int] = (0, 0)  # (cy, cx)
    velocity: Tuple[float, float] = (0.0, 0.0)
    amplitude: Tuple[float, float] = (0.0, 0.0)
    period: float = 30.0
    phase: float = 0.0
    period_x: Optional[float] = None
    phase_x: Optional[float] = None
    step: int = 2

    def positions(
        self,
        n_frames: int,
        seed: int,
        bounds: Optional[Tuple[int, int, int, int]] = None,
    ) -> List[Tuple[int, int]]:
        cy0, cx0 = self.start
        if self.kind == "linear":
            return [
                (round(cy0 + t * self.velocity[0]), round(cx0 + t * self.velocity[1]))
                for t in range(n_frames)
            ]
        if self.kind == "sinusoidal":
            period_x = self.period if self.period_x is None else self.period_x
            phase_x = self.phase if self.phase_x is None else self.phase_x
            out = []
            for t in range(n_frames):
                angle_y = 2.0 * math.pi * t / self.period + self.phase
                angle_x = 2.0 * math.pi * t / period_x + phase_x
                out.append(
                    (
                        round(cy0 + self.amplitude[0] * math.sin(angle_y)),
                        round(cx0 + self.amplitude[1] * math.sin(angle_x)),
                    )
                )
            return out
        if self.kind == "random-walk":
            rng = np.random.default_rng([seed, _WALK_STREAM])
            cy, cx = cy0, cx0
            out = [(cy, cx)]
            for _ in range(n_frames - 1):
                cy += int(rng.integers(-self.step, self.step + 1))
                cx += int(rng.integers(-self.step, self.step + 1))
                if bounds is not None:
                    lo_y, hi_y, lo_x, hi_x = bounds
                    cy = min(max(cy, lo_y), hi_y)
                    cx = min(max(cx, lo_x), hi_x)
                out.append((cy, cx))
            return out
        raise ValueError(f"unknown motion kind {self.kind!r}")


@dataclass(frozen=True)
class DistractorSpec:
    shape: str
    size: int
    motion: MotionPath


@dataclass(frozen=True)
class SceneSpec:
    name: str
    width: int = 64
    height: int = 64
    n_frames: int = 30
    shape: str = "disk"  # disk | rectangle | polygon
    size: int = 9
    motion: MotionPath = MotionPath(kind="linear", start=(32, 32))
    distractors: Tuple[DistractorSpec, ...] = ()
    severities: Tuple[float, ...] = ()
    seed: int = 0
    allow_exit: bool = False

    def __post_init__(self):
        if self.n_frames < 1:
            raise ValueError("need at least one frame")
        if self.severities and len(self.severities) != self.n_frames:
            raise ValueError(
                f"{len(self.severities)} severities for {self.n_frames} frames"
            )
        if 2 * self.size + 2 * EDGE_MARGIN >= min(self.width, self.height):
            raise ValueError(
                f"shape of size {self.size} does not fit a "
                f"{self.width}×{self.height} frame"
            )


def shape_mask(
    shape: str, size: int, center: Tuple[int, int], height: int, width: int
) -> np.ndarray:
    cy, cx = center
    yy, xx = np.mgrid[0:height, 0:width]
    if shape == "disk":
        return (yy - cy) ** 2 + (xx - cx) ** 2 <= size * size
    if shape == "rectangle":
        return (np.abs(yy - cy) <= size) & (np.abs(xx - cx) <= size)
    if shape == "polygon":
        # isoceles triangle pointing up, vertices at (-s,0), (s,s), (s,-s);
        # this order keeps every interior point on the non-negative side of
        # each edge with image coordinates (y down)
        vertices = [(cy - size, cx), (cy + size, cx + size), (cy + size, cx - size)]
        inside = np.ones((height, width), dtype=bool)
        for (ay, ax), (by, bx) in zip(vertices, vertices[1:] + vertices[:1]):
            cross = (bx - ax) * (yy - ay) - (by - ay) * (xx - ax)
            inside &= cross >= 0
        return inside
    raise ValueError(f"unknown shape {shape!r}")


def _background(spec: SceneSpec) -> np.ndarray:
    """Smooth static texture: low spatial frequency so template matching
    keys on the object, not on accidental background detail."""
    rng = np.random.default_rng([spec.seed, _RENDER_STREAM])
    noise = rng.uniform(0.0, 1.0, size=(spec.height, spec.width, 3))
    smooth = gaussian_filter(noise, sigma=(3.0, 3.0, 0.0))
    lo, hi = smooth.min(), smooth.max()
    span = BACKGROUND_HIGH - BACKGROUND_LOW
    return (BACKGROUND_LOW + (smooth - lo) / (hi - lo) * span).astype(np.uint8)


def generate(spec: SceneSpec) -> Tuple[VideoSequence, CorruptionSchedule]:
    """Render the scene and return it with its paired corruption schedule."""
    positions = spec.motion.positions(spec.n_frames, spec.seed, _walk_bounds(spec))
    distractor_positions = [
        d.motion.positions(spec.n_frames, spec.seed + 1 + i, _walk_bounds(spec, d.size))
        for i, d in enumerate(spec.distractors)
    ]
    background = _background(spec)

    frames: List[Frame] = []
    gt: List[np.ndarray] = []
    for t in range(spec.n_frames):
        mask = shape_mask(
            spec.shape, spec.size, positions[t], spec.height, spec.width
        )
        if not spec.allow_exit:
            _check_inside(spec, mask, t)
        pixels = background.copy()
        for d, d_positions in zip(spec.distractors, distractor_positions):
            d_mask = shape_mask(d.shape, d.size, d_positions[t], spec.height, spec.width)
            pixels[d_mask] = OBJECT_COLOR
        pixels[mask] = OBJECT_COLOR  # object drawn last, so gt matches pixels
        frames.append(Frame(index=t, pixels=pixels))
        gt.append(mask)

    severities = list(spec.severities) if spec.severities else [0.0] * spec.n_frames
    video = VideoSequence(name=spec.name, frames=frames, gt=gt)
    return video, CorruptionSchedule(severities=severities, seed=spec.seed)


def _walk_bounds(spec: SceneSpec, size: Optional[int] = None):
    s = spec.size if size is None else size
    return (
        s + EDGE_MARGIN,
        spec.height - 1 - s - EDGE_MARGIN,
        s + EDGE_MARGIN,
        spec.width - 1 - s - EDGE_MARGIN,
    )


def _check_inside(spec: SceneSpec, mask: np.ndarray, t: int) -> None:
    if not mask.any():
        raise ValueError(f"{spec.name}: object fully left the frame at {t}")
    rows, cols = np.nonzero(mask)
    if (
        rows.min() < EDGE_MARGIN
        or cols.min() < EDGE_MARGIN
        or rows.max() > spec.height - 1 - EDGE_MARGIN
        or cols.max() > spec.width - 1 - EDGE_MARGIN
    ):
        raise ValueError(
            f"{spec.name}: object touches the frame border at frame {t} "
            f"without a scheduled exit"
        )


def _endpoint_severities(n: int, peak: float, mid: float, low: float) -> Tuple[float, ...]:
    """Corrupted endpoints, a clean-ish middle window, moderate shoulders."""
    out = []
    edge = n // 6
    shoulder = n // 6
    for t in range(n):
        if t < edge or t >= n - edge:
            out.append(peak)
        elif t < edge + shoulder or t >= n - edge - shoulder:
            out.append(mid)
        else:
            out.append(low)
    return tuple(out)


def _window_severities(
    n: int, base: float, window: Tuple[int, int], low: float
) -> Tuple[float, ...]:
    lo, hi = window
    return tuple(low if lo <= t < hi else base for t in range(n))


def standard_suite(seed: int = 1) -> List[Tuple[VideoSequence, CorruptionSchedule]]:
    """Ten 64×64×30 sequences covering the difficulty regimes the
    acceptance properties exercise: corrupted endpoints with an easy middle
    (reference-selection regime), clean windows away from an edge approach
    (iteration-improvement regime), same-colored distractors (temporal
    information regime), a near-exit object (size-filter regime), and a
    uniform-corruption baseline.

    Severity never drops below 0.55, so even the easiest frame carries a
    two-to-three-pixel morphological error plus a better-than-even blob
    chance, leaving the iterative pipeline real work on every sequence.
    """
    n = 30
    specs = [
        SceneSpec(
            name="fig1_endpoints_a",
            shape="disk",
            size=9,
            motion=MotionPath(
                kind="sinusoidal",
                start=(40, 40),
                amplitude=(13, 13),
                period=50,
                phase=1.319,  # single corner visit near frame 2
            ),
            severities=_endpoint_severities(n, peak=0.95, mid=0.75, low=0.55),
            seed=seed * 100 + 1,
        ),
        SceneSpec(
            name="fig1_endpoints_b",
            shape="disk",
            size=8,
            motion=MotionPath(
                kind="sinusoidal",
                start=(41, 41),
                amplitude=(13, 13),
                period=50,
                phase=1.319,
            ),
            distractors=(
                DistractorSpec(
                    shape="disk",
                    size=5,
                    motion=MotionPath(
                        kind="linear", start=(7, 50), velocity=(0.2, -1.2)
                    ),
                ),
            ),
            severities=_endpoint_severities(n, peak=0.9, mid=0.75, low=0.55),
            seed=seed * 100 + 2,
        ),
        SceneSpec(
            name="fig1_endpoints_c",
            shape="rectangle",
            size=8,
            motion=MotionPath(
                kind="sinusoidal",
                start=(41, 30),
                amplitude=(13, 6),
                period=50,
                phase=1.319,
            ),
            severities=_endpoint_severities(n, peak=0.95, mid=0.7, low=0.55),
            seed=seed * 100 + 3,
        ),
        SceneSpec(
            name="drift_clean_start",
            shape="disk",
            size=9,
            motion=MotionPath(kind="linear", start=(10, 10), velocity=(1.1, 1.2)),
            severities=_window_severities(n, base=0.75, window=(2, 8), low=0.55),
            seed=seed * 100 + 4,
        ),
        SceneSpec(
            name="drift_clean_end",
            shape="disk",
            size=9,
            motion=MotionPath(kind="linear", start=(20, 18), velocity=(1.15, 1.2)),
            severities=_window_severities(n, base=0.75, window=(23, 29), low=0.55),
            seed=seed * 100 + 5,
        ),
        SceneSpec(
            name="distractor_cross",
            shape="disk",
            size=8,
            motion=MotionPath(
                kind="sinusoidal", start=(32, 32), amplitude=(0, 22), period=24
            ),
            distractors=(
                DistractorSpec(
                    shape="disk",
                    size=6,
                    motion=MotionPath(
                        kind="sinusoidal",
                        start=(14, 32),
                        amplitude=(6, -22),
                        period=24,
                    ),
                ),
            ),
            severities=_window_severities(n, base=0.7, window=(12, 18), low=0.55),
            seed=seed * 100 + 6,
        ),
        SceneSpec(
            name="exit_small",
            shape="disk",
            size=8,
            motion=MotionPath(
                kind="sinusoidal", start=(32, 20), amplitude=(0, -27), period=60,
            ),
            severities=_window_severities(n, base=0.7, window=(1, 6), low=0.55),
            seed=seed * 100 + 7,
            allow_exit=True,
        ),
        SceneSpec(
            name="uniform_base",
            shape="polygon",
            size=10,
            motion=MotionPath(
                kind="sinusoidal", start=(32, 32), amplitude=(20, 20), period=22
            ),
            severities=tuple([0.55] * n),
            seed=seed * 100 + 8,
        ),
        SceneSpec(
            name="blob_purge_sweep",
            shape="disk",
            size=10,
            motion=MotionPath(
                kind="sinusoidal",
                start=(32, 32),
                amplitude=(20, 20),
                period=20,
                phase_x=math.pi / 2,
            ),
            severities=tuple([0.95] * n),
            seed=seed * 100 + 9,
        ),
        SceneSpec(
            name="smallobj_walk",
            shape="disk",
            size=6,
            motion=MotionPath(kind="random-walk", start=(8, 8), step=3),
            severities=tuple([0.65] * n),
            seed=seed * 100 + 10,
        ),
    ]
    return [generate(spec) for spec in specs]
