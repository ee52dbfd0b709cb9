"""Easy Frame Selector: score every (frame, cue) pair and pick the top-k
reference frames.

A frame's score is the product of an estimated mask quality in [0, 1] and a
size-filter bit that rejects near-empty and frame-filling masks, so hard
frames score exactly zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Protocol

import numpy as np

from .core import (
    CueSet,
    Frame,
    FrameScore,
    PipelineConfig,
    PipelineError,
    VideoSequence,
    area_fraction,
    binarize,
)


class QualityEstimator(Protocol):
    """Estimates how well a cue segments its frame, in [0, 1].

    Implementations must be deterministic for fixed inputs.  ``shareable``
    tells the scheduler whether one instance may serve concurrent workers.
    """

    shareable: bool

    def estimate(self, frame: Frame, cue: np.ndarray) -> float: ...


@dataclass(frozen=True)
class SelectionResult:
    scores: List[FrameScore]
    selected: List[int]

    def __post_init__(self):
        if len(set(self.selected)) != len(self.selected):
            raise ValueError("selected indices must be distinct")


def size_filter(
    cue: np.ndarray,
    th_small: float,
    th_large: float,
    binarize_threshold: float = 0.5,
) -> int:
    """1 iff the binarized cue's area fraction lies strictly inside
    (th_small, th_large)."""
    if not (0.0 <= th_small < th_large <= 1.0):
        raise ValueError(
            f"need 0 <= th_small < th_large <= 1, got ({th_small}, {th_large})"
        )
    area = area_fraction(binarize(cue, binarize_threshold))
    return int(th_small < area < th_large)


def score_frames(
    video: VideoSequence,
    cues: CueSet,
    estimator: QualityEstimator,
    cfg: PipelineConfig,
) -> List[FrameScore]:
    """Per-frame scores: s_hat from the estimator, size bit, their product."""
    if len(cues) != len(video):
        raise ValueError(f"{len(cues)} cues for {len(video)} frames")
    scores = []
    for frame, cue in zip(video.frames, cues):
        try:
            s_hat = float(estimator.estimate(frame, cue))
        except Exception as exc:
            raise PipelineError(
                f"quality estimator failed on frame {frame.index} "
                f"of {video.name!r}: {exc}"
            ) from exc
        s_hat = min(max(s_hat, 0.0), 1.0)
        size_ok = size_filter(cue, cfg.th_small, cfg.th_large, cfg.binarize_threshold)
        scores.append(
            FrameScore(
                frame_index=frame.index,
                s_hat=s_hat,
                size_ok=size_ok,
                score=s_hat * size_ok,
            )
        )
    return scores


def select_top_k(scores: List[FrameScore], k: int) -> SelectionResult:
    """Pick the k highest-scoring frames, ties broken by lower index.

    Frames that passed the size filter always outrank filtered ones, so a
    hard frame is never selected while an in-band frame remains; when every
    frame is filtered the ranking degenerates to s_hat alone.  k is clipped
    to the number of frames.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not scores:
        raise ValueError("cannot select from an empty score list")
    k = min(k, len(scores))
    ranked = sorted(
        scores, key=lambda s: (-s.score, -s.size_ok, -s.s_hat, s.frame_index)
    )
    return SelectionResult(scores=list(scores), selected=[s.frame_index for s in ranked[:k]])
