"""The iterative mask prediction loop.

Each iteration selects easy reference frames, propagates their cues to both
sequence ends (BMP), and, except on the last iteration, re-propagates from
the ends back toward the easy frames to fold temporal information into the
cues (TIU).  The last iteration fuses the per-reference propagations into
the final binary masks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Protocol

import numpy as np

from . import efs
from .core import (
    CueSet,
    IterationTrace,
    PipelineConfig,
    PipelineError,
    VideoSequence,
    aggregate_mean,
    binarize,
)
from .efs import QualityEstimator
from .metrics import region_j


class Propagator(Protocol):
    """Semi-supervised mask propagation primitive.

    ``propagate_chain`` walks from ``start`` to ``stop`` (inclusive) and
    returns a mask per visited frame in visit order, excluding the start
    frame itself, so the result has |stop - start| entries.  Within a chain
    each step consumes the previous step's mask; implementations must be
    deterministic for fixed inputs.
    """

    shareable: bool

    def propagate_chain(
        self,
        video: VideoSequence,
        start: int,
        reference_mask: np.ndarray,
        direction: str,
        stop: int,
    ) -> List[np.ndarray]: ...


@dataclass
class ImpResult:
    final_masks: List[np.ndarray]
    traces: List[IterationTrace]
    final_soft: List[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if self.traces and len(self.final_masks) == 0:
            raise ValueError("final_masks must cover every frame")


class _Detector(Protocol):
    shareable: bool

    def detect(self, frame) -> np.ndarray: ...


def initial_cues(video: VideoSequence, detector: _Detector) -> CueSet:
    """Frame-by-frame detection; no temporal information."""
    cues = []
    for frame in video.frames:
        try:
            cues.append(np.asarray(detector.detect(frame), dtype=np.float64))
        except Exception as exc:
            raise PipelineError(
                f"detector failed on frame {frame.index} of {video.name!r}: {exc}"
            ) from exc
    return cues


def bmp(
    video: VideoSequence,
    cues: CueSet,
    easy: int,
    propagator: Propagator,
    binarize_threshold: float = 0.5,
) -> List[np.ndarray]:
    """Bi-directional mask prediction from one easy frame.

    The easy frame keeps its own cue; every other frame receives a mask
    propagated from the binarized easy cue, forward and backward chains
    running independently.
    """
    n = len(video)
    if not 0 <= easy < n:
        raise ValueError(f"easy frame {easy} outside [0, {n})")
    reference = binarize(cues[easy], binarize_threshold).astype(np.float64)
    out: List[Optional[np.ndarray]] = [None] * n
    out[easy] = np.asarray(cues[easy], dtype=np.float64)
    try:
        if easy < n - 1:
            for offset, mask in enumerate(
                propagator.propagate_chain(video, easy, reference, "forward", n - 1)
            ):
                out[easy + 1 + offset] = mask
        if easy > 0:
            for offset, mask in enumerate(
                propagator.propagate_chain(video, easy, reference, "backward", 0)
            ):
                out[easy - 1 - offset] = mask
    except PipelineError:
        raise
    except Exception as exc:
        raise PipelineError(
            f"propagation from easy frame {easy} of {video.name!r} failed: {exc}"
        ) from exc
    return [m for m in out]  # type: ignore[misc]


def tiu(
    video: VideoSequence,
    bmp_masks: List[List[np.ndarray]],
    easy_frames: List[int],
    propagator: Propagator,
    binarize_threshold: float = 0.5,
) -> CueSet:
    """Temporal information updating.

    For each easy frame, the masks its BMP pass produced at the sequence
    ends seed fresh chains back toward it: the forward chain from frame 0
    covers [0, easy], the backward chain from the last frame covers
    [easy, N-1], and the easy frame itself takes the mean of the incoming
    predictions.  The per-easy-frame cue sets merge by pixel-wise mean into
    the new working cues.
    """
    n = len(video)
    if len(bmp_masks) != len(easy_frames):
        raise ValueError("need one BMP mask list per easy frame")
    if n == 1:
        return [bmp_masks[0][0].copy()]

    per_easy: List[CueSet] = []
    for e, masks in zip(easy_frames, bmp_masks):
        updated: List[Optional[np.ndarray]] = [None] * n
        incoming_at_e: List[np.ndarray] = []

        if e > 0:
            seed = binarize(masks[0], binarize_threshold).astype(np.float64)
            forward = propagator.propagate_chain(video, 0, seed, "forward", e)
            updated[0] = np.asarray(masks[0], dtype=np.float64)
            for offset, mask in enumerate(forward[:-1]):
                updated[1 + offset] = mask
            incoming_at_e.append(forward[-1])

        if e < n - 1:
            seed = binarize(masks[n - 1], binarize_threshold).astype(np.float64)
            backward = propagator.propagate_chain(video, n - 1, seed, "backward", e)
            updated[n - 1] = np.asarray(masks[n - 1], dtype=np.float64)
            for offset, mask in enumerate(backward[:-1]):
                updated[n - 2 - offset] = mask
            incoming_at_e.append(backward[-1])

        updated[e] = aggregate_mean(incoming_at_e)
        per_easy.append([m for m in updated])  # type: ignore[misc]

    return [
        aggregate_mean([cue_set[i] for cue_set in per_easy]) for i in range(n)
    ]


def _select(
    video: VideoSequence,
    cues: CueSet,
    estimator: QualityEstimator,
    cfg: PipelineConfig,
) -> tuple[List[int], List]:
    scores = efs.score_frames(video, cues, estimator, cfg)
    if cfg.reference_policy == "first-frame":
        return [0], scores
    if cfg.reference_policy == "all-frames":
        return list(range(len(video))), scores
    return efs.select_top_k(scores, cfg.k).selected, scores


def run(
    video: VideoSequence,
    detector: _Detector,
    propagator: Propagator,
    estimator: QualityEstimator,
    cfg: PipelineConfig,
) -> ImpResult:
    """Full pipeline: detect, then iterate select/propagate/update, ending
    with a propagation-only pass fused into the final masks."""
    cues = initial_cues(video, detector)
    traces: List[IterationTrace] = []
    final_masks: List[np.ndarray] = []
    final_soft: List[np.ndarray] = []

    for iteration in range(cfg.iterations):
        selected, scores = _select(video, cues, estimator, cfg)
        frame_metrics = None
        if video.gt is not None:
            frame_metrics = [
                region_j(binarize(cue, cfg.binarize_threshold), g)
                if g is not None
                else float("nan")
                for cue, g in zip(cues, video.gt)
            ]
        traces.append(
            IterationTrace(
                iteration=iteration,
                selected=list(selected),
                scores=scores,
                cues=[c.copy() for c in cues],
                frame_metrics=frame_metrics,
            )
        )

        bmp_masks = [
            bmp(video, cues, e, propagator, cfg.binarize_threshold) for e in selected
        ]
        if iteration == cfg.iterations - 1:
            final_soft = [
                aggregate_mean([masks[i] for masks in bmp_masks])
                for i in range(len(video))
            ]
            final_masks = [
                binarize(m, cfg.binarize_threshold) for m in final_soft
            ]
        elif cfg.tiu_enabled:
            cues = tiu(video, bmp_masks, selected, propagator, cfg.binarize_threshold)
        else:
            # ablation arm: BMP outputs become the new cues directly
            cues = [
                aggregate_mean([masks[i] for masks in bmp_masks])
                for i in range(len(video))
            ]

    return ImpResult(final_masks=final_masks, traces=traces, final_soft=final_soft)
