"""imp-vos: easy-frame selection and iterative mask propagation for
unsupervised video object segmentation, with pluggable backends and a
synthetic oracle suite."""

from .core import (
    CueSet,
    Frame,
    FrameScore,
    IterationTrace,
    PipelineConfig,
    PipelineError,
    VideoSequence,
    aggregate_mean,
    area_fraction,
    binarize,
    boundary_pixels,
)

__all__ = [
    "CueSet",
    "Frame",
    "FrameScore",
    "IterationTrace",
    "PipelineConfig",
    "PipelineError",
    "VideoSequence",
    "aggregate_mean",
    "area_fraction",
    "binarize",
    "boundary_pixels",
]

__version__ = "0.1.0"
