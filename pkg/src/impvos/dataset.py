"""Dataset ingestion and persistence.

The on-disk layout follows the DAVIS convention and is the interchange
format for everything here:

    <root>/JPEGImages/<sequence>/NNNNN.png|jpg    frames, numeric names
    <root>/Annotations/<sequence>/NNNNN.png       optional masks, 0=bg
    <root>/Schedules/<sequence>.json              optional severity schedule

Annotations may cover a subset of frames (sparse, FBMS-style); missing
files simply leave those frames unannotated.  Synthetic suites persist
frames as PNG so ingestion round-trips exactly.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
from PIL import Image

from .backends.builtin import CorruptionSchedule
from .core import Frame, VideoSequence

FRAME_DIR = "JPEGImages"
ANNOTATION_DIR = "Annotations"
SCHEDULE_DIR = "Schedules"


class DatasetError(Exception):
    """Missing, unreadable, or inconsistent dataset contents."""


def _numeric_stem(path: Path) -> int:
    try:
        return int(path.stem)
    except ValueError:
        raise DatasetError(f"frame file {path} is not numerically named") from None


def _read_rgb(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as img:
            return np.asarray(img.convert("RGB"), dtype=np.uint8)
    except (OSError, ValueError) as exc:
        raise DatasetError(f"unreadable image {path}: {exc}") from exc


def _read_mask(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as img:
            arr = np.asarray(img.convert("L"))
    except (OSError, ValueError) as exc:
        raise DatasetError(f"unreadable mask {path}: {exc}") from exc
    return arr > 0


def read_probability_mask(path: Path) -> np.ndarray:
    """Grayscale PNG as probabilities: byte value / 255."""
    try:
        with Image.open(path) as img:
            arr = np.asarray(img.convert("L"), dtype=np.float64)
    except (OSError, ValueError) as exc:
        raise DatasetError(f"unreadable mask {path}: {exc}") from exc
    return arr / 255.0


def ingest(dataset_root: Path) -> List[VideoSequence]:
    """Load every sequence under the root, sorted by name."""
    root = Path(dataset_root)
    frames_root = root / FRAME_DIR
    if not frames_root.is_dir():
        raise DatasetError(f"no {FRAME_DIR} directory under {root}")
    sequences = []
    for seq_dir in sorted(p for p in frames_root.iterdir() if p.is_dir()):
        sequences.append(_ingest_sequence(root, seq_dir))
    if not sequences:
        raise DatasetError(f"no sequences under {frames_root}")
    return sequences


def _ingest_sequence(root: Path, seq_dir: Path) -> VideoSequence:
    frame_paths = sorted(
        (p for p in seq_dir.iterdir() if p.suffix.lower() in (".png", ".jpg", ".jpeg")),
        key=_numeric_stem,
    )
    if not frame_paths:
        raise DatasetError(f"sequence directory {seq_dir} holds no frames")
    frames = [Frame(index=i, pixels=_read_rgb(p)) for i, p in enumerate(frame_paths)]

    ann_dir = root / ANNOTATION_DIR / seq_dir.name
    gt: Optional[List[Optional[np.ndarray]]] = None
    if ann_dir.is_dir():
        gt = []
        for p in frame_paths:
            mask_path = ann_dir / f"{p.stem}.png"
            gt.append(_read_mask(mask_path) if mask_path.exists() else None)
        if not any(g is not None for g in gt):
            gt = None
    try:
        return VideoSequence(name=seq_dir.name, frames=frames, gt=gt)
    except ValueError as exc:
        raise DatasetError(str(exc)) from exc


def load_schedules(dataset_root: Path) -> Dict[str, CorruptionSchedule]:
    """Severity schedules for the noisy oracle, when the dataset ships them."""
    schedule_dir = Path(dataset_root) / SCHEDULE_DIR
    schedules = {}
    if not schedule_dir.is_dir():
        return schedules
    for path in sorted(schedule_dir.glob("*.json")):
        data = json.loads(path.read_text())
        schedules[path.stem] = CorruptionSchedule(
            severities=[float(c) for c in data["severities"]],
            seed=int(data["seed"]),
        )
    return schedules


def write_mask_png(path: Path, mask: np.ndarray) -> None:
    """Binary mask as an 8-bit PNG, foreground 255."""
    path.parent.mkdir(parents=True, exist_ok=True)
    data = (np.asarray(mask, dtype=bool) * np.uint8(255))
    Image.fromarray(data, mode="L").save(path, format="PNG")


def write_probability_png(path: Path, mask: np.ndarray) -> None:
    """Probability mask quantized to 8-bit grayscale."""
    path.parent.mkdir(parents=True, exist_ok=True)
    data = np.round(np.asarray(mask, dtype=np.float64) * 255.0).astype(np.uint8)
    Image.fromarray(data, mode="L").save(path, format="PNG")


def save_sequence(
    dataset_root: Path,
    video: VideoSequence,
    schedule: Optional[CorruptionSchedule] = None,
) -> None:
    root = Path(dataset_root)
    frame_dir = root / FRAME_DIR / video.name
    frame_dir.mkdir(parents=True, exist_ok=True)
    for frame in video.frames:
        Image.fromarray(frame.pixels, mode="RGB").save(
            frame_dir / f"{frame.index:05d}.png", format="PNG"
        )
    if video.gt is not None:
        for i, mask in enumerate(video.gt):
            if mask is not None:
                write_mask_png(
                    root / ANNOTATION_DIR / video.name / f"{i:05d}.png", mask
                )
    if schedule is not None:
        schedule_dir = root / SCHEDULE_DIR
        schedule_dir.mkdir(parents=True, exist_ok=True)
        (schedule_dir / f"{video.name}.json").write_text(
            json.dumps(
                {"seed": schedule.seed, "severities": list(schedule.severities)},
                indent=2,
            )
            + "\n"
        )


def save_suite(dataset_root: Path, suite) -> None:
    for video, schedule in suite:
        save_sequence(dataset_root, video, schedule)
