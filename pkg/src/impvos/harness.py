"""Run orchestration: config parsing, backend wiring, per-sequence
evaluation, report emission, ablation sweeps, and the reference-policy
comparison.

Reports are CSV plus a plain-text summary.  Every float is written with
repr() so parsing the CSV back recovers the exact double and aggregate
rows recompute exactly from the per-frame rows.  Wall-clock numbers go to
a separate timings file so that everything else is byte-reproducible.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import dataset as ds
from . import imp
from .backends import (
    ClassicalPropagator,
    CorruptionSchedule,
    HeuristicEstimator,
    IdentityPropagator,
    MaeOracleEstimator,
    NoisyOracleDetector,
    OracleDetector,
    OracleEstimator,
)
from .backends.external import (
    ExternalDetector,
    ExternalEstimator,
    ExternalPropagator,
    ExternalWorker,
)
from .core import PipelineConfig, VideoSequence
from .metrics import (
    SequenceStats,
    boundary_f,
    f_max,
    mae,
    region_j,
    s_measure,
    sequence_stats,
)

WORKERS_ENV = "IMP_VOS_WORKERS"

CONFIG_KEYS = {
    "k",
    "iterations",
    "th_small",
    "th_large",
    "binarize_threshold",
    "detector",
    "propagator",
    "estimator",
    "seed",
    "tiu_enabled",
    "reference_policy",
}


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    pipeline: PipelineConfig = PipelineConfig()
    detector: str = "noisy"
    propagator: str = "classical"
    estimator: str = "oracle-s"


def parse_config(path: Optional[Path]) -> RunConfig:
    """Flat key-value text file: one `key = value` per line, # comments."""
    if path is None:
        return RunConfig()
    values: Dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = value
    return build_config(values)


def build_config(values: Dict[str, str]) -> RunConfig:
    def as_bool(text: str) -> bool:
        if text.lower() in ("true", "1", "yes", "on"):
            return True
        if text.lower() in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"not a boolean: {text!r}")

    try:
        pipeline = PipelineConfig(
            k=int(values.get("k", 2)),
            iterations=int(values.get("iterations", 4)),
            th_small=float(values.get("th_small", 0.005)),
            th_large=float(values.get("th_large", 0.60)),
            binarize_threshold=float(values.get("binarize_threshold", 0.5)),
            rng_seed=int(values.get("seed", 0)),
            tiu_enabled=as_bool(values.get("tiu_enabled", "true")),
            reference_policy=values.get("reference_policy", "efs"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return RunConfig(
        pipeline=pipeline,
        detector=values.get("detector", "noisy"),
        propagator=values.get("propagator", "classical"),
        estimator=values.get("estimator", "oracle-s"),
    )


def _make_backends(
    cfg: RunConfig,
    video: VideoSequence,
    schedule: Optional[CorruptionSchedule],
):
    workers: List[ExternalWorker] = []

    def external(command: str) -> ExternalWorker:
        worker = ExternalWorker(command)
        worker.start()
        workers.append(worker)
        return worker

    if cfg.detector == "oracle":
        _require_gt(video, "oracle detector")
        detector = OracleDetector(gt=video.gt)
    elif cfg.detector == "noisy":
        _require_gt(video, "noisy oracle detector")
        if schedule is None:
            schedule = CorruptionSchedule(
                severities=[0.0] * len(video), seed=cfg.pipeline.rng_seed
            )
        detector = NoisyOracleDetector(gt=video.gt, schedule=schedule)
    elif cfg.detector.startswith("external:"):
        detector = ExternalDetector(external(cfg.detector.split(":", 1)[1]))
    else:
        raise ConfigError(f"unknown detector {cfg.detector!r}")

    if cfg.propagator == "classical":
        propagator = ClassicalPropagator()
    elif cfg.propagator == "identity":
        propagator = IdentityPropagator()
    elif cfg.propagator.startswith("external:"):
        propagator = ExternalPropagator(external(cfg.propagator.split(":", 1)[1]))
    else:
        raise ConfigError(f"unknown propagator {cfg.propagator!r}")

    if cfg.estimator == "oracle-s":
        _require_gt(video, "oracle estimator")
        estimator = OracleEstimator(gt=video.gt)
    elif cfg.estimator == "oracle-mae":
        _require_gt(video, "MAE oracle estimator")
        estimator = MaeOracleEstimator(gt=video.gt)
    elif cfg.estimator == "heuristic":
        estimator = HeuristicEstimator(
            binarize_threshold=cfg.pipeline.binarize_threshold
        )
    elif cfg.estimator.startswith("external:"):
        estimator = ExternalEstimator(external(cfg.estimator.split(":", 1)[1]))
    else:
        raise ConfigError(f"unknown estimator {cfg.estimator!r}")

    return detector, propagator, estimator, workers


def _require_gt(video: VideoSequence, what: str) -> None:
    if video.gt is None:
        raise ConfigError(f"{what} needs ground truth, none for {video.name!r}")


@dataclass
class SequenceReport:
    name: str
    frame_j: List[float]
    frame_f: List[float]
    frame_mae: List[float]
    frame_fmax: List[float]
    frame_s: List[float]
    j_stats: Optional[SequenceStats]
    f_stats: Optional[SequenceStats]
    mae_mean: float
    fmax_mean: float
    s_mean: float
    traces: list = field(default_factory=list)


@dataclass
class RunReport:
    sequences: List[SequenceReport]
    aggregate: Dict[str, float]
    config_echo: Dict[str, str]
    timings: Dict[str, float]


def evaluate_sequence(
    name: str,
    final_masks: List[np.ndarray],
    final_soft: List[np.ndarray],
    gt: Sequence[Optional[np.ndarray]],
    traces=(),
) -> SequenceReport:
    """Per-frame metrics over annotated frames; NaN marks skipped frames."""
    frame_j, frame_f = [], []
    frame_mae, frame_fmax, frame_s = [], [], []
    for mask, soft, g in zip(final_masks, final_soft, gt):
        if g is None:
            frame_j.append(math.nan)
            frame_f.append(math.nan)
            frame_mae.append(math.nan)
            frame_fmax.append(math.nan)
            frame_s.append(math.nan)
            continue
        frame_j.append(region_j(mask, g))
        frame_f.append(boundary_f(mask, g))
        frame_mae.append(mae(soft, g))
        try:
            frame_fmax.append(f_max(soft, g))
        except ValueError:  # all-background gt: undefined recall, skip
            frame_fmax.append(math.nan)
        frame_s.append(s_measure(soft, g))

    def present(values):
        return [v for v in values if not math.isnan(v)]

    js, fs = present(frame_j), present(frame_f)
    return SequenceReport(
        name=name,
        frame_j=frame_j,
        frame_f=frame_f,
        frame_mae=frame_mae,
        frame_fmax=frame_fmax,
        frame_s=frame_s,
        j_stats=sequence_stats(js) if js else None,
        f_stats=sequence_stats(fs) if fs else None,
        mae_mean=_mean_or_nan(present(frame_mae)),
        fmax_mean=_mean_or_nan(present(frame_fmax)),
        s_mean=_mean_or_nan(present(frame_s)),
        traces=list(traces),
    )


def _mean_or_nan(values: List[float]) -> float:
    return sum(values) / len(values) if values else math.nan


def aggregate_reports(reports: List[SequenceReport]) -> Dict[str, float]:
    """Dataset aggregate: plain mean over sequences, DAVIS convention."""
    def mean_over(getter):
        values = [getter(r) for r in reports]
        values = [v for v in values if v is not None and not math.isnan(v)]
        return sum(values) / len(values) if values else math.nan

    return {
        "j_mean": mean_over(lambda r: r.j_stats.mean if r.j_stats else math.nan),
        "j_recall": mean_over(lambda r: r.j_stats.recall if r.j_stats else math.nan),
        "j_decay": mean_over(lambda r: r.j_stats.decay if r.j_stats else math.nan),
        "f_mean": mean_over(lambda r: r.f_stats.mean if r.f_stats else math.nan),
        "f_recall": mean_over(lambda r: r.f_stats.recall if r.f_stats else math.nan),
        "f_decay": mean_over(lambda r: r.f_stats.decay if r.f_stats else math.nan),
        "mae": mean_over(lambda r: r.mae_mean),
        "f_max": mean_over(lambda r: r.fmax_mean),
        "s_measure": mean_over(lambda r: r.s_mean),
    }


def _run_one_sequence(args) -> Tuple[str, List[np.ndarray], List[np.ndarray], list]:
    video, schedule, cfg = args
    detector, propagator, estimator, workers = _make_backends(cfg, video, schedule)
    try:
        result = imp.run(video, detector, propagator, estimator, cfg.pipeline)
    finally:
        for worker in workers:
            worker.shutdown()
    return video.name, result.final_masks, result.final_soft, result.traces


def run_pipeline(
    config_path: Optional[Path],
    dataset_root: Path,
    out_dir: Path,
    jobs: int = 1,
    config: Optional[RunConfig] = None,
) -> RunReport:
    """Full run over a dataset: pipeline per sequence, masks, traces,
    per-frame metrics, report, and timings written under out_dir."""
    cfg = config if config is not None else parse_config(config_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    timings: Dict[str, float] = {}
    t0 = time.perf_counter()
    videos = ds.ingest(dataset_root)
    schedules = ds.load_schedules(dataset_root)
    timings["ingest"] = time.perf_counter() - t0

    jobs = _effective_jobs(jobs)
    tasks = [(video, schedules.get(video.name), cfg) for video in videos]
    t0 = time.perf_counter()
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outputs = list(pool.map(_run_one_sequence, tasks))
    else:
        outputs = [_run_one_sequence(task) for task in tasks]
    timings["pipeline"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    reports = []
    by_name = {video.name: video for video in videos}
    for name, final_masks, final_soft, traces in outputs:
        video = by_name[name]
        gt = video.gt if video.gt is not None else [None] * len(video)
        reports.append(
            evaluate_sequence(name, final_masks, final_soft, gt, traces)
        )
    timings["evaluate"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    for name, final_masks, final_soft, _ in outputs:
        for i, mask in enumerate(final_masks):
            ds.write_mask_png(out / "masks" / name / f"{i:05d}.png", mask)
        for i, soft in enumerate(final_soft):
            ds.write_probability_png(out / "soft" / name / f"{i:05d}.png", soft)
    report = RunReport(
        sequences=reports,
        aggregate=aggregate_reports(reports),
        config_echo=_config_echo(cfg),
        timings=timings,
    )
    write_report(out, report)
    timings["write"] = time.perf_counter() - t0
    _write_timings(out, timings)
    return report


def _effective_jobs(jobs: int) -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return max(1, jobs)


def _config_echo(cfg: RunConfig) -> Dict[str, str]:
    p = cfg.pipeline
    return {
        "k": str(p.k),
        "iterations": str(p.iterations),
        "th_small": repr(p.th_small),
        "th_large": repr(p.th_large),
        "binarize_threshold": repr(p.binarize_threshold),
        "seed": str(p.rng_seed),
        "tiu_enabled": str(p.tiu_enabled).lower(),
        "reference_policy": p.reference_policy,
        "detector": cfg.detector,
        "propagator": cfg.propagator,
        "estimator": cfg.estimator,
    }


def _fmt(value: Optional[float]) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    return repr(float(value))


REPORT_COLUMNS = [
    "sequence",
    "j_mean",
    "j_recall",
    "j_decay",
    "f_mean",
    "f_recall",
    "f_decay",
    "mae",
    "f_max",
    "s_measure",
]


def write_report(out: Path, report: RunReport) -> None:
    out.mkdir(parents=True, exist_ok=True)

    lines = [",".join(REPORT_COLUMNS)]
    for r in report.sequences:
        row = [
            r.name,
            _fmt(r.j_stats.mean if r.j_stats else None),
            _fmt(r.j_stats.recall if r.j_stats else None),
            _fmt(r.j_stats.decay if r.j_stats else None),
            _fmt(r.f_stats.mean if r.f_stats else None),
            _fmt(r.f_stats.recall if r.f_stats else None),
            _fmt(r.f_stats.decay if r.f_stats else None),
            _fmt(r.mae_mean),
            _fmt(r.fmax_mean),
            _fmt(r.s_mean),
        ]
        lines.append(",".join(row))
    agg = report.aggregate
    lines.append(
        ",".join(
            ["aggregate"] + [_fmt(agg[c]) for c in REPORT_COLUMNS[1:]]
        )
    )
    (out / "report.csv").write_text("\n".join(lines) + "\n")

    per_frame = ["sequence,frame,j,f,mae,f_max,s_measure"]
    for r in report.sequences:
        for i in range(len(r.frame_j)):
            per_frame.append(
                ",".join(
                    [
                        r.name,
                        str(i),
                        _fmt(r.frame_j[i]),
                        _fmt(r.frame_f[i]),
                        _fmt(r.frame_mae[i]),
                        _fmt(r.frame_fmax[i]),
                        _fmt(r.frame_s[i]),
                    ]
                )
            )
    (out / "per_frame.csv").write_text("\n".join(per_frame) + "\n")

    for r in report.sequences:
        if not r.traces:
            continue
        rows = ["iteration,selected,frame,s_hat,size_ok,score,cue_j"]
        for trace in r.traces:
            selected = ";".join(str(i) for i in trace.selected)
            for score in trace.scores:
                cue_j = ""
                if trace.frame_metrics is not None:
                    cue_j = _fmt(trace.frame_metrics[score.frame_index])
                rows.append(
                    f"{trace.iteration},{selected},{score.frame_index},"
                    f"{_fmt(score.s_hat)},{score.size_ok},{_fmt(score.score)},{cue_j}"
                )
        trace_dir = out / "traces"
        trace_dir.mkdir(parents=True, exist_ok=True)
        (trace_dir / f"{r.name}.csv").write_text("\n".join(rows) + "\n")

    summary = ["run summary", "==========="]
    for key, value in report.config_echo.items():
        summary.append(f"config {key} = {value}")
    summary.append("")
    summary.append(
        "aggregate: "
        + " ".join(f"{k}={_fmt(v) or 'n/a'}" for k, v in report.aggregate.items())
    )
    for r in report.sequences:
        summary.append(
            f"{r.name}: J={_fmt(r.j_stats.mean if r.j_stats else None) or 'n/a'} "
            f"F={_fmt(r.f_stats.mean if r.f_stats else None) or 'n/a'} "
            f"MAE={_fmt(r.mae_mean) or 'n/a'}"
        )
    (out / "summary.txt").write_text("\n".join(summary) + "\n")


def _write_timings(out: Path, timings: Dict[str, float]) -> None:
    lines = ["stage,seconds"]
    for stage, seconds in timings.items():
        lines.append(f"{stage},{seconds:.6f}")
    (out / "timings.csv").write_text("\n".join(lines) + "\n")


ABLATION_AXES = ("easy-frames", "iterations", "metric", "tiu", "propagator")


def ablate(
    which: str,
    dataset_root: Path,
    out_dir: Path,
    config: Optional[RunConfig] = None,
    jobs: int = 1,
) -> List[Dict[str, str]]:
    """Sweep one axis and emit a CSV with one row per setting (the TIU axis
    pairs enabled/disabled columns per iteration count)."""
    if which not in ABLATION_AXES:
        raise ConfigError(
            f"unknown ablation axis {which!r}, pick one of {ABLATION_AXES}"
        )
    base = config if config is not None else RunConfig()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def run_with(cfg: RunConfig, tag: str) -> Dict[str, float]:
        report = run_pipeline(
            None, dataset_root, out / "runs" / tag, jobs=jobs, config=cfg
        )
        return report.aggregate

    rows: List[Dict[str, str]] = []
    if which == "easy-frames":
        for k in (1, 2, 3, 4):
            cfg = replace(base, pipeline=replace(base.pipeline, k=k))
            agg = run_with(cfg, f"k{k}")
            rows.append(_ablation_row({"k": str(k)}, agg))
    elif which == "iterations":
        for iterations in range(1, 7):
            cfg = replace(base, pipeline=replace(base.pipeline, iterations=iterations))
            agg = run_with(cfg, f"it{iterations}")
            rows.append(_ablation_row({"iterations": str(iterations)}, agg))
    elif which == "metric":
        for estimator in ("oracle-s", "oracle-mae"):
            cfg = replace(base, estimator=estimator)
            agg = run_with(cfg, estimator)
            rows.append(_ablation_row({"estimator": estimator}, agg))
    elif which == "propagator":
        for propagator in ("classical", "identity"):
            cfg = replace(base, propagator=propagator)
            agg = run_with(cfg, propagator)
            rows.append(_ablation_row({"propagator": propagator}, agg))
    else:  # tiu: paired columns per iteration count
        for iterations in (1, 2, 3, 4):
            on = replace(
                base,
                pipeline=replace(base.pipeline, iterations=iterations, tiu_enabled=True),
            )
            off = replace(
                base,
                pipeline=replace(base.pipeline, iterations=iterations, tiu_enabled=False),
            )
            agg_on = run_with(on, f"it{iterations}_tiu")
            agg_off = run_with(off, f"it{iterations}_notiu")
            rows.append(
                {
                    "iterations": str(iterations),
                    "jf_with_tiu": _fmt(_jf(agg_on)),
                    "jf_without_tiu": _fmt(_jf(agg_off)),
                }
            )

    header = list(rows[0].keys())
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(row[h] for h in header))
    (out / f"ablation_{which.replace('-', '_')}.csv").write_text(
        "\n".join(lines) + "\n"
    )
    return rows


def _jf(agg: Dict[str, float]) -> float:
    return 0.5 * (agg["j_mean"] + agg["f_mean"])


def _ablation_row(setting: Dict[str, str], agg: Dict[str, float]) -> Dict[str, str]:
    row = dict(setting)
    row["j_mean"] = _fmt(agg["j_mean"])
    row["f_mean"] = _fmt(agg["f_mean"])
    row["jf"] = _fmt(_jf(agg))
    return row


REFERENCE_POLICIES = ("first-frame", "all-frames", "efs")


def compare_reference(
    dataset_root: Path,
    out_dir: Path,
    config: Optional[RunConfig] = None,
    jobs: int = 1,
) -> Dict[str, Dict[str, List[float]]]:
    """Replay every sequence under the three reference policies with a
    single propagation round (k=1 for single-reference policies) and emit
    per-frame J&F curves plus suite means."""
    base = config if config is not None else RunConfig()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    curves: Dict[str, Dict[str, List[float]]] = {p: {} for p in REFERENCE_POLICIES}
    for policy in REFERENCE_POLICIES:
        cfg = replace(
            base,
            pipeline=replace(
                base.pipeline, iterations=1, k=1, reference_policy=policy
            ),
        )
        report = run_pipeline(
            None, dataset_root, out / "runs" / policy, jobs=jobs, config=cfg
        )
        for r in report.sequences:
            jf = [
                0.5 * (j + f) if not (math.isnan(j) or math.isnan(f)) else math.nan
                for j, f in zip(r.frame_j, r.frame_f)
            ]
            curves[policy][r.name] = jf

    names = sorted(curves[REFERENCE_POLICIES[0]])
    for name in names:
        n = len(curves[REFERENCE_POLICIES[0]][name])
        lines = ["policy," + ",".join(f"frame_{i}" for i in range(n)) + ",mean"]
        for policy in REFERENCE_POLICIES:
            jf = curves[policy][name]
            valid = [v for v in jf if not math.isnan(v)]
            mean = sum(valid) / len(valid) if valid else math.nan
            lines.append(
                ",".join([policy] + [_fmt(v) for v in jf] + [_fmt(mean)])
            )
        (out / f"compare_{name}.csv").write_text("\n".join(lines) + "\n")

    summary = ["policy,suite_mean_jf"]
    for policy in REFERENCE_POLICIES:
        means = []
        for name in names:
            valid = [v for v in curves[policy][name] if not math.isnan(v)]
            if valid:
                means.append(sum(valid) / len(valid))
        summary.append(f"{policy},{_fmt(sum(means) / len(means)) if means else ''}")
    (out / "compare_summary.csv").write_text("\n".join(summary) + "\n")
    return curves


def evaluate_directories(
    pred_root: Path, dataset_root: Path, out_dir: Path
) -> RunReport:
    """Metrics-only evaluation of prediction PNGs against dataset
    annotations, at native resolution."""
    videos = ds.ingest(dataset_root)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    reports = []
    for video in videos:
        if video.gt is None:
            continue
        pred_dir = Path(pred_root) / video.name
        if not pred_dir.is_dir():
            raise ds.DatasetError(f"no prediction directory for {video.name!r}")
        soft, hard = [], []
        for i in range(len(video)):
            path = pred_dir / f"{i:05d}.png"
            if not path.exists():
                raise ds.DatasetError(f"missing prediction {path}")
            p = ds.read_probability_mask(path)
            soft.append(p)
            hard.append(p >= 0.5)
        reports.append(
            evaluate_sequence(video.name, hard, soft, video.gt)
        )
    report = RunReport(
        sequences=reports,
        aggregate=aggregate_reports(reports),
        config_echo={"mode": "eval"},
        timings={},
    )
    write_report(out, report)
    return report
