"""Command-line interface.

Commands: gen-suite, ingest-check, run, ablate, compare-reference, eval.
The IMP_VOS_WORKERS environment variable overrides --jobs everywhere.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import dataset as ds
from . import harness, synthgen
from .core import PipelineError


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (
        harness.ConfigError,
        ds.DatasetError,
        PipelineError,
        PermissionError,
        FileNotFoundError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="impvos",
        description="Easy-frame selection and iterative mask propagation "
        "for unsupervised video object segmentation.",
    )
    sub = parser.add_subparsers(required=True)

    p = sub.add_parser("gen-suite", help="write the synthetic suite to a dataset root")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", type=int, default=1)
    p.set_defaults(func=cmd_gen_suite)

    p = sub.add_parser("ingest-check", help="validate a dataset and print its contents")
    p.add_argument("--dataset", type=Path, required=True)
    p.set_defaults(func=cmd_ingest_check)

    p = sub.add_parser("run", help="run the full pipeline over a dataset")
    p.add_argument("--config", type=Path, default=None,
                   help="flat key=value config file (defaults built in)")
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("ablate", help="sweep one config axis and emit a CSV")
    p.add_argument("--which", choices=harness.ABLATION_AXES, required=True)
    p.add_argument("--config", type=Path, default=None)
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser(
        "compare-reference",
        help="first-frame vs all-frames vs easy-frame referencing",
    )
    p.add_argument("--config", type=Path, default=None)
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("eval", help="metrics-only evaluation of prediction PNGs")
    p.add_argument("--pred", type=Path, required=True,
                   help="directory of <sequence>/NNNNN.png prediction masks")
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_eval)

    return parser


def cmd_gen_suite(args) -> int:
    suite = synthgen.standard_suite(seed=args.seed)
    ds.save_suite(args.out, suite)
    print(f"wrote {len(suite)} sequences to {args.out}")
    return 0


def cmd_ingest_check(args) -> int:
    videos = ds.ingest(args.dataset)
    schedules = ds.load_schedules(args.dataset)
    for video in videos:
        annotated = len(video.annotated_indices())
        schedule = "with schedule" if video.name in schedules else "no schedule"
        print(
            f"{video.name}: {len(video)} frames {video.width}×{video.height}, "
            f"{annotated} annotated, {schedule}"
        )
    print(f"ok: {len(videos)} sequences")
    return 0


def cmd_run(args) -> int:
    report = harness.run_pipeline(args.config, args.dataset, args.out, jobs=args.jobs)
    agg = report.aggregate
    print(
        f"done: J={agg['j_mean']:.4f} F={agg['f_mean']:.4f} "
        f"MAE={agg['mae']:.4f} over {len(report.sequences)} sequences"
    )
    print(f"report written to {args.out}")
    return 0


def cmd_ablate(args) -> int:
    cfg = harness.parse_config(args.config)
    rows = harness.ablate(args.which, args.dataset, args.out, config=cfg, jobs=args.jobs)
    print(f"{len(rows)} settings swept; CSV under {args.out}")
    return 0


def cmd_compare(args) -> int:
    cfg = harness.parse_config(args.config)
    curves = harness.compare_reference(args.dataset, args.out, config=cfg, jobs=args.jobs)
    for policy in harness.REFERENCE_POLICIES:
        import math

        means = []
        for jf in curves[policy].values():
            valid = [v for v in jf if not math.isnan(v)]
            if valid:
                means.append(sum(valid) / len(valid))
        mean = sum(means) / len(means) if means else float("nan")
        print(f"{policy}: suite-mean J&F {mean:.4f}")
    return 0


def cmd_eval(args) -> int:
    report = harness.evaluate_directories(args.pred, args.dataset, args.out)
    agg = report.aggregate
    print(
        f"J mean/recall/decay = {agg['j_mean']:.4f}/{agg['j_recall']:.4f}/{agg['j_decay']:.4f}"
    )
    print(
        f"F mean/recall/decay = {agg['f_mean']:.4f}/{agg['f_recall']:.4f}/{agg['f_decay']:.4f}"
    )
    print(
        f"MAE {agg['mae']:.4f}  F_max {agg['f_max']:.4f}  S {agg['s_measure']:.4f}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
