"""Command-line interface.

Subcommands: ``diversity``, ``learnability``, ``lowlevel``, ``validate`` and
``report``.  All commands are deterministic given identical inputs, flags and
seeds: the primary output (stdout or ``--out``) contains no timestamps or
timings; per-stage wall-clock timings go to stderr.  Floats are serialized
with round-trip-exact formatting in both JSON and CSV.

Exit codes: 0 success, 1 input/validation failure, 2 internal check failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .diversity import (
    DEFAULT_EPSILON,
    EntropyResult,
    diversity_entropy,
    diversity_entropy_knn,
    diversity_entropy_subsampled,
    diversity_entropy_truncated,
)
from .errors import InputError
from .kernel import KernelConfig, median_bandwidth
from .learnability import learnability_report
from .lowlevel import DEFAULT_SAMPLE_BUDGET, STAT_NAMES, dataset_lowlevel_summary
from .manifest import Hyperparams, load_dataset, load_manifest
from .validation import default_directional_spec, directional_suite, fixture_check

DIRECTIONAL_SEEDS = tuple(range(10))
FIXTURE_TOLERANCE = 0.01


@dataclass
class Timings:
    stages: dict[str, float] = field(default_factory=dict)

    def stage(self, name):
        return _StageTimer(self, name)

    def report(self):
        parts = " ".join(f"{k}={v:.3f}s" for k, v in self.stages.items())
        print(f"timings: {parts}", file=sys.stderr)


class _StageTimer:
    def __init__(self, timings, name):
        self.timings, self.name = timings, name

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.timings.stages[self.name] = time.perf_counter() - self.t0
        return False


@dataclass
class MetricReport:
    """Everything one dataset run produces; timings never enter primary output."""

    dataset: str
    n: int
    dim: int
    entropy: EntropyResult | None = None
    learnability: dict | None = None
    lowlevel: dict | None = None
    params: dict | None = None
    timings: Timings = field(default_factory=Timings)


def _fmt(value):
    """Round-trip-exact decimal serialization, shared by JSON and CSV."""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _emit(doc, rows, args) -> None:
    """Write the JSON document or CSV rows to --out (or stdout)."""
    if args.format == "json":
        text = json.dumps(doc, indent=2) + "\n"
    else:
        buf = io.StringIO()
        if rows:
            writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()), lineterminator="\n")
            writer.writeheader()
            for row in rows:
                writer.writerow({k: _fmt(v) if v is not None else "" for k, v in row.items()})
        text = buf.getvalue()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _entropy_doc(result: EntropyResult) -> dict:
    return {
        "value": result.value,
        "n": result.n,
        "sigma": result.sigma,
        "convention": result.convention,
        "method": result.method,
        "bounds": list(result.bounds),
    }


def _run_entropy(X, args, timings) -> EntropyResult:
    with timings.stage("bandwidth"):
        sigma = median_bandwidth(X) if args.bandwidth == "median" else args.sigma
    cfg = KernelConfig(sigma=sigma, convention=args.convention)
    kwargs = dict(threads=args.threads)
    with timings.stage("entropy"):
        if args.method == "exact":
            return diversity_entropy(X, cfg, args.epsilon, **kwargs)
        if args.method == "subsample":
            m = args.m if args.m is not None else X.rows
            return diversity_entropy_subsampled(
                X, cfg, m=m, repeats=args.repeats, seed=args.seed, epsilon=args.epsilon,
                **kwargs,
            )
        if args.method == "truncate":
            if args.tau is None:
                raise InputError("--method truncate requires --tau")
            return diversity_entropy_truncated(X, cfg, tau=args.tau, epsilon=args.epsilon,
                                               **kwargs)
        if args.k is None:
            raise InputError("--method knn requires --k")
        return diversity_entropy_knn(X, cfg, k=args.k, epsilon=args.epsilon, **kwargs)


def cmd_diversity(args) -> int:
    timings = Timings()
    with timings.stage("load"):
        manifest, X = load_dataset(args.manifest)
    result = _run_entropy(X, args, timings)
    doc = {
        "tool": "edmetrics",
        "version": __version__,
        "command": "diversity",
        "dataset": manifest.name,
        "n": X.rows,
        "dim": X.dim,
        "entropy": _entropy_doc(result),
        "params": {
            "sigma": args.sigma,
            "bandwidth": args.bandwidth,
            "convention": args.convention,
            "method": args.method,
            "m": args.m,
            "repeats": args.repeats,
            "tau": args.tau,
            "k": args.k,
            "epsilon": args.epsilon,
            "seed": args.seed,
        },
    }
    row = {
        "dataset": manifest.name,
        "n": X.rows,
        "dim": X.dim,
        "value": result.value,
        "sigma": result.sigma,
        "convention": result.convention,
        "method": result.method,
        "bound_lower": result.bounds[0],
        "bound_upper": result.bounds[1],
    }
    _emit(doc, [row], args)
    timings.report()
    return 0


def _hyperparams(args) -> Hyperparams:
    return Hyperparams(
        sigma_global=args.sigma,
        sigma_task=args.sigma_task,
        sigma_center=args.sigma_center,
        sigma_model=args.sigma_model,
        beta=args.beta,
    )


def cmd_learnability(args) -> int:
    timings = Timings()
    with timings.stage("load"):
        manifest, X = load_dataset(args.manifest)
    hp = _hyperparams(args)
    with timings.stage("learnability"):
        report = learnability_report(manifest, X, hp)
    doc = {
        "tool": "edmetrics",
        "version": __version__,
        "command": "learnability",
        "dataset": manifest.name,
        "n": X.rows,
        "dim": X.dim,
        "params": {
            "beta": hp.beta,
            "sigma_task": hp.sigma_task,
            "sigma_center": hp.sigma_center,
            "sigma_model": hp.sigma_model,
        },
        **report.to_dict(),
    }
    rows = [
        {**task, "dataset_score": report.dataset_score}
        for task in report.to_dict()["tasks"]
    ]
    _emit(doc, rows, args)
    timings.report()
    return 0


def cmd_lowlevel(args) -> int:
    timings = Timings()
    with timings.stage("load"):
        manifest = load_manifest(args.manifest)
    with timings.stage("stats"):
        spreads = dataset_lowlevel_summary(
            manifest, sample_budget=args.budget, seed=args.seed,
            root=Path(args.manifest).parent,
        )
    doc = {
        "tool": "edmetrics",
        "version": __version__,
        "command": "lowlevel",
        "dataset": manifest.name,
        "spreads": {name: float(v) for name, v in zip(STAT_NAMES, spreads)},
        "params": {"budget": args.budget, "seed": args.seed},
    }
    row = {"dataset": manifest.name,
           **{name: float(v) for name, v in zip(STAT_NAMES, spreads)}}
    _emit(doc, [row], args)
    timings.report()
    return 0


def cmd_validate(args) -> int:
    timings = Timings()
    with timings.stage("fixture"):
        fixture = fixture_check(FIXTURE_TOLERANCE)
    with timings.stage("directional"):
        directional = [
            (seed, directional_suite(default_directional_spec(seed)))
            for seed in DIRECTIONAL_SEEDS
        ]
    cells = [
        {
            "group": c.group,
            "metric": c.metric,
            "computed": c.computed,
            "expected": c.expected,
            "deviation": c.deviation,
            "passed": c.passed,
        }
        for c in fixture.cells
    ]
    scenarios = [
        {
            "seed": seed,
            "scenario": s.name,
            "passed": s.passed,
            "checks": s.checks,
            "deltas": s.deltas,
        }
        for seed, result in directional
        for s in result.scenarios
    ]
    all_passed = fixture.passed and all(s["passed"] for s in scenarios)
    doc = {
        "tool": "edmetrics",
        "version": __version__,
        "command": "validate",
        "fixture": {"tolerance": FIXTURE_TOLERANCE, "kendall_variant": fixture.kendall_variant,
                    "cells": cells, "passed": fixture.passed},
        "directional": {"seeds": list(DIRECTIONAL_SEEDS), "scenarios": scenarios,
                        "passed": all(s["passed"] for s in scenarios)},
        "passed": all_passed,
    }
    rows = [{**c} for c in cells]
    _emit(doc, rows, args)
    timings.report()
    if not all_passed:
        failing = next(
            (f"fixture {c['group']}/{c['metric']}" for c in cells if not c["passed"]),
            None,
        ) or next(
            f"directional seed {s['seed']} {s['scenario']}"
            for s in scenarios if not s["passed"]
        )
        print(f"validate: first failing check: {failing}", file=sys.stderr)
        return 2
    return 0


def cmd_report(args) -> int:
    rows = []
    feature_dump = []
    all_timings = Timings()
    for manifest_path in args.manifests:
        report = MetricReport(dataset="", n=0, dim=0)
        with report.timings.stage("load"):
            manifest, X = load_dataset(manifest_path)
        report.dataset, report.n, report.dim = manifest.name, X.rows, X.dim
        report.params = {"sigma": args.sigma, "budget": args.budget, "seed": args.seed}
        cfg = KernelConfig(sigma=args.sigma, convention=args.convention)
        with report.timings.stage("entropy"):
            report.entropy = diversity_entropy(X, cfg, args.epsilon,
                                               threads=args.threads)
        if any(ep.frame_refs for ep in manifest.episodes):
            with report.timings.stage("lowlevel"):
                spreads = dataset_lowlevel_summary(
                    manifest, sample_budget=args.budget, seed=args.seed,
                    root=Path(manifest_path).parent,
                )
            report.lowlevel = {name: float(v) for name, v in zip(STAT_NAMES, spreads)}
        row = {
            "dataset": report.dataset,
            "n_samples": report.n,
            "size_bytes": Path(manifest.feature_file).stat().st_size,
            "dim": report.dim,
        }
        for name in STAT_NAMES:
            row[name] = report.lowlevel[name] if report.lowlevel else None
        row["diversity_entropy"] = report.entropy.value
        rows.append(row)
        for stage, seconds in report.timings.stages.items():
            all_timings.stages[f"{stage}:{report.dataset}"] = seconds
        if args.emit_features:
            feature_dump.append((manifest.name, X))
    doc = {
        "tool": "edmetrics",
        "version": __version__,
        "command": "report",
        "params": {"sigma": args.sigma, "budget": args.budget, "seed": args.seed},
        "datasets": rows,
    }
    _emit(doc, rows, args)
    if args.emit_features:
        with open(args.emit_features, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            dim = max(x.dim for _, x in feature_dump)
            writer.writerow(["dataset", "row"] + [f"f{i}" for i in range(dim)])
            for name, X in feature_dump:
                for i in range(X.rows):
                    writer.writerow([name, i] + [_fmt(float(v)) for v in X.data[i]])
    all_timings.report()
    return 0


def _add_output_flags(p):
    p.add_argument("--out", help="write primary output to this path instead of stdout")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--threads", type=int, default=1,
                   help="worker threads; results are identical for any value")
    p.add_argument("--seed", type=int, default=0)


def _add_entropy_flags(p):
    p.add_argument("--sigma", type=float, default=0.1, help="kernel bandwidth")
    p.add_argument("--bandwidth", choices=("fixed", "median"), default="fixed")
    p.add_argument("--convention", choices=("unnormalized", "normalized"),
                   default="unnormalized")
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="edmetrics",
        description="Diversity-entropy and learnability metrics for embodied datasets",
    )
    parser.add_argument("--version", action="version", version=f"edmetrics {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("diversity", help="Parzen-window diversity entropy of a dataset")
    p.add_argument("--manifest", required=True)
    _add_entropy_flags(p)
    p.add_argument("--method", choices=("exact", "subsample", "truncate", "knn"),
                   default="exact")
    p.add_argument("--m", type=int, help="subsample size")
    p.add_argument("--repeats", type=int, default=8, help="subsample repeats")
    p.add_argument("--tau", type=float, help="truncation distance")
    p.add_argument("--k", type=int, help="nearest-neighbor count")
    _add_output_flags(p)
    p.set_defaults(func=cmd_diversity)

    p = sub.add_parser("learnability", help="per-task and dataset learnability scores")
    p.add_argument("--manifest", required=True)
    p.add_argument("--sigma", type=float, default=0.1,
                   help="global bandwidth (echoed into hyperparameters)")
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--sigma-task", type=float, default=0.001, dest="sigma_task")
    p.add_argument("--sigma-center", type=float, default=0.01, dest="sigma_center")
    p.add_argument("--sigma-model", type=float, default=0.02, dest="sigma_model")
    _add_output_flags(p)
    p.set_defaults(func=cmd_learnability)

    p = sub.add_parser("lowlevel", help="normalized spreads of five visual statistics")
    p.add_argument("--manifest", required=True)
    p.add_argument("--budget", type=int, default=DEFAULT_SAMPLE_BUDGET,
                   help="max frames to sample")
    _add_output_flags(p)
    p.set_defaults(func=cmd_lowlevel)

    p = sub.add_parser("validate", help="fixture correlations and directional behaviors")
    _add_output_flags(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("report", help="one summary row per dataset")
    p.add_argument("manifests", nargs="+")
    _add_entropy_flags(p)
    p.add_argument("--budget", type=int, default=DEFAULT_SAMPLE_BUDGET)
    p.add_argument("--emit-features", dest="emit_features",
                   help="also dump all feature matrices as CSV to this path")
    _add_output_flags(p)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
