"""Command-line interface: simulate, mi, emi, capacity, classify, sweep, validate."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .capacity import capacity_curve, capacity_table_to_csv, user_capacity
from .classifier import classification_report_to_csv, error_rate_experiment
from .config import ScenarioConfig, load_config
from .fingerprint import build_dataset, dataset_to_csv, load_dataset, save_dataset
from .harness import (SweepSpec, bound_checks_to_csv, read_sweep_rows, run_sweep,
                      sweep_to_csv, sweep_to_json, validate_bounds)
from .infotheory import emi_kde, mi_report_to_csv, per_feature_mi
from .signal_model import sample_profiles


def _add_common(parser: argparse.ArgumentParser, fmt_choices=("csv", "json")) -> None:
    parser.add_argument("--config", type=Path, help="scenario YAML file")
    parser.add_argument("--seed", type=int, help="override the scenario seed")
    parser.add_argument("--out", type=Path, help="output file path")
    parser.add_argument("--format", choices=fmt_choices, default=fmt_choices[0],
                        help=f"output format (default {fmt_choices[0]})")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker processes for sweeps (default 1)")


def _scenario(args) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else ScenarioConfig()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _emit_json(payload: dict, out: Path | None) -> None:
    text = json.dumps(payload, indent=2) + "\n"
    if out:
        out.write_text(text)
    else:
        sys.stdout.write(text)


def _build_scenario_dataset(cfg: ScenarioConfig):
    profiles = sample_profiles(cfg.population, cfg.n_devices, cfg.seed)
    return build_dataset(profiles, cfg.per_class, cfg.pipeline, cfg.seed)


def _load_or_build(args, cfg: ScenarioConfig):
    if getattr(args, "data", None):
        return load_dataset(args.data)
    return _build_scenario_dataset(cfg)


def cmd_simulate(args) -> int:
    cfg = _scenario(args)
    ds = _build_scenario_dataset(cfg)
    out = args.out or Path(f"dataset.{ 'rfds' if args.format == 'bin' else args.format }")
    if args.format == "bin":
        save_dataset(ds, out)
    elif args.format == "csv":
        dataset_to_csv(ds, out)
    else:
        _emit_json({"meta": {"fs_hz": ds.meta.fs_hz, "n_fft": ds.meta.n_fft,
                             "snr_db": ds.meta.snr_db, "q_bits": ds.meta.q_bits,
                             "class_ids": ds.meta.class_ids},
                    "features": ds.features.tolist(),
                    "labels": ds.labels.tolist()}, out)
    print(f"wrote {ds.n_samples} samples x {ds.n_bins} bins "
          f"({ds.n_classes} devices) to {out}")
    return 0


def cmd_mi(args) -> int:
    cfg = _scenario(args)
    ds = _load_or_build(args, cfg)
    report = per_feature_mi(ds, bins=args.bins or cfg.estimator.bins)
    out = args.out or Path("mi_report.csv" if args.format == "csv" else "mi_report.json")
    if args.format == "csv":
        mi_report_to_csv(report, out, fs_hz=ds.meta.fs_hz or None)
        print(f"wrote per-bin MI for {report.per_bin_mi.size} bins to {out}")
    else:
        _emit_json({"bins": report.bins,
                    "mi_bits": report.per_bin_mi.tolist(),
                    "h_x": report.h_x.tolist()}, out)
    return 0


def cmd_emi(args) -> int:
    cfg = _scenario(args)
    ds = _load_or_build(args, cfg)
    est = emi_kde(ds, projected_dim=args.dim or cfg.estimator.projected_dim)
    payload = {"emi_bits": est.emi_bits, "emi_bits_clamped": est.emi_bits_clamped,
               "projected_dim": est.projected_dim, "n_samples": est.n_samples,
               "n_classes": ds.n_classes,
               "bandwidths": est.bandwidths.tolist()}
    if args.format == "csv" and args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write("emi_bits,emi_bits_clamped,projected_dim,n_samples,n_classes\n")
            fh.write(f"{est.emi_bits!r},{est.emi_bits_clamped!r},"
                     f"{est.projected_dim},{est.n_samples},{ds.n_classes}\n")
        print(f"wrote EMI summary to {args.out}")
    else:
        _emit_json(payload, args.out if args.format == "json" else None)
    return 0


def cmd_capacity(args) -> int:
    cfg = _scenario(args)
    thresholds = [float(t) for t in args.thresholds.split(",")]
    n_max = args.n_max or cfg.capacity.n_max
    points = capacity_curve([0.0], [args.emi], thresholds=thresholds, n_max=n_max)
    if args.format == "csv" and args.out:
        capacity_table_to_csv(points, args.out)
        print(f"wrote capacity table to {args.out}")
    else:
        results = {f"{t:g}": {"n_c": r.n_c, "saturated": r.saturated,
                              "below_min": r.below_min}
                   for t, r in points[0].results.items()}
        _emit_json({"emi_bits": args.emi, "n_max": n_max, "capacity": results},
                   args.out if args.format == "json" else None)
    return 0


def cmd_classify(args) -> int:
    cfg = _scenario(args)
    n_classes = args.n_classes or min(cfg.n_devices, cfg.classifier.max_devices)
    profiles = sample_profiles(cfg.population, max(n_classes, cfg.n_devices), cfg.seed)
    report = error_rate_experiment(
        profiles, n_classes, cfg.pipeline,
        train_per_class=cfg.classifier.train_per_class,
        test_per_class=cfg.classifier.test_per_class,
        kappa=cfg.classifier.kappa, ridge=cfg.classifier.ridge,
        master_seed=cfg.seed, shuffle_train_labels=args.shuffle_labels)
    summary = {"n_classes": n_classes, "pe": report.pe,
               "n_test": report.n_test,
               "per_class_errors": report.per_class_errors.tolist(),
               "unseen_labels": report.unseen_labels}
    if args.out:
        if args.format == "csv":
            classification_report_to_csv(report, args.out)
        else:
            _emit_json(summary | {
                "confusion": report.confusion.tolist(),
                "assigned_ids": report.assigned_ids.tolist(),
                "true_ids": report.true_ids.tolist()}, args.out)
        print(f"wrote classification report to {args.out}")
    print(json.dumps(summary, indent=2))
    return 0


def cmd_sweep(args) -> int:
    cfg = _scenario(args)
    spec = SweepSpec(axis=cfg.sweep.axis, values=cfg.sweep.values, fixed=cfg)
    result = run_sweep(spec, with_classifier=args.with_classifier,
                       threads=args.threads)
    out = args.out or Path(f"sweep_{spec.axis}.{args.format}")
    if args.format == "csv":
        sweep_to_csv(result, out)
    else:
        sweep_to_json(result, out)
    print(f"wrote {len(result.rows)} rows ({len(result.aborted)} aborted) to {out}")
    for ab in result.aborted:
        print(f"  aborted value={ab.value!r}: {ab.reason}", file=sys.stderr)
    return 0


def cmd_validate(args) -> int:
    rows = read_sweep_rows(args.rows)
    checks = validate_bounds(rows, slack=args.slack)
    if args.out:
        if args.format == "csv":
            bound_checks_to_csv(checks, args.out)
        else:
            _emit_json({"slack": args.slack,
                        "checks": [vars(c) for c in checks]}, args.out)
    failures = [c for c in checks if not c.passed]
    for c in checks:
        status = "pass" if c.passed else "FAIL"
        print(f"{status} value={c.value:g} n={c.n_classes} pe={c.pe:.4f} "
              f"bound={c.slacked_lower:.4f} margin={c.margin:+.4f}")
    print(f"{len(checks) - len(failures)}/{len(checks)} bound checks passed")
    return 1 if failures else 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="rffcap",
        description="RF-fingerprint capacity analysis: simulate devices, estimate "
                    "identity information, derive user capacity, and cross-check "
                    "with an empirical classifier.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="build a labeled fingerprint dataset")
    _add_common(p, fmt_choices=("bin", "csv", "json"))
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("mi", help="per-feature-bin mutual information")
    _add_common(p)
    p.add_argument("--data", type=Path, help="existing dataset file (.rfds)")
    p.add_argument("--bins", type=int, help="histogram bins (default from config)")
    p.set_defaults(func=cmd_mi)

    p = sub.add_parser("emi", help="ensemble mutual information (KDE)")
    _add_common(p, fmt_choices=("json", "csv"))
    p.add_argument("--data", type=Path, help="existing dataset file (.rfds)")
    p.add_argument("--dim", type=int, help="projection dimension (default from config)")
    p.set_defaults(func=cmd_emi)

    p = sub.add_parser("capacity", help="user capacity from an EMI value")
    _add_common(p, fmt_choices=("json", "csv"))
    p.add_argument("--emi", type=float, required=True, help="EMI estimate in bits")
    p.add_argument("--thresholds", default="0.01,0.10",
                   help="comma-separated error thresholds (default 0.01,0.10)")
    p.add_argument("--n-max", type=int, help="largest population to scan")
    p.set_defaults(func=cmd_capacity)

    p = sub.add_parser("classify", help="train/test error-rate experiment")
    _add_common(p)
    p.add_argument("--n-classes", type=int, help="devices to classify (default config)")
    p.add_argument("--shuffle-labels", action="store_true",
                   help="shuffle training labels to measure chance level")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("sweep", help="run the configured parameter sweep")
    _add_common(p)
    p.add_argument("--with-classifier", action="store_true",
                   help="bracket each capacity with empirical error rates")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", help="check sweep rows against error bounds")
    _add_common(p)
    p.add_argument("--rows", type=Path, required=True, help="sweep CSV/JSON file")
    p.add_argument("--slack", type=float, default=0.2,
                   help="EMI slack in bits (default 0.2)")
    p.set_defaults(func=cmd_validate)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
