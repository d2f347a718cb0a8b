"""Command line entry point: ``hybrid-ncl {gen,train,combine,sweep,compare,decompose}``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .core import ambiguity_decomposition, bvc_decomposition, read_prediction_csv
from .pipeline import (
    METHODS,
    ExperimentConfig,
    batch_compare,
    lambda_sweep,
    parse_grid,
    run_experiment,
    synthetic_suite,
    train_stage,
)
from .zoo import SYNTH_KINDS, load_specs, synth_dataset, write_dataset_csv
from .core import write_prediction_csv

SEED_ENV = "HYBRID_NCL_SEED"
_METHOD_ALIASES = {m.lower().replace("-", "_"): m for m in METHODS}


def _seed(args) -> int:
    env = os.environ.get(SEED_ENV)
    return int(env) if env not in (None, "") else args.seed


def _methods(text: str) -> tuple[str, ...]:
    out = []
    for token in text.split(","):
        key = token.strip().lower().replace("-", "_")
        if key not in _METHOD_ALIASES:
            raise argparse.ArgumentTypeError(f"unknown method {token!r}; choose from {', '.join(METHODS)}")
        out.append(_METHOD_ALIASES[key])
    return tuple(out)


def _lam(text: str):
    return "auto" if text == "auto" else float(text)


def cmd_gen(args) -> int:
    seed = _seed(args)
    if args.suite:
        for cfg in synthetic_suite(seed, n=args.n):
            X, y = synth_dataset(**cfg.synthetic)
            write_dataset_csv(X, y, Path(args.out) / f"{cfg.name}.csv")
        return 0
    X, y = synth_dataset(args.kind, args.n, args.noise, seed)
    write_dataset_csv(X, y, args.out)
    return 0


def cmd_train(args) -> int:
    cfg = ExperimentConfig(dataset_csv=args.data, target=args.target, seed=_seed(args),
                           ratios=(args.train_ratio, args.val_ratio), folds=args.folds,
                           specs=load_specs(args.config) if args.config else None)
    val, test, cv = train_stage(cfg)
    out = Path(args.out)
    write_prediction_csv(val, out / "val.csv")
    write_prediction_csv(test, out / "test.csv")
    summary = {k: {"best_params": v.best_params, "mean_validation_error": v.mean_validation_error}
               for k, v in cv.items()}
    (out / "cv.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    return 0


def cmd_combine(args) -> int:
    cfg = ExperimentConfig(val_csv=args.val, test_csv=args.test, methods=args.methods, lam=args.lam,
                           alpha=args.alpha, error_metric=args.metric, seed=_seed(args),
                           lambda_holdout=args.lambda_holdout, out_dir=args.out)
    report = run_experiment(cfg)
    print(report.run_dir / "report.json")
    for r in report.methods.values():
        if r.ok:
            e = r.test_error
            print(f"{r.method:8s} test rmse={e.rmse:.6g} mae={e.mae:.6g} mape={e.mape:.6g}")
        else:
            print(f"{r.method:8s} FAILED: {r.error}")
    return 0 if report.ok else 1


def cmd_sweep(args) -> int:
    val, test = read_prediction_csv(args.val), read_prediction_csv(args.test)
    grid = parse_grid(args.grid)
    rows = lambda_sweep(val, test, grid, alpha=args.alpha, out_path=Path(args.out) / "sweep.csv")
    print(Path(args.out) / "sweep.csv")
    return 0 if len(rows) == len(grid) else 1


def cmd_compare(args) -> int:
    seed = _seed(args)
    if args.data_dir:
        configs = [ExperimentConfig(name=p.stem, dataset_csv=str(p), seed=seed, methods=args.methods,
                                    out_dir=str(Path(args.out) / "runs"))
                   for p in sorted(Path(args.data_dir).glob("*.csv"))]
    else:
        configs = synthetic_suite(seed, n=args.n, out_dir=str(Path(args.out) / "runs"), methods=args.methods)
    result = batch_compare(configs, alpha=args.alpha, out_dir=args.out)
    t = result.tables["rmse"]
    for name, r in sorted(zip(t.methods, t.mean_ranks), key=lambda x: x[1]):
        print(f"{name:8s} mean rank (rmse) {r:.3f}")
    ok = all(rep.ok for rep in result.reports)
    return 0 if ok else 1


def cmd_decompose(args) -> int:
    out = {}
    if args.val:
        preds = read_prediction_csv(args.val)
        w = np.array([float(x) for x in args.weights.split(",")]) if args.weights else np.full(preds.m, 1 / preds.m)
        out["ambiguity"] = ambiguity_decomposition(preds, w).as_dict()
    if args.trials:
        mats = [read_prediction_csv(p) for p in args.trials]
        out["bias_variance_covariance"] = bvc_decomposition(mats, mats[0].y_true).as_dict()
    if not out:
        raise SystemExit("decompose needs --val and/or --trials")
    print(json.dumps(out, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hybrid-ncl", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write synthetic dataset CSVs")
    g.add_argument("--kind", choices=SYNTH_KINDS, default="friedman1")
    g.add_argument("--n", type=int, default=800)
    g.add_argument("--noise", type=float, default=0.5)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--suite", action="store_true", help="write the 20-dataset suite into --out (a directory)")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("train", help="stage 1: fit the model pool, write val/test prediction matrices")
    t.add_argument("--data", required=True)
    t.add_argument("--target", default="target")
    t.add_argument("--config", help="JSON/TOML model grid file")
    t.add_argument("--train-ratio", type=float, default=0.5)
    t.add_argument("--val-ratio", type=float, default=0.1)
    t.add_argument("--folds", type=int, default=5)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    c = sub.add_parser("combine", help="stage 2: weight the sub-models with every requested method")
    c.add_argument("--val", required=True)
    c.add_argument("--test", required=True)
    c.add_argument("--methods", type=_methods, default=METHODS)
    c.add_argument("--lambda", dest="lam", type=_lam, default="auto")
    c.add_argument("--alpha", type=float, default=0.05, help="regularization strength for NCL-R")
    c.add_argument("--metric", default="rmse", choices=["rmse", "mae", "mape", "combined"],
                   help="validation error driving EIW/EEW")
    c.add_argument("--lambda-holdout", type=float, default=None,
                   help="fraction of validation rows reserved for scoring lambda candidates")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_combine)

    s = sub.add_parser("sweep", help="fit weights over a fixed lambda grid")
    s.add_argument("--val", required=True)
    s.add_argument("--test", required=True)
    s.add_argument("--grid", default="0:1:0.1")
    s.add_argument("--alpha", type=float, default=0.0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sweep)

    k = sub.add_parser("compare", help="multi-dataset comparison with Friedman/Nemenyi tests")
    k.add_argument("--data-dir", help="directory of dataset CSVs (default: the synthetic suite)")
    k.add_argument("--n", type=int, default=800, help="rows per synthetic dataset")
    k.add_argument("--methods", type=_methods, default=METHODS)
    k.add_argument("--alpha", type=float, default=0.05, choices=[0.05, 0.10])
    k.add_argument("--seed", type=int, default=0)
    k.add_argument("--out", required=True)
    k.set_defaults(func=cmd_compare)

    d = sub.add_parser("decompose", help="ambiguity and bias-variance-covariance diagnostics")
    d.add_argument("--val", help="prediction CSV for the ambiguity decomposition")
    d.add_argument("--weights", help="comma-separated weights (default uniform)")
    d.add_argument("--trials", nargs="+", help="prediction CSVs from repeated trials")
    d.set_defaults(func=cmd_decompose)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
