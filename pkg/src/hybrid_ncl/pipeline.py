"""End-to-end experiments: data -> sub-model predictions -> combination -> report."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import baselines as bl
from .core import (
    ErrorTriple,
    PredictionMatrix,
    combine,
    diversity_score,
    error_triple,
    read_prediction_csv,
    write_prediction_csv,
)
from .ncl import REGULARIZED_ALPHA, NclConfig, NclFit, fit_weights, search_lambda
from .solver import NumericalFailure
from .stats import friedman_statistic, nemenyi_cd, rank_table, significance_pairs, write_cd_csv
from .zoo import (
    RegressorSpec,
    build_prediction_matrix,
    default_specs,
    load_dataset_csv,
    split_indices,
    synth_dataset,
    SYNTH_KINDS,
)

log = logging.getLogger(__name__)

METHODS = ("NCL", "NCL-R", "BEM", "BEM-NCL", "GEM", "LR", "MDT", "EIW", "EEW")
METRICS = ("rmse", "mae", "mape")
VALIDATION_ROWS_WARNING = 50_000


@dataclass
class ExperimentConfig:
    """One dataset run. Exactly one input source must be set.

    ``lam`` is ``"auto"`` for the coarse-to-fine search or a fixed value in
    [0, 1]. ``alpha`` is the regularization strength used by ``NCL-R``.
    ``lambda_holdout`` (a fraction) reserves part of the validation rows for
    scoring lambda candidates instead of reusing the fitting rows.
    """

    name: str = "experiment"
    dataset_csv: str | None = None
    val_csv: str | None = None
    test_csv: str | None = None
    synthetic: dict | None = None  # kwargs for synth_dataset
    target: str = "target"
    ratios: tuple[float, float] = (0.5, 0.1)
    seed: int = 0
    folds: int = 5
    methods: tuple[str, ...] = METHODS
    lam: float | str = "auto"
    alpha: float = REGULARIZED_ALPHA
    error_metric: str = "rmse"
    lambda_holdout: float | None = None
    specs: list | None = None
    out_dir: str = "runs"

    def __post_init__(self):
        sources = [self.dataset_csv is not None, self.val_csv is not None, self.synthetic is not None]
        if sum(sources) != 1:
            raise ValueError("set exactly one of dataset_csv, val_csv/test_csv or synthetic")
        if self.val_csv is not None and self.test_csv is None:
            raise ValueError("val_csv needs a matching test_csv")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ValueError(f"unknown methods {bad}; choose from {METHODS}")
        if self.lam != "auto" and not 0.0 <= float(self.lam) <= 1.0:
            raise ValueError("lam must be 'auto' or within [0, 1]")
        self.ratios = tuple(self.ratios)
        self.methods = tuple(self.methods)

    def fingerprint(self) -> str:
        """Hash of the settings and of the input file contents (not their paths)."""
        payload = {k: v for k, v in asdict(self).items() if k not in ("out_dir", "dataset_csv", "val_csv", "test_csv")}
        payload["specs"] = [asdict(s) for s in (self.specs or default_specs())]
        for key in ("dataset_csv", "val_csv", "test_csv"):
            path = getattr(self, key)
            if path is not None:
                payload[key] = hashlib.sha256(Path(path).read_bytes()).hexdigest()
        blob = json.dumps(payload, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


@dataclass
class MethodResult:
    method: str
    model: dict | None = None
    val_error: ErrorTriple | None = None
    test_error: ErrorTriple | None = None
    lambda_star: float | None = None
    improvement_vs_bem: dict | None = None
    error: str | None = None
    warnings: list = field(default_factory=list)
    test_pred: np.ndarray | None = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return self.error is None

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "model": self.model,
            "validation": self.val_error.as_dict() if self.val_error else None,
            "test": self.test_error.as_dict() if self.test_error else None,
            "lambda_star": self.lambda_star,
            "improvement_vs_bem_pct": self.improvement_vs_bem,
            "error": self.error,
            "warnings": self.warnings,
        }


@dataclass
class FitReport:
    name: str
    run_id: str
    n_val: int
    n_test: int
    model_names: tuple[str, ...]
    diversity: float | None
    methods: dict[str, MethodResult]
    bem_test_error: ErrorTriple | None = None
    run_dir: Path | None = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.methods.values())

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "run_id": self.run_id,
            "n_val": self.n_val,
            "n_test": self.n_test,
            "model_names": list(self.model_names),
            "diversity": self.diversity,
            "methods": [r.to_dict() for r in self.methods.values()],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False, default=_json_default) + "\n"


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def improvement(bem_err: ErrorTriple, err: ErrorTriple) -> dict:
    """Percent improvement over BEM per metric; positive means lower error than BEM."""
    out = {}
    for metric in METRICS:
        base, value = getattr(bem_err, metric), getattr(err, metric)
        out[metric] = None if not (np.isfinite(base) and np.isfinite(value)) or base == 0 else 100.0 * (base - value) / base
    return out


# -- stage 1 -------------------------------------------------------------------

def _load_xy(config: ExperimentConfig):
    if config.synthetic is not None:
        X, y = synth_dataset(**config.synthetic)
        return X, y
    X, y, _ = load_dataset_csv(config.dataset_csv, target=config.target)
    return X, y


def train_stage(config: ExperimentConfig):
    """Split the data and build validation/test prediction matrices."""
    X, y = _load_xy(config)
    tr, va, te = split_indices(len(y), config.ratios, seed=config.seed)
    if len(va) > VALIDATION_ROWS_WARNING:
        log.warning("validation split has %d rows; the weight solver may become slow", len(va))
    specs = config.specs or default_specs()
    return build_prediction_matrix(specs, X[tr], y[tr], X[va], y[va], X[te], y[te], k=config.folds, seed=config.seed)


def load_matrices(config: ExperimentConfig) -> tuple[PredictionMatrix, PredictionMatrix, dict]:
    if config.val_csv is not None:
        val, test = read_prediction_csv(config.val_csv), read_prediction_csv(config.test_csv)
        if val.model_names != test.model_names:
            raise ValueError("validation and test CSVs have different model columns")
        return val, test, {}
    return train_stage(config)


# -- stage 2 -------------------------------------------------------------------

def _holdout_split(val: PredictionMatrix, frac: float | None, seed: int):
    if not frac:
        return val, None
    perm = np.random.default_rng(seed).permutation(val.n)
    n_sel = int(round(frac * val.n))
    if n_sel < 1 or n_sel >= val.n:
        raise ValueError("lambda_holdout leaves an empty split")
    return val.take_rows(np.sort(perm[n_sel:])), val.take_rows(np.sort(perm[:n_sel]))


def fit_ncl(val: PredictionMatrix, lam, alpha: float, holdout=None, seed: int = 0) -> NclFit:
    if lam == "auto":
        fit_rows, select_rows = _holdout_split(val, holdout, seed)
        return search_lambda(fit_rows, NclConfig(alpha=alpha), preds_select=select_rows)
    return fit_weights(val, NclConfig(lam=float(lam), alpha=alpha))


def combine_stage(val: PredictionMatrix, test: PredictionMatrix, config: ExperimentConfig) -> dict[str, MethodResult]:
    results: dict[str, MethodResult] = {}
    ncl_cache: dict[str, NclFit] = {}

    def get_ncl(alpha):
        key = "NCL-R" if alpha else "NCL"
        if key not in ncl_cache:
            ncl_cache[key] = fit_ncl(val, config.lam, alpha, config.lambda_holdout, config.seed)
        return ncl_cache[key]

    def weights_result(name, w, extra=None):
        r = MethodResult(name, model={"weights": [float(x) for x in w], **(extra or {})})
        r.val_error = error_triple(combine(val, w), val.y_true)
        r.test_pred = combine(test, w)
        r.test_error = error_triple(r.test_pred, test.y_true)
        return r

    for name in config.methods:
        try:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                if name in ("NCL", "NCL-R"):
                    fit = get_ncl(config.alpha if name == "NCL-R" else 0.0)
                    r = weights_result(name, fit.weights, {"support": fit.support, "converged": fit.converged,
                                                           "n_solves": fit.n_solves})
                    r.lambda_star = float(fit.lambda_star)
                    if not fit.converged:
                        r.warnings.append("solver did not converge")
                elif name == "BEM":
                    r = weights_result(name, bl.bem(val.m))
                elif name == "BEM-NCL":
                    r = weights_result(name, bl.bem_ncl(get_ncl(0.0).support, val.m))
                elif name == "GEM":
                    r = weights_result(name, bl.gem(val))
                elif name in ("EIW", "EEW"):
                    errs = bl.member_errors(val, config.error_metric)
                    r = weights_result(name, bl.eiw(errs) if name == "EIW" else bl.eew(errs))
                elif name == "LR":
                    stack = bl.lr_stack(val)
                    r = MethodResult(name, model=stack.to_dict())
                    r.val_error = error_triple(stack.predict(val), val.y_true)
                    r.test_pred = stack.predict(test)
                    r.test_error = error_triple(r.test_pred, test.y_true)
                elif name == "MDT":
                    pred, tree = bl.mdt(val, test, return_tree=True)
                    r = MethodResult(name, model={"tree": tree.to_dict()})
                    r.val_error = error_triple(tree.predict(val.values), val.y_true)
                    r.test_pred = pred
                    r.test_error = error_triple(pred, test.y_true)
                r.warnings.extend(str(w.message) for w in caught)
        except (NumericalFailure, ValueError, np.linalg.LinAlgError) as exc:
            log.error("%s failed: %s", name, exc)
            r = MethodResult(name, error=f"{type(exc).__name__}: {exc}")
        results[name] = r
    return results


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, default=_json_default) + "\n", encoding="utf-8")


def run_experiment(config: ExperimentConfig, write: bool = True) -> FitReport:
    """Run stage 1 (unless matrices are given) and stage 2, then persist everything.

    Files land in ``<out_dir>/<fingerprint>/``: ``val.csv``, ``test.csv``,
    ``cv.json`` (stage 1 only), ``test_predictions.csv`` and ``report.json``.
    """
    val, test, cv = load_matrices(config)
    results = combine_stage(val, test, config)
    bem_err = results["BEM"].test_error if "BEM" in results and results["BEM"].ok else \
        error_triple(combine(test, bl.bem(test.m)), test.y_true)
    for r in results.values():
        if r.ok:
            r.improvement_vs_bem = improvement(bem_err, r.test_error)
    report = FitReport(
        name=config.name,
        run_id=config.fingerprint(),
        n_val=val.n,
        n_test=test.n,
        model_names=val.model_names,
        diversity=diversity_score(val) if val.m >= 2 else None,
        methods=results,
        bem_test_error=bem_err,
    )
    if write:
        run_dir = Path(config.out_dir) / report.run_id
        run_dir.mkdir(parents=True, exist_ok=True)
        write_prediction_csv(val, run_dir / "val.csv")
        write_prediction_csv(test, run_dir / "test.csv")
        if cv:
            _write_json(run_dir / "cv.json", {k: {"best_params": v.best_params,
                                                  "mean_validation_error": v.mean_validation_error,
                                                  "per_fold_errors": v.per_fold_errors}
                                              for k, v in cv.items()})
        ok = [r for r in results.values() if r.ok]
        with open(run_dir / "test_predictions.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["y_true", *(r.method for r in ok)])
            for i in range(test.n):
                w.writerow([repr(float(test.y_true[i])), *(repr(float(r.test_pred[i])) for r in ok)])
        (run_dir / "report.json").write_text(report.to_json(), encoding="utf-8")
        report.run_dir = run_dir
    return report


# -- lambda sweep ----------------------------------------------------------------

def parse_grid(spec: str) -> list[float]:
    """``"0:1:0.1"`` -> [0.0, 0.1, ..., 1.0]; a comma list is taken literally."""
    if ":" in spec:
        lo, hi, step = (float(x) for x in spec.split(":"))
        count = int(np.floor((hi - lo) / step + 1e-9)) + 1
        return [round(lo + i * step, 10) for i in range(count)]
    return [float(x) for x in spec.split(",") if x.strip()]


def lambda_sweep(val: PredictionMatrix, test: PredictionMatrix, grid=None, alpha: float = 0.0,
                 out_path=None) -> list[dict]:
    grid = parse_grid("0:1:0.1") if grid is None else list(grid)
    rows = []
    for lam in grid:
        try:
            fit = fit_weights(val, NclConfig(lam=lam, alpha=alpha))
        except NumericalFailure as exc:
            log.warning("lambda=%s failed: %s", lam, exc)
            continue
        ev = error_triple(combine(val, fit.weights), val.y_true)
        et = error_triple(combine(test, fit.weights), test.y_true)
        rows.append({"lambda": lam,
                     "val_rmse": ev.rmse, "val_mae": ev.mae, "val_mape": ev.mape,
                     "test_rmse": et.rmse, "test_mae": et.mae, "test_mape": et.mape,
                     "converged": fit.converged,
                     "weights": fit.weights})
    if out_path is not None:
        Path(out_path).parent.mkdir(parents=True, exist_ok=True)
        cols = ["lambda", "val_rmse", "val_mae", "val_mape", "test_rmse", "test_mae", "test_mape", "converged"]
        with open(out_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for row in rows:
                w.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in cols])
    return rows


# -- multi-dataset comparison -------------------------------------------------------

def synthetic_suite(seed: int = 0, n: int = 800, out_dir: str = "runs", methods=METHODS, **kw) -> list[ExperimentConfig]:
    """Twenty synthetic datasets: each generator at five noise levels."""
    configs = []
    noise = (0.1, 0.3, 0.5, 1.0, 2.0)
    for k, kind in enumerate(SYNTH_KINDS):
        for j, sd in enumerate(noise):
            ds_seed = seed * 1000 + 10 * k + j
            configs.append(ExperimentConfig(
                name=f"{kind}-{j}",
                synthetic={"kind": kind, "n": n, "noise_sd": sd, "seed": ds_seed},
                seed=ds_seed, out_dir=out_dir, methods=tuple(methods), **kw))
    return configs


@dataclass
class CompareResult:
    reports: list[FitReport]
    tables: dict  # metric -> RankTable
    friedman: dict  # metric -> (chi2, p)
    cd: float | None
    significant: dict  # metric -> sorted pairs
    excluded: list[str]

    def to_dict(self) -> dict:
        return {
            "datasets": [r.name for r in self.reports],
            "excluded": self.excluded,
            "critical_difference": self.cd,
            "metrics": {
                m: {
                    "methods": list(t.methods),
                    "mean_ranks": t.mean_ranks,
                    "friedman_chi2": self.friedman[m][0],
                    "friedman_p": self.friedman[m][1],
                    "significant_pairs": self.significant[m],
                    "errors": {d: row for d, row in zip(t.datasets, t.errors)},
                } for m, t in self.tables.items()
            },
        }


def batch_compare(configs: list[ExperimentConfig], methods=None, alpha: float = 0.05, out_dir=None) -> CompareResult:
    """Run every config, rank the methods per metric and apply the Friedman/Nemenyi tests.

    A dataset on which any method failed (or produced an undefined metric) is
    dropped from that metric's table with a warning.
    """
    reports = [run_experiment(c, write=out_dir is not None) for c in configs]
    methods = list(methods or configs[0].methods)
    if len(reports) < 2 or len(methods) < 2:
        raise ValueError("need at least two datasets and two methods")
    tables, fried, sig = {}, {}, {}
    excluded = set()
    for metric in METRICS:
        rows, names = [], []
        for rep in reports:
            vals = []
            for m in methods:
                r = rep.methods.get(m)
                v = getattr(r.test_error, metric) if r is not None and r.ok else np.nan
                vals.append(v)
            if np.all(np.isfinite(vals)):
                rows.append(vals)
                names.append(rep.name)
            else:
                log.warning("dataset %s excluded from the %s table", rep.name, metric)
                excluded.add(rep.name)
        if len(rows) < 2:
            raise ValueError(f"fewer than two complete datasets for {metric}")
        t = rank_table(np.array(rows), methods, names)
        tables[metric] = t
        fried[metric] = friedman_statistic(t)
    D = min(t.D for t in tables.values())
    cd = nemenyi_cd(len(methods), D, alpha) if 2 <= len(methods) <= 20 else None
    for metric, t in tables.items():
        sig[metric] = sorted(significance_pairs(t, cd)) if cd is not None else []
    result = CompareResult(reports, tables, fried, cd, sig, sorted(excluded))
    if out_dir is not None:
        out = Path(out_dir)
        _write_json(out / "compare_report.json", result.to_dict())
        for metric, t in tables.items():
            if cd is not None:
                write_cd_csv(t, cd, out / f"cd_{metric}.csv")
            with open(out / f"errors_{metric}.csv", "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["dataset", *t.methods])
                for d, row in zip(t.datasets, t.errors):
                    w.writerow([d, *(repr(float(v)) for v in row)])
    return result
