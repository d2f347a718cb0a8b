"""Prediction matrices plus the error metrics and decompositions computed from them."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

SIMPLEX_ATOL = 1e-9
MAPE_ZERO_TOL = 1e-12


class ContractError(ValueError):
    """Raised when inputs violate a shape or domain contract."""


@dataclass(frozen=True)
class PredictionMatrix:
    """Sub-model predictions (rows = samples, columns = models) plus ground truth."""

    values: np.ndarray
    y_true: np.ndarray
    model_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        y = np.array(self.y_true, dtype=float).ravel()
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ContractError(f"values must be a non-empty n x m matrix, got shape {values.shape}")
        if y.shape[0] != values.shape[0]:
            raise ContractError(f"y_true has {y.shape[0]} rows, values has {values.shape[0]}")
        if not (np.all(np.isfinite(values)) and np.all(np.isfinite(y))):
            raise ContractError("values and y_true must be finite")
        names = tuple(self.model_names) or tuple(f"m{j}" for j in range(values.shape[1]))
        if len(names) != values.shape[1]:
            raise ContractError(f"{len(names)} model names for {values.shape[1]} columns")
        if len(set(names)) != len(names):
            raise ContractError("model names must be unique")
        values.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "y_true", y)
        object.__setattr__(self, "model_names", names)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]

    def member_mse(self) -> np.ndarray:
        """Per-column mean squared error against ``y_true``."""
        return np.mean((self.values - self.y_true[:, None]) ** 2, axis=0)

    def take_rows(self, rows) -> "PredictionMatrix":
        return PredictionMatrix(self.values[rows], self.y_true[rows], self.model_names)

    def take_columns(self, cols) -> "PredictionMatrix":
        cols = list(cols)
        return PredictionMatrix(self.values[:, cols], self.y_true, [self.model_names[c] for c in cols])


def check_simplex(w, m: int | None = None, atol: float = SIMPLEX_ATOL) -> np.ndarray:
    """Return ``w`` as a float array after checking it lies on the probability simplex."""
    w = np.asarray(w, dtype=float).ravel()
    if m is not None and w.shape[0] != m:
        raise ContractError(f"weight vector has {w.shape[0]} entries, expected {m}")
    if not np.all(np.isfinite(w)):
        raise ContractError("weights must be finite")
    if np.any(w < -atol) or np.any(w > 1 + atol):
        raise ContractError("weights must lie in [0, 1]")
    if abs(w.sum() - 1.0) > atol:
        raise ContractError(f"weights sum to {w.sum()!r}, not 1")
    return w


def combine(preds: PredictionMatrix, w) -> np.ndarray:
    """Row-wise weighted sum of the prediction columns."""
    w = np.asarray(w, dtype=float).ravel()
    if w.shape[0] != preds.m:
        raise ContractError(f"weight vector has {w.shape[0]} entries, matrix has {preds.m} columns")
    return preds.values @ w


@dataclass(frozen=True)
class ErrorTriple:
    rmse: float
    mae: float
    mape: float  # raw ratio; nan when every target is zero
    mape_skipped: int = 0

    @property
    def mape_defined(self) -> bool:
        return not math.isnan(self.mape)

    def as_dict(self) -> dict:
        return {
            "rmse": self.rmse,
            "mae": self.mae,
            "mape": None if not self.mape_defined else self.mape,
            "mape_skipped": self.mape_skipped,
        }


def error_triple(pred, y) -> ErrorTriple:
    """RMSE, MAE and MAPE of ``pred`` against ``y``.

    Samples with ``|y| < 1e-12`` are left out of the MAPE average and counted
    in ``mape_skipped``; if no sample remains MAPE is ``nan``.
    """
    pred = np.asarray(pred, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if pred.shape != y.shape or pred.size == 0:
        raise ContractError(f"prediction/target length mismatch: {pred.shape} vs {y.shape}")
    err = pred - y
    rmse = float(np.sqrt(np.mean(err**2)))
    mae = float(np.mean(np.abs(err)))
    keep = np.abs(y) >= MAPE_ZERO_TOL
    skipped = int(np.count_nonzero(~keep))
    mape = float(np.mean(np.abs(err[keep] / y[keep]))) if keep.any() else math.nan
    return ErrorTriple(rmse, mae, mape, skipped)


def combined_error(e: ErrorTriple) -> float:
    """Mean of RMSE, MAE and MAPE; MAPE is dropped when undefined."""
    if e.mape_defined:
        return (e.rmse + e.mae + e.mape) / 3.0
    return (e.rmse + e.mae) / 2.0


@dataclass(frozen=True)
class DecompositionReport:
    """Ambiguity fields or bias/variance/covariance fields, whichever was computed.

    ``bias_term`` is the squared average bias (averaged over samples), so that
    ``reconstructed_mse = bias_term + variance_term / m + (1 - 1/m) * covariance_term``.
    """

    ensemble_mse: float | None = None
    weighted_member_mse: float | None = None
    ambiguity: float | None = None
    bias_term: float | None = None
    variance_term: float | None = None
    covariance_term: float | None = None
    reconstructed_mse: float | None = None

    def as_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if v is not None}


def ambiguity_decomposition(preds: PredictionMatrix, w) -> DecompositionReport:
    w = np.asarray(w, dtype=float).ravel()
    f_h = combine(preds, w)
    weighted_member = float(w @ preds.member_mse())
    spread = np.mean((preds.values - f_h[:, None]) ** 2, axis=0)
    ambiguity = float(w @ spread)
    return DecompositionReport(
        ensemble_mse=weighted_member - ambiguity,
        weighted_member_mse=weighted_member,
        ambiguity=ambiguity,
    )


def _trial_stack(ensembles) -> np.ndarray:
    if isinstance(ensembles, np.ndarray):
        stack = np.asarray(ensembles, dtype=float)
    else:
        stack = np.stack([e.values if isinstance(e, PredictionMatrix) else np.asarray(e, float) for e in ensembles])
    if stack.ndim != 3:
        raise ContractError("trials must form a (trials, n, m) array")
    return stack


def bvc_decomposition(ensembles: Sequence[PredictionMatrix] | np.ndarray, y_hat) -> DecompositionReport:
    """Bias-variance-covariance split of a simple-average ensemble over repeated trials.

    Expectations are plain means over the trial axis (no Bessel correction),
    computed per sample and then averaged over samples.
    """
    stack = _trial_stack(ensembles)
    n_trials, n, m = stack.shape
    if n_trials < 2:
        raise ContractError("need at least two trials")
    if m < 2:
        raise ContractError("covariance is undefined for a single sub-model")
    y_hat = np.asarray(y_hat, dtype=float).ravel()
    if y_hat.shape[0] != n:
        raise ContractError("y_hat length does not match the number of samples")

    mean_f = stack.mean(axis=0)  # (n, m)
    dev = stack - mean_f
    bias = (mean_f - y_hat[:, None]).mean(axis=1)
    cov = np.einsum("tij,tik->ijk", dev, dev) / n_trials  # (n, m, m)
    diag = np.trace(cov, axis1=1, axis2=2)
    variance = diag / m
    covariance = (cov.sum(axis=(1, 2)) - diag) / (m * (m - 1))

    bias_sq = float(np.mean(bias**2))
    v = float(np.mean(variance))
    c = float(np.mean(covariance))
    return DecompositionReport(
        ensemble_mse=float(np.mean((stack.mean(axis=2) - y_hat[None, :]) ** 2)),
        bias_term=bias_sq,
        variance_term=v,
        covariance_term=c,
        reconstructed_mse=bias_sq + v / m + (1 - 1 / m) * c,
    )


def _abs_pearson(a: np.ndarray, b: np.ndarray) -> float:
    a = a - a.mean()
    b = b - b.mean()
    den = math.sqrt(float(a @ a) * float(b @ b))
    if den == 0.0:
        return 0.0
    return min(1.0, abs(float(a @ b)) / den)


def diversity_score(preds: PredictionMatrix) -> float:
    """Median absolute pairwise Pearson correlation of the columns (lower = more diverse)."""
    if preds.m < 2:
        raise ContractError("diversity needs at least two sub-models")
    v = preds.values
    pairs = [_abs_pearson(v[:, j], v[:, k]) for j in range(preds.m) for k in range(j + 1, preds.m)]
    return float(np.median(pairs))


def read_prediction_csv(path) -> PredictionMatrix:
    """Read a ``y_true,<model_1>,...`` CSV into a :class:`PredictionMatrix`."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(x) for x in row] for row in reader if row]
    if not header or header[0] != "y_true":
        raise ContractError(f"{path}: first column must be 'y_true'")
    if not rows:
        raise ContractError(f"{path}: no data rows")
    arr = np.array(rows, dtype=float)
    return PredictionMatrix(arr[:, 1:], arr[:, 0], header[1:])


def write_prediction_csv(preds: PredictionMatrix, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["y_true", *preds.model_names])
        for y, row in zip(preds.y_true, preds.values):
            writer.writerow([repr(float(y)), *(repr(float(x)) for x in row)])
