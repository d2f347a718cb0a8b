"""Comparison weighting schemes: BEM, BEM-NCL, GEM, LR stacking, MDT, EIW and EEW."""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np

from .core import ContractError, PredictionMatrix, error_triple, combined_error
from .zoo import RegressionTree


class WeighterKind(str, enum.Enum):
    BEM = "BEM"
    BEM_NCL = "BEM-NCL"
    GEM = "GEM"
    LR = "LR"
    MDT = "MDT"
    EIW = "EIW"
    EEW = "EEW"


class GemRidgeWarning(RuntimeWarning):
    """The GEM error covariance was singular and had to be regularized."""


def bem(m: int) -> np.ndarray:
    if m < 1:
        raise ContractError("m must be >= 1")
    return np.full(m, 1.0 / m)


def bem_ncl(support, m: int) -> np.ndarray:
    """Uniform weights over the sub-models an NCL fit selected."""
    support = sorted(set(int(j) for j in support))
    if not support:
        raise ContractError("support must be non-empty")
    if support[0] < 0 or support[-1] >= m:
        raise ContractError(f"support indices must lie in [0, {m})")
    w = np.zeros(m)
    w[support] = 1.0 / len(support)
    return w


def gem(preds_val: PredictionMatrix) -> np.ndarray:
    """Generalized ensemble weights from the inverse error covariance.

    ``C = E^T E / n`` with ``E = y - F``; ``w = C^{-1} 1 / (1^T C^{-1} 1)``.
    Weights may be negative and are not clipped. A singular ``C`` gets a
    ridge of ``1e-8 * trace(C) / m`` (with a :class:`GemRidgeWarning`); if that
    still fails, uniform weights are returned.
    """
    m = preds_val.m
    if m == 1:
        return np.ones(1)
    E = preds_val.y_true[:, None] - preds_val.values
    C = E.T @ E / preds_val.n
    ones = np.ones(m)
    if np.linalg.cond(C) < 1e12:
        v = np.linalg.solve(C, ones)
    else:
        delta = 1e-8 * np.trace(C) / m
        warnings.warn(f"singular error covariance; ridge {delta:.3g} added", GemRidgeWarning, stacklevel=2)
        Cr = C + delta * np.eye(m)
        try:
            if not delta > 0 or np.linalg.cond(Cr) > 1e15:
                raise np.linalg.LinAlgError
            v = np.linalg.solve(Cr, ones)
        except np.linalg.LinAlgError:
            warnings.warn("error covariance still singular; falling back to BEM", GemRidgeWarning, stacklevel=2)
            return bem(m)
    total = v.sum()
    if not np.isfinite(total) or total == 0:
        warnings.warn("degenerate GEM normalizer; falling back to BEM", GemRidgeWarning, stacklevel=2)
        return bem(m)
    return v / total


@dataclass(frozen=True)
class LinearStack:
    coef: np.ndarray
    intercept: float

    def predict(self, preds: PredictionMatrix) -> np.ndarray:
        if preds.m != self.coef.shape[0]:
            raise ContractError("column count does not match the stacking coefficients")
        return preds.values @ self.coef + self.intercept

    def to_dict(self) -> dict:
        return {"coef": [float(c) for c in self.coef], "intercept": float(self.intercept)}


def lr_stack(preds_val: PredictionMatrix) -> LinearStack:
    """Least-squares stacking with intercept; coefficients need not sum to one."""
    F = preds_val.values
    A = np.hstack([np.ones((preds_val.n, 1)), F])
    if np.linalg.matrix_rank(A) < A.shape[1]:
        delta = 1e-10 * float(np.sum(A**2))
        beta = np.linalg.solve(A.T @ A + delta * np.eye(A.shape[1]), A.T @ preds_val.y_true)
    else:
        beta, *_ = np.linalg.lstsq(A, preds_val.y_true, rcond=None)
    return LinearStack(beta[1:], float(beta[0]))


def mdt(preds_val: PredictionMatrix, preds_test: PredictionMatrix, max_depth: int | None = 4,
        min_samples_split: int = 2, return_tree: bool = False):
    """Regression tree meta-learner on sub-model predictions; returns test predictions."""
    if preds_val.m != preds_test.m:
        raise ContractError("validation and test matrices have different column counts")
    tree = RegressionTree(max_depth=max_depth, min_samples_split=min_samples_split)
    tree.fit(preds_val.values, preds_val.y_true)
    out = tree.predict(preds_test.values)
    return (out, tree) if return_tree else out


def eiw(errors) -> np.ndarray:
    e = np.asarray(errors, dtype=float).ravel()
    if e.size == 0 or np.any(~np.isfinite(e)) or np.any(e <= 0):
        raise ContractError("EIW needs finite, strictly positive errors")
    inv = 1.0 / e
    return inv / inv.sum()


def eew(errors) -> np.ndarray:
    e = np.asarray(errors, dtype=float).ravel()
    if e.size == 0 or np.any(~np.isfinite(e)):
        raise ContractError("EEW needs finite errors")
    x = np.exp(-(e - e.min()))
    return x / x.sum()


def member_errors(preds: PredictionMatrix, metric: str = "rmse") -> np.ndarray:
    """Per-column validation error used by EIW/EEW: rmse, mae, mape or combined."""
    triples = [error_triple(preds.values[:, j], preds.y_true) for j in range(preds.m)]
    if metric == "combined":
        return np.array([combined_error(t) for t in triples])
    if metric not in ("rmse", "mae", "mape"):
        raise ValueError(f"unknown metric {metric!r}")
    return np.array([getattr(t, metric) for t in triples])
