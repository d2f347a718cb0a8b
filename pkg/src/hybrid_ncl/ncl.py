"""Negative-correlation-penalized ensemble weighting and the automatic lambda search.

The objective over weights ``w`` on the simplex is::

    Phi(w) = sum_j w_j * (mse_j - lam * mean_i (f_ij - f_h,i)**2) + sum_j alpha_j * w_j**2

with ``f_h = F @ w``.  ``alpha = 0`` gives the unregularized form.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .core import (
    ContractError,
    ErrorTriple,
    PredictionMatrix,
    combine,
    combined_error,
    error_triple,
)
from .solver import NumericalFailure, SolverOptions, SolverProblem, SolverResult, solve

log = logging.getLogger(__name__)

SUPPORT_EPSILON = 1e-4
REGULARIZED_ALPHA = 0.05


@dataclass(frozen=True)
class SearchConfig:
    initial_lambda: float = 0.1
    initial_step: float = 0.1
    step_floor: float = 0.001
    span: int = 10  # candidates lambda* +/- i*s for i = 0..span


@dataclass(frozen=True)
class NclConfig:
    lam: float = 0.0
    alpha: float | tuple[float, ...] = 0.0
    search: SearchConfig = field(default_factory=SearchConfig)
    solver: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must be in [0, 1], got {self.lam}")
        if np.any(np.asarray(self.alpha) < 0):
            raise ValueError("alpha must be nonnegative")
        if self.search.step_floor <= 0:
            raise ValueError("step_floor must be positive")

    def alpha_vector(self, m: int) -> np.ndarray:
        a = np.asarray(self.alpha, dtype=float)
        if a.ndim == 0:
            return np.full(m, float(a))
        if a.shape != (m,):
            raise ContractError(f"alpha has {a.size} entries for {m} sub-models")
        return a.copy()

    @classmethod
    def regularized(cls, **kw) -> "NclConfig":
        return cls(alpha=REGULARIZED_ALPHA, **kw)


@dataclass
class NclFit:
    weights: np.ndarray
    lambda_star: float
    validation_error: float
    support: list[int]
    converged: bool
    solver_diagnostics: dict
    model_names: tuple[str, ...] = ()
    evaluated: dict = field(default_factory=dict)  # lambda -> validation combined error
    failed: list = field(default_factory=list)
    n_solves: int = 1

    def to_dict(self) -> dict:
        return {
            "weights": [float(x) for x in self.weights],
            "lambda_star": float(self.lambda_star),
            "validation_error": float(self.validation_error),
            "support": [int(j) for j in self.support],
            "converged": bool(self.converged),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _alpha(alpha, m):
    a = np.asarray(alpha, dtype=float)
    return np.full(m, float(a)) if a.ndim == 0 else a


def ncl_objective(preds: PredictionMatrix, w, lam: float, alpha=0.0) -> float:
    """Evaluate the penalized objective term by term, as written."""
    w = np.asarray(w, dtype=float).ravel()
    F = preds.values
    f_h = F @ w
    zeta = np.mean((F - preds.y_true[:, None]) ** 2, axis=0)
    spread = np.mean((F - f_h[:, None]) ** 2, axis=0)
    return float(w @ (zeta - lam * spread) + _alpha(alpha, preds.m) @ w**2)


def ncl_gradient(preds: PredictionMatrix, w, lam: float, alpha=0.0) -> np.ndarray:
    """Gradient of :func:`ncl_objective` in the full weight space.

    ``f_h`` depends on ``w``, so off the simplex the penalty contributes a
    chain term ``-(2/n)(1 - sum(w)) F^T f_h`` on top of the per-model spread.
    """
    w = np.asarray(w, dtype=float).ravel()
    F = preds.values
    n = preds.n
    f_h = F @ w
    zeta = np.mean((F - preds.y_true[:, None]) ** 2, axis=0)
    spread = np.mean((F - f_h[:, None]) ** 2, axis=0)
    chain = -(2.0 / n) * (1.0 - w.sum()) * (F.T @ f_h)
    return zeta - lam * (spread + chain) + 2.0 * _alpha(alpha, preds.m) * w


class _GramObjective:
    """The objective rewritten with m x m sufficient statistics.

    With ``q_j = mean f_j**2`` and ``G = F^T F / n`` the penalty is
    ``sum_j w_j q_j + (sum(w) - 2) w^T G w``, so every evaluation costs
    O(m^2) instead of O(nm).  Values are divided by ``scale`` so the barrier
    parameter sees an O(1) objective.
    """

    def __init__(self, preds: PredictionMatrix, lam: float, alpha: np.ndarray):
        F = preds.values
        n = preds.n
        self.zeta = preds.member_mse()
        self.q = np.mean(F**2, axis=0)
        self.G = F.T @ F / n
        self.lam = lam
        self.alpha = alpha
        mean_zeta = float(np.mean(self.zeta))
        self.scale = mean_zeta if mean_zeta > 0 else 1.0

    def raw(self, w):
        s = w.sum()
        Gw = self.G @ w
        penalty = w @ self.q + (s - 2.0) * (w @ Gw)
        return float(w @ self.zeta - self.lam * penalty + self.alpha @ w**2)

    def objective(self, w):
        return self.raw(w) / self.scale

    def gradient(self, w):
        s = w.sum()
        Gw = self.G @ w
        d_pen = self.q + (w @ Gw) + 2.0 * (s - 2.0) * Gw
        return (self.zeta - self.lam * d_pen + 2.0 * self.alpha * w) / self.scale

    def hessian(self, w):
        s = w.sum()
        Gw2 = 2.0 * (self.G @ w)
        ones = np.ones_like(w)
        h_pen = np.outer(ones, Gw2) + np.outer(Gw2, ones) + 2.0 * (s - 2.0) * self.G
        return (-self.lam * h_pen + 2.0 * np.diag(self.alpha)) / self.scale


def ncl_problem(preds: PredictionMatrix, lam: float, alpha=0.0) -> tuple[SolverProblem, _GramObjective]:
    obj = _GramObjective(preds, lam, _alpha(alpha, preds.m))
    return SolverProblem(preds.m, obj.objective, obj.gradient, obj.hessian), obj


def _support(w: np.ndarray) -> list[int]:
    return [int(j) for j in np.flatnonzero(w > SUPPORT_EPSILON)]


def fit_weights(preds_val: PredictionMatrix, config: NclConfig | None = None, start=None) -> NclFit:
    """Minimize the penalized objective at the fixed ``config.lam``."""
    config = config or NclConfig()
    alpha = config.alpha_vector(preds_val.m)
    problem, obj = ncl_problem(preds_val, config.lam, alpha)
    result: SolverResult = solve(problem, config.solver, start=start)
    w = result.w
    diag = result.summary()
    diag["objective_value"] = obj.raw(w)
    if not result.converged:
        log.warning("solver did not converge at lambda=%s (kkt residual %.3g)", config.lam, result.kkt_residual)
    err = combined_error(error_triple(combine(preds_val, w), preds_val.y_true))
    return NclFit(
        weights=w,
        lambda_star=config.lam,
        validation_error=err,
        support=_support(w),
        converged=result.converged,
        solver_diagnostics=diag,
        model_names=preds_val.model_names,
    )


def _candidates(center: float, step: float, span: int) -> list[float]:
    out = set()
    for i in range(1, span + 1):
        for c in (center + i * step, center - i * step):
            c = round(c, 6)
            if 0.0 <= c <= 1.0:
                out.add(c)
    out.discard(round(center, 6))
    return sorted(out)


def search_lambda(preds_val: PredictionMatrix, config: NclConfig | None = None,
                  preds_select: PredictionMatrix | None = None) -> NclFit:
    """Coarse-to-fine search for the penalty strength.

    Starting from ``lambda* = 0.1`` and step ``s = 0.1``, each round fits the
    weights at every ``lambda* +/- i*s`` (``i = 1..10``, clipped to [0, 1],
    the centre itself excluded), keeps the candidate with the lowest combined
    validation error (RMSE + MAE + MAPE) / 3, then divides ``s`` by 10. The
    search ends once ``s`` drops below ``step_floor``. Equal errors keep the
    smaller lambda; fits are memoized by lambda so repeated candidates across
    rounds cost nothing.

    ``preds_select``, when given, scores candidates on a separate holdout
    instead of the matrix the weights were fitted on.
    """
    config = config or NclConfig()
    scorer = preds_select if preds_select is not None else preds_val
    if scorer.model_names != preds_val.model_names:
        raise ContractError("selection matrix columns do not match the fitting matrix")
    sc = config.search
    fits: dict[float, NclFit] = {}
    errors: dict[float, float] = {}
    failed: list[float] = []

    best_lam = sc.initial_lambda
    best_err = np.inf
    best_fit: NclFit | None = None
    step = sc.initial_step
    while step >= sc.step_floor * (1 - 1e-9):
        for lam in _candidates(best_lam, step, sc.span):
            if lam in failed:
                continue
            if lam not in fits:
                try:
                    fits[lam] = fit_weights(preds_val, NclConfig(lam, config.alpha, sc, config.solver))
                except NumericalFailure as exc:
                    log.warning("lambda=%s skipped: %s", lam, exc)
                    failed.append(lam)
                    continue
                w = fits[lam].weights
                errors[lam] = combined_error(error_triple(combine(scorer, w), scorer.y_true))
            err = errors[lam]
            if err < best_err or (err == best_err and lam < best_lam):
                best_err, best_lam, best_fit = err, lam, fits[lam]
        step /= 10.0

    if best_fit is None:
        raise NumericalFailure("every lambda candidate failed")
    return NclFit(
        weights=best_fit.weights,
        lambda_star=round(best_lam, 3),
        validation_error=best_err,
        support=best_fit.support,
        converged=best_fit.converged,
        solver_diagnostics=best_fit.solver_diagnostics,
        model_names=preds_val.model_names,
        evaluated=dict(sorted(errors.items())),
        failed=failed,
        n_solves=len(fits) + len(failed),
    )


def predict(fit: NclFit, preds_test: PredictionMatrix) -> tuple[np.ndarray, ErrorTriple]:
    if fit.model_names and tuple(fit.model_names) != preds_test.model_names:
        raise ContractError("test matrix columns do not match the fitted sub-models")
    if len(fit.weights) != preds_test.m:
        raise ContractError("weight vector length does not match the test matrix")
    pred = combine(preds_test, fit.weights)
    return pred, error_triple(pred, preds_test.y_true)
