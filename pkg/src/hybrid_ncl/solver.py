"""Log-barrier interior-point minimization over the probability simplex.

Solves ``min F(w) s.t. sum(w) = 1, w >= 0`` by driving the barrier weight
``mu`` of ``phi_mu(w) = F(w) - mu * sum(log w)`` towards zero. Each barrier
subproblem is solved with equality-constrained Newton steps (an (m+1)x(m+1)
KKT system with one multiplier), Armijo backtracking and a
fraction-to-the-boundary rule that keeps every iterate strictly positive.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

FRACTION_TO_BOUNDARY = 0.995


class NumericalFailure(RuntimeError):
    """Objective or gradient became non-finite at an interior point."""


@dataclass
class SolverProblem:
    dim: int
    objective: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian: Callable[[np.ndarray], np.ndarray] | None = None


@dataclass(frozen=True)
class SolverOptions:
    mu_initial: float = 0.1
    mu_shrink: float = 0.1
    kkt_tolerance: float = 1e-8
    max_outer_iterations: int = 30
    max_inner_iterations: int = 200
    armijo_c: float = 1e-4

    def __post_init__(self):
        if not (self.mu_initial > 0 and 0 < self.mu_shrink < 1 and self.kkt_tolerance > 0):
            raise ValueError("mu_initial, kkt_tolerance must be > 0 and mu_shrink in (0, 1)")
        if self.max_outer_iterations < 1 or self.max_inner_iterations < 1 or not 0 < self.armijo_c < 1:
            raise ValueError("iteration caps must be positive and armijo_c in (0, 1)")


@dataclass
class SolverResult:
    w: np.ndarray
    objective_value: float
    converged: bool
    outer_iterations: int
    kkt_residual: float
    inner_iterations: int = 0
    min_iterate_entry: float = 1.0  # smallest coordinate seen across all iterates
    history: list = field(default_factory=list, repr=False)

    def summary(self) -> dict:
        return {
            "objective_value": self.objective_value,
            "converged": self.converged,
            "outer_iterations": self.outer_iterations,
            "inner_iterations": self.inner_iterations,
            "kkt_residual": self.kkt_residual,
        }


def _finite_difference_hessian(gradient, w: np.ndarray) -> np.ndarray:
    m = w.shape[0]
    H = np.empty((m, m))
    for j in range(m):
        h = 1e-6 * max(1.0, abs(w[j]))
        e = np.zeros(m)
        e[j] = h
        H[:, j] = (gradient(w + e) - gradient(w - e)) / (2 * h)
    return 0.5 * (H + H.T)


def _stationarity(g: np.ndarray) -> float:
    # best multiplier for the sup norm is the midrange of the gradient
    return 0.5 * float(g.max() - g.min())


class _Barrier:
    def __init__(self, problem: SolverProblem):
        self.problem = problem
        self.n_evals = 0

    def f(self, w):
        val = float(self.problem.objective(w))
        if not np.isfinite(val):
            raise NumericalFailure(f"objective is {val} at interior point {w}")
        return val

    def grad(self, w):
        g = np.asarray(self.problem.gradient(w), dtype=float)
        if g.shape != w.shape or not np.all(np.isfinite(g)):
            raise NumericalFailure(f"gradient is invalid at interior point {w}")
        return g

    def hess(self, w):
        if self.problem.hessian is not None:
            H = np.asarray(self.problem.hessian(w), dtype=float)
        else:
            H = _finite_difference_hessian(self.grad, w)
        if not np.all(np.isfinite(H)):
            raise NumericalFailure(f"hessian is non-finite at interior point {w}")
        return H


def _newton_direction(H: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Solve the KKT system [[H, 1], [1^T, 0]] [d; nu] = [-g; 0].

    If the reduced Hessian is not positive definite the direction is not a
    descent direction; a growing multiple of the identity is then added.
    """
    m = g.shape[0]
    K = np.zeros((m + 1, m + 1))
    K[:m, m] = 1.0
    K[m, :m] = 1.0
    # a constant shift of g only moves the multiplier; centring it keeps the
    # rounding error of the solve proportional to the tangential residual
    rhs = np.concatenate([-(g - g.mean()), [0.0]])
    shift = 0.0
    scale = max(1.0, float(np.abs(np.diag(H)).max()))
    for _ in range(60):
        K[:m, :m] = H + shift * np.eye(m)
        try:
            d = np.linalg.solve(K, rhs)[:m]
        except np.linalg.LinAlgError:
            d = None
        if d is not None and np.all(np.isfinite(d)):
            d -= d.mean()  # remove roundoff drift off the tangent space
            curvature = float(d @ (H @ d))
            if float(g @ d) < 0 and curvature > 0 or not np.any(d):
                return d
        shift = 1e-8 * scale if shift == 0.0 else shift * 10
    # steepest descent on the tangent space as a last resort
    return -(g - g.mean())


def solve(problem: SolverProblem, options: SolverOptions | None = None, start=None) -> SolverResult:
    """Minimize ``problem.objective`` over the probability simplex.

    Parameters
    ----------
    problem : SolverProblem
        Objective and gradient callbacks, optionally a Hessian callback. Without
        one, the Hessian is formed by central differences of the gradient.
    options : SolverOptions, optional
    start : array_like, optional
        Strictly positive starting point; defaults to the barycenter.

    Returns
    -------
    SolverResult
        ``converged`` is true iff the final KKT residual (max of tangential
        stationarity and complementarity ``mu``) is within ``kkt_tolerance``.
        Otherwise the last iterate is returned.
    """
    options = options or SolverOptions()
    m = int(problem.dim)
    if m < 1:
        raise ValueError("dim must be >= 1")
    if m == 1:
        w = np.ones(1)
        return SolverResult(w, float(problem.objective(w)), True, 0, 0.0)

    if start is None:
        w = np.full(m, 1.0 / m)
    else:
        w = np.asarray(start, dtype=float).ravel().copy()
        if w.shape[0] != m or np.any(w <= 0):
            raise ValueError("start must have dim entries, all strictly positive")
        w /= w.sum()

    B = _Barrier(problem)
    mu = options.mu_initial
    min_entry = float(w.min())
    inner_total = 0
    residual = np.inf
    converged = False
    outer = 0
    history = []

    z = mu / w  # dual estimates for w >= 0, carried across barrier updates
    for outer in range(1, options.max_outer_iterations + 1):
        fw = B.f(w)
        phi = fw - mu * np.sum(np.log(w))
        inner_tol = 0.1 * max(mu, options.kkt_tolerance)
        for _ in range(options.max_inner_iterations):
            gF = B.grad(w)
            g = gF - mu / w
            if _stationarity(g) <= inner_tol:
                break
            # condensed primal-dual Newton matrix: z / w replaces mu / w**2
            H = B.hess(w) + np.diag(z / w)
            d = _newton_direction(H, g)
            slope = float(g @ d)
            if slope >= 0:
                break
            neg = d < 0
            step = 1.0
            if neg.any():
                step = min(1.0, FRACTION_TO_BOUNDARY * float(np.min(-w[neg] / d[neg])))
            # below this the predicted decrease is lost in the rounding of phi;
            # take the (boundary-safe) Newton step without a decrease test
            resolvable = -slope > 1e-13 * (1.0 + abs(phi))
            accepted = False
            while step > 1e-12:
                trial = w + step * d
                if np.all(trial > 0):
                    f_trial = B.f(trial)
                    phi_trial = f_trial - mu * np.sum(np.log(trial))
                    if not resolvable or phi_trial <= phi + options.armijo_c * step * slope:
                        accepted = True
                        break
                step *= 0.5
            inner_total += 1
            if not accepted:
                break  # no further decrease representable at this mu
            dz = mu / w - z - (z / w) * d
            zneg = dz < 0
            z_step = 1.0
            if zneg.any():
                z_step = min(1.0, FRACTION_TO_BOUNDARY * float(np.min(-z[zneg] / dz[zneg])))
            z = z + z_step * dz
            w = trial / trial.sum()
            fw, phi = f_trial, phi_trial
            min_entry = min(min_entry, float(w.min()))
        gF = B.grad(w)
        residual = max(_stationarity(gF - mu / w), mu)
        history.append((mu, fw, residual))
        if residual <= options.kkt_tolerance:
            converged = True
            break
        mu *= options.mu_shrink

    return SolverResult(
        w=w,
        objective_value=B.f(w),
        converged=converged,
        outer_iterations=outer,
        kkt_residual=residual,
        inner_iterations=inner_total,
        min_iterate_entry=min_entry,
        history=history,
    )


def check_gradient(problem: SolverProblem, at, step: float = 1e-6) -> float:
    """Max relative deviation between the analytic gradient and central differences.

    Directions are the simplex-tangent vectors ``e_j - e_k`` (all pairs), so
    only the part of the gradient that the solver actually uses is checked.
    """
    w = np.asarray(at, dtype=float).ravel()
    m = w.shape[0]
    g = np.asarray(problem.gradient(w), dtype=float)
    if m == 1:
        return 0.0
    worst = 0.0
    for j in range(m):
        for k in range(j + 1, m):
            d = np.zeros(m)
            d[j], d[k] = 1.0, -1.0
            fd = (problem.objective(w + step * d) - problem.objective(w - step * d)) / (2 * step)
            analytic = float(g @ d)
            dev = abs(analytic - fd) / max(1.0, abs(analytic), abs(fd))
            worst = max(worst, dev)
    return worst
