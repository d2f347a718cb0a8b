"""A small heterogeneous regressor pool with grid search and k-fold CV.

Six native families stand in for a full library model pool: OLS, ridge,
polynomial OLS, k-nearest neighbours, a CART regression tree and gradient
boosted stumps. Everything is deterministic given its inputs and a seed.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import PredictionMatrix

FAMILIES = ("OLS", "Ridge", "Polynomial", "KNN", "RegressionTree", "BoostedStumps")
JITTER = 1e-10


# -- linear models ----------------------------------------------------------

def _design(X, fit_intercept=True):
    return np.hstack([np.ones((X.shape[0], 1)), X]) if fit_intercept else X


def _solve_normal(A, b, ridge=0.0, penalize=None):
    """Solve (A^T A + ridge*P) beta = A^T b, adding jitter if singular."""
    AtA = A.T @ A
    P = np.eye(A.shape[1]) if penalize is None else np.diag(penalize)
    M = AtA + ridge * P
    try:
        if np.linalg.cond(M) > 1e12:
            raise np.linalg.LinAlgError
        return np.linalg.solve(M, A.T @ b)
    except np.linalg.LinAlgError:
        jitter = JITTER * max(1.0, float(np.trace(AtA)))
        return np.linalg.solve(M + jitter * np.eye(A.shape[1]), A.T @ b)


def _fit_ols(X, y, fit_intercept=True):
    A = _design(X, fit_intercept)
    beta, *_ = np.linalg.lstsq(A, y, rcond=None)
    return lambda Z: _design(Z, fit_intercept) @ beta


def _fit_ridge(X, y, alpha=1.0):
    A = _design(X, True)
    pen = np.ones(A.shape[1])
    pen[0] = 0.0  # intercept is not shrunk
    beta = _solve_normal(A, y, alpha, pen)
    return lambda Z: _design(Z, True) @ beta


def polynomial_features(X, degree=2, interaction_only=False):
    cols = [X[:, j] for j in range(X.shape[1])]
    out = []
    for d in range(1, degree + 1):
        combos = (itertools.combinations if interaction_only else itertools.combinations_with_replacement)(
            range(X.shape[1]), d)
        for c in combos:
            out.append(np.prod([cols[j] for j in c], axis=0))
    return np.column_stack(out)


def _fit_polynomial(X, y, degree=2, interaction_only=False):
    mu, sd = X.mean(axis=0), X.std(axis=0)
    sd[sd == 0] = 1.0
    feats = lambda Z: polynomial_features((Z - mu) / sd, degree, interaction_only)  # noqa: E731
    A = _design(feats(X), True)
    beta = _solve_normal(A, y)
    return lambda Z: _design(feats(Z), True) @ beta


# -- nearest neighbours -----------------------------------------------------

def _fit_knn(X, y, k=5):
    mu, sd = X.mean(axis=0), X.std(axis=0)
    sd[sd == 0] = 1.0
    T = (X - mu) / sd
    k = min(int(k), len(y))

    def predict(Z):
        Q = (Z - mu) / sd
        out = np.empty(Q.shape[0])
        for start in range(0, Q.shape[0], 512):
            q = Q[start:start + 512]
            d2 = (q**2).sum(1)[:, None] - 2 * q @ T.T + (T**2).sum(1)[None, :]
            # stable sort: equal distances resolve to the lowest training index
            idx = np.argsort(d2, axis=1, kind="stable")[:, :k]
            out[start:start + 512] = y[idx].mean(axis=1)
        return out

    return predict


# -- trees ------------------------------------------------------------------

def _best_split(X, y, min_samples_leaf):
    """Best (feature, threshold, gain) by SSE reduction, or None."""
    n, d = X.shape
    order = np.argsort(X, axis=0, kind="stable")
    xs = np.take_along_axis(X, order, axis=0)
    ys = y[order]
    csum = np.cumsum(ys, axis=0)
    total = csum[-1]
    n_left = np.arange(1, n)[:, None]
    left = csum[:-1]
    right = total - left
    score = left**2 / n_left + right**2 / (n - n_left)
    valid = xs[1:] > xs[:-1]
    if min_samples_leaf > 1:
        ok = (n_left >= min_samples_leaf) & (n - n_left >= min_samples_leaf)
        valid &= ok
    if not valid.any():
        return None
    score = np.where(valid, score, -np.inf)
    flat = int(np.argmax(score))
    i, j = divmod(flat, d)
    gain = score[i, j] - total[j] ** 2 / n
    if gain <= 1e-12 * max(1.0, float(y @ y)):
        return None
    thr = 0.5 * (xs[i, j] + xs[i + 1, j])
    return j, thr, gain


@dataclass
class RegressionTree:
    """CART regression tree grown by greedy SSE reduction."""

    max_depth: int | None = 4
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    nodes: list = field(default_factory=list, repr=False)

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        self.nodes = []
        self._grow(X, y, 0, float(y.mean()))
        return self

    def _grow(self, X, y, depth, parent_value):
        idx = len(self.nodes)
        value = float(y.mean()) if len(y) else parent_value
        self.nodes.append([value, -1, 0.0, -1, -1])  # value, feature, threshold, left, right
        if (len(y) < max(2, self.min_samples_split)
                or (self.max_depth is not None and depth >= self.max_depth)):
            return idx
        split = _best_split(X, y, self.min_samples_leaf)
        if split is None:
            return idx
        j, thr, _ = split
        mask = X[:, j] <= thr
        left = self._grow(X[mask], y[mask], depth + 1, value)
        right = self._grow(X[~mask], y[~mask], depth + 1, value)
        self.nodes[idx][1:] = [j, thr, left, right]
        return idx

    def predict(self, X):
        X = np.asarray(X, dtype=float)
        out = np.empty(X.shape[0])
        node_of = np.zeros(X.shape[0], dtype=int)
        active = np.arange(X.shape[0])
        while active.size:
            nodes = node_of[active]
            feats = np.array([self.nodes[k][1] for k in nodes])
            leaf = feats < 0
            done = active[leaf]
            out[done] = [self.nodes[k][0] for k in node_of[done]]
            active = active[~leaf]
            nodes = nodes[~leaf]
            if not active.size:
                break
            thr = np.array([self.nodes[k][2] for k in nodes])
            f = feats[~leaf]
            go_left = X[active, f] <= thr
            node_of[active] = np.where(go_left,
                                       [self.nodes[k][3] for k in nodes],
                                       [self.nodes[k][4] for k in nodes])
        return out

    @property
    def depth(self) -> int:
        def walk(k):
            node = self.nodes[k]
            return 0 if node[1] < 0 else 1 + max(walk(node[3]), walk(node[4]))
        return walk(0) if self.nodes else 0

    def to_dict(self) -> dict:
        keys = ("value", "feature", "threshold", "left", "right")
        return {"max_depth": self.max_depth, "min_samples_split": self.min_samples_split,
                "nodes": [dict(zip(keys, (float(v), int(f), float(t), int(lc), int(rc))))
                          for v, f, t, lc, rc in self.nodes]}


def _fit_tree(X, y, max_depth=4, min_samples_split=2, min_samples_leaf=1):
    tree = RegressionTree(max_depth, min_samples_split, min_samples_leaf).fit(X, y)
    return tree.predict


def _fit_boosted_stumps(X, y, n_estimators=100, learning_rate=0.1):
    """Least-squares gradient boosting with depth-one trees."""
    n, d = X.shape
    order = np.argsort(X, axis=0, kind="stable")
    xs = np.take_along_axis(X, order, axis=0)
    valid = xs[1:] > xs[:-1]
    n_left = np.arange(1, n)[:, None]
    base = float(y.mean())
    resid = y - base
    stumps = []
    for _ in range(int(n_estimators)):
        rs = resid[order]
        csum = np.cumsum(rs, axis=0)
        left = csum[:-1]
        right = csum[-1] - left
        score = np.where(valid, left**2 / n_left + right**2 / (n - n_left), -np.inf)
        if not np.isfinite(score).any():
            break
        i, j = divmod(int(np.argmax(score)), d)
        thr = 0.5 * (xs[i, j] + xs[i + 1, j])
        lv = left[i, j] / (i + 1)
        rv = right[i, j] / (n - i - 1)
        stumps.append((j, thr, learning_rate * lv, learning_rate * rv))
        resid = resid - np.where(X[:, j] <= thr, learning_rate * lv, learning_rate * rv)

    def predict(Z):
        out = np.full(Z.shape[0], base)
        for j, thr, lv, rv in stumps:
            out += np.where(Z[:, j] <= thr, lv, rv)
        return out

    return predict


_FITTERS = {
    "OLS": _fit_ols,
    "Ridge": _fit_ridge,
    "Polynomial": _fit_polynomial,
    "KNN": _fit_knn,
    "RegressionTree": _fit_tree,
    "BoostedStumps": _fit_boosted_stumps,
}


# -- specs and search ---------------------------------------------------------

@dataclass(frozen=True)
class RegressorSpec:
    family: str
    grid: dict
    name: str | None = None

    def __post_init__(self):
        if self.family not in _FITTERS:
            raise ValueError(f"unknown family {self.family!r}; choose from {FAMILIES}")
        for key, values in self.grid.items():
            if not values:
                raise ValueError(f"grid for {key!r} is empty")
            for v in values:
                if isinstance(v, float) and not np.isfinite(v):
                    raise ValueError(f"grid value {v!r} for {key!r} is not finite")

    @property
    def label(self) -> str:
        return self.name or self.family

    def grid_points(self) -> list[dict]:
        keys = list(self.grid)
        return [dict(zip(keys, combo)) for combo in itertools.product(*(self.grid[k] for k in keys))]


def default_specs() -> list[RegressorSpec]:
    return [
        RegressorSpec("OLS", {"fit_intercept": [True, False]}),
        RegressorSpec("Ridge", {"alpha": [0.1, 1.0, 10.0]}),
        RegressorSpec("Polynomial", {"degree": [2, 3], "interaction_only": [False, True]}),
        RegressorSpec("KNN", {"k": [3, 5, 10, 20]}),
        RegressorSpec("RegressionTree", {"max_depth": [2, 4, 6, 8], "min_samples_leaf": [1, 5]}),
        RegressorSpec("BoostedStumps", {"n_estimators": [50, 100, 200], "learning_rate": [0.1, 0.5]}),
    ]


def load_specs(path) -> list[RegressorSpec]:
    """Read specs from JSON or TOML: a list of ``{family, grid, name?}`` tables under ``models``."""
    path = Path(path)
    if path.suffix == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # python < 3.11
            import tomli as tomllib
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    else:
        data = json.loads(path.read_text(encoding="utf-8"))
    models = data["models"] if isinstance(data, dict) else data
    return [RegressorSpec(d["family"], dict(d["grid"]), d.get("name")) for d in models]


def fit_predict(spec: RegressorSpec | str, params: dict, X_train, y_train, X_eval) -> np.ndarray:
    family = spec.family if isinstance(spec, RegressorSpec) else spec
    X_train = np.asarray(X_train, dtype=float)
    X_eval = np.asarray(X_eval, dtype=float)
    model = _FITTERS[family](X_train, np.asarray(y_train, dtype=float), **params)
    return model(X_eval)


@dataclass
class CvResult:
    best_params: dict
    mean_validation_error: float
    per_fold_errors: np.ndarray
    all_scores: list = field(default_factory=list, repr=False)


def kfold_indices(n: int, k: int, seed: int = 0) -> list[np.ndarray]:
    perm = np.random.default_rng(seed).permutation(n)
    return np.array_split(perm, k)


def grid_search_cv(spec: RegressorSpec, X, y, k: int = 5, seed: int = 0) -> CvResult:
    """Pick the grid point with the lowest mean fold RMSE (first one wins ties)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(y) < k:
        raise ValueError(f"need at least k={k} rows, got {len(y)}")
    folds = kfold_indices(len(y), k, seed)
    best = None
    scores = []
    for params in spec.grid_points():
        fold_err = np.empty(k)
        for f, hold in enumerate(folds):
            train = np.setdiff1d(np.arange(len(y)), hold)
            pred = fit_predict(spec, params, X[train], y[train], X[hold])
            fold_err[f] = np.sqrt(np.mean((pred - y[hold]) ** 2))
        mean_err = float(fold_err.mean())
        scores.append((params, mean_err))
        if best is None or mean_err < best.mean_validation_error:
            best = CvResult(params, mean_err, fold_err)
    best.all_scores = scores
    return best


def build_prediction_matrix(specs, X_train, y_train, X_val, y_val, X_test, y_test, k=5, seed=0):
    """CV-tune each spec on the training split, then predict validation and test rows with the refit model.

    Returns ``(val_matrix, test_matrix, cv_results)``; columns follow spec order.
    Test targets are only attached to the output matrix, never passed to a fitter.
    """
    names, val_cols, test_cols, cv = [], [], [], {}
    for spec in specs:
        res = grid_search_cv(spec, X_train, y_train, k=k, seed=seed)
        val_cols.append(fit_predict(spec, res.best_params, X_train, y_train, X_val))
        test_cols.append(fit_predict(spec, res.best_params, X_train, y_train, X_test))
        label = spec.label
        while label in names:
            label += "_"
        names.append(label)
        cv[label] = res
    val = PredictionMatrix(np.column_stack(val_cols), y_val, names)
    test = PredictionMatrix(np.column_stack(test_cols), y_test, names)
    return val, test, cv


# -- data ---------------------------------------------------------------------

SYNTH_KINDS = ("linear", "piecewise", "friedman1", "sinusoidal")
_LINEAR_COEF = np.array([1.0, -2.0, 3.0, -0.5, 1.5])
_OFFSET = {"linear": 10.0, "piecewise": 5.0, "friedman1": 5.0, "sinusoidal": 5.0}


def synth_dataset(kind: str, n: int, noise_sd: float = 0.5, seed: int = 0, n_features: int = 5):
    """Reproducible regression data; features are uniform on [0, 1].

    Targets are shifted away from zero so MAPE stays meaningful. Columns
    beyond those the generator uses are pure noise features.
    """
    if kind not in SYNTH_KINDS:
        raise ValueError(f"unknown kind {kind!r}; choose from {SYNTH_KINDS}")
    if n < 20:
        raise ValueError("n must be at least 20")
    n_features = max(n_features, 5)
    rng = np.random.default_rng(seed)
    X = rng.uniform(0.0, 1.0, size=(n, n_features))
    if kind == "linear":
        f = X[:, :5] @ _LINEAR_COEF
    elif kind == "piecewise":
        f = 3.0 * (X[:, 0] > 0.5) - 2.0 * (X[:, 1] > 0.3) + X[:, 2]
    elif kind == "friedman1":
        f = (10 * np.sin(np.pi * X[:, 0] * X[:, 1]) + 20 * (X[:, 2] - 0.5) ** 2
             + 10 * X[:, 3] + 5 * X[:, 4])
    else:
        f = np.sin(2 * np.pi * X[:, 0]) + 0.5 * np.cos(4 * np.pi * X[:, 1]) + 2 * X[:, 2]
    y = f + _OFFSET[kind] + noise_sd * rng.standard_normal(n)
    return X, y


def synth_variance(kind: str, noise_sd: float) -> float:
    """Closed-form variance of the targets produced by :func:`synth_dataset`."""
    from scipy.special import sici

    if kind == "linear":
        v = float(_LINEAR_COEF @ _LINEAR_COEF) / 12
    elif kind == "piecewise":
        v = 9 * 0.25 + 4 * 0.3 * 0.7 + 1 / 12
    elif kind == "friedman1":
        mean_sin = _mean_sin_uv()
        mean_sin2 = 0.5 - sici(2 * np.pi)[0] / (4 * np.pi)
        v = 100 * (mean_sin2 - mean_sin**2) + 400 * (1 / 80 - 1 / 144) + 100 / 12 + 25 / 12
    elif kind == "sinusoidal":
        v = 0.5 + 0.125 + 4 / 12
    else:
        raise ValueError(f"unknown kind {kind!r}")
    return v + noise_sd**2


def _mean_sin_uv() -> float:
    # E[sin(pi U V)] = (1/pi) * integral_0^pi (1 - cos t) / t dt = Cin(pi) / pi
    from scipy.special import sici

    _, ci = sici(np.pi)
    return (np.euler_gamma + np.log(np.pi) - ci) / np.pi


def split_indices(n: int, ratios=(0.5, 0.1), seed: int = 0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Shuffle and cut rows into train / validation / test (remainder)."""
    r_train, r_val = ratios
    if r_train <= 0 or r_val <= 0 or r_train + r_val >= 1:
        raise ValueError("split ratios must be positive and leave room for a test split")
    perm = np.random.default_rng(seed).permutation(n)
    n_train = int(round(r_train * n))
    n_val = max(1, int(round(r_val * n)))
    return perm[:n_train], perm[n_train:n_train + n_val], perm[n_train + n_val:]


def load_dataset_csv(path, target: str = "target", ordinal: dict | None = None):
    """Read a dataset CSV, drop incomplete rows, encode categoricals.

    Nominal (non-numeric) columns are one-hot encoded; columns listed in
    ``ordinal`` (name -> ordered list of levels) become integer codes.
    Returns ``(X, y, feature_names)``.
    """
    import pandas as pd

    df = pd.read_csv(path, float_precision="round_trip").dropna(axis=0, how="any")
    if target not in df.columns:
        raise ValueError(f"{path}: missing target column {target!r}")
    y = df.pop(target).to_numpy(dtype=float)
    for col, levels in (ordinal or {}).items():
        df[col] = df[col].map({lvl: i for i, lvl in enumerate(levels)}).astype(float)
    nominal = [c for c in df.columns if not pd.api.types.is_numeric_dtype(df[c])]
    df = pd.get_dummies(df, columns=nominal, dtype=float)
    return df.to_numpy(dtype=float), y, list(df.columns)


def write_dataset_csv(X, y, path, feature_names=None) -> None:
    import csv

    names = feature_names or [f"x{j}" for j in range(X.shape[1])]
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*names, "target"])
        for row, t in zip(X, y):
            w.writerow([*(repr(float(v)) for v in row), repr(float(t))])
