"""Least squares, residualization and (adaptive) Lasso by coordinate descent.

The Lasso objective is

    (1 / 2n) * ||y - X b - b0||^2 + alpha * ||b||_1

solved by cyclic coordinate descent on the covariance form
``G = X'X / n``, ``c = X'(y - mean(y)) / n``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DegenerateError, NumericError, PreconditionError
from .tabular import NumericMatrix

DEFAULT_TOLERANCE = 1e-7
DEFAULT_MAX_ITER = 10_000
RIDGE_FALLBACK = 1e-6


@dataclass(frozen=True, eq=False)
class LinearFit:
    coefficients: np.ndarray
    intercept: float
    residuals: np.ndarray
    n_iter: int = 0
    converged: bool = True
    objective_trace: tuple = field(default=(), repr=False)


@dataclass(frozen=True)
class LassoConfig:
    alpha: float = 0.0
    max_iterations: int = DEFAULT_MAX_ITER
    tolerance: float = DEFAULT_TOLERANCE
    seed: int = 0

    def __post_init__(self):
        if not self.alpha >= 0:
            raise PreconditionError("alpha must be non-negative")
        if self.max_iterations < 1:
            raise PreconditionError("max_iterations must be >= 1")
        if not self.tolerance > 0:
            raise PreconditionError("tolerance must be positive")


def _as_vector(v, name="vector") -> np.ndarray:
    arr = np.asarray(v, dtype=float).ravel()
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"{name} contains non-finite values")
    return arr


def ols_simple(x, y) -> float:
    """Slope ``cov(x, y) / var(x)`` of the simple regression of y on x."""
    x = _as_vector(x, "x")
    y = _as_vector(y, "y")
    if x.shape != y.shape or x.size < 2:
        raise PreconditionError("x and y need equal lengths >= 2")
    xc = x - x.mean()
    var = xc @ xc
    if var == 0:
        raise DegenerateError("regressor has zero variance")
    return float(xc @ (y - y.mean()) / var)


def residualize(target, regressor) -> np.ndarray:
    """Residual of the simple regression (with intercept) of target on regressor."""
    target = _as_vector(target, "target")
    regressor = _as_vector(regressor, "regressor")
    slope = ols_simple(regressor, target)
    return (target - target.mean()) - slope * (regressor - regressor.mean())


def residualize_many(target, regressors) -> np.ndarray:
    """Residual of the multiple regression (with intercept) of target on columns."""
    target = _as_vector(target, "target")
    R = np.asarray(regressors, dtype=float).reshape(target.size, -1)
    yc = target - target.mean()
    if R.shape[1] == 0:
        return yc
    Rc = R - R.mean(axis=0)
    coef, *_ = np.linalg.lstsq(Rc, yc, rcond=None)
    return yc - Rc @ coef


def ols(X, y, ridge: float = 0.0) -> LinearFit:
    """Multiple least squares with intercept; optional small ridge penalty."""
    X = np.asarray(X, dtype=float)
    y = _as_vector(y, "y")
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] != y.size:
        raise PreconditionError("X and y have different numbers of rows")
    xm, ym = X.mean(axis=0), y.mean()
    Xc, yc = X - xm, y - ym
    if ridge > 0:
        G = Xc.T @ Xc + ridge * X.shape[0] * np.eye(X.shape[1])
        coef = np.linalg.solve(G, Xc.T @ yc)
    else:
        if X.shape[1] and np.linalg.matrix_rank(Xc) < X.shape[1]:
            raise DegenerateError("design matrix is rank deficient")
        coef = np.linalg.lstsq(Xc, yc, rcond=None)[0] if X.shape[1] else np.zeros(0)
    b0 = float(ym - xm @ coef)
    return LinearFit(coef, b0, y - (X @ coef + b0))


def soft_threshold(z, t):
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def _objective(beta, G, c, yvar, alpha):
    return 0.5 * beta @ G @ beta - c @ beta + 0.5 * yvar + alpha * np.abs(beta).sum()


def _coordinate_descent(G, c, yvar, alpha, max_iter, tol, beta0=None, trace=False):
    p = c.size
    beta = np.zeros(p) if beta0 is None else np.array(beta0, dtype=float)
    diag = np.diag(G).copy()
    active = np.flatnonzero(diag > 0).tolist()
    beta[diag <= 0] = 0.0
    # grad_j = c_j - sum_k G_jk beta_k, kept current after every update
    grad = c - G @ beta
    history = [_objective(beta, G, c, yvar, alpha)] if trace else None
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        max_delta = 0.0
        for j in active:
            old = beta[j]
            z = grad[j] + diag[j] * old
            if z > alpha:
                new = (z - alpha) / diag[j]
            elif z < -alpha:
                new = (z + alpha) / diag[j]
            else:
                new = 0.0
            if new != old:
                delta = new - old
                grad -= G[:, j] * delta
                beta[j] = new
                max_delta = max(max_delta, abs(delta))
        if trace:
            history.append(_objective(beta, G, c, yvar, alpha))
        if max_delta < tol:
            converged = True
            break
    return beta, it, converged, tuple(history or ())


def _lasso_arrays(X, y, alpha, max_iter=DEFAULT_MAX_ITER, tol=DEFAULT_TOLERANCE, trace=False):
    """Lasso with intercept on raw arrays; X is centered internally, not rescaled."""
    n = X.shape[0]
    xm, ym = X.mean(axis=0), y.mean()
    Xc, yc = X - xm, y - ym
    G = Xc.T @ Xc / n
    c = Xc.T @ yc / n
    beta, it, conv, hist = _coordinate_descent(G, c, yc @ yc / n, alpha, max_iter, tol, trace=trace)
    b0 = float(ym - xm @ beta)
    return LinearFit(beta, b0, y - (X @ beta + b0), it, conv, hist)


def _check_inputs(X: NumericMatrix, y):
    if not isinstance(X, NumericMatrix) or not X.standardized:
        raise PreconditionError("lasso needs a standardized NumericMatrix")
    y = _as_vector(y, "y")
    if y.size != X.n_rows or y.size < 2:
        raise PreconditionError("y length must match X rows and be >= 2")
    return y


def lasso(X: NumericMatrix, y, cfg: LassoConfig = LassoConfig(), trace: bool = False) -> LinearFit:
    """Fit the Lasso on a standardized design; the intercept is fitted internally.

    With ``trace=True`` the objective after every sweep is kept in
    ``objective_trace``.
    """
    y = _check_inputs(X, y)
    return _lasso_arrays(X.data, y, cfg.alpha, cfg.max_iterations, cfg.tolerance, trace)


def initial_estimate(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """OLS coefficients, or a tiny ridge when the design is rank deficient."""
    try:
        return ols(X, y).coefficients
    except DegenerateError:
        return ols(X, y, ridge=RIDGE_FALLBACK).coefficients


def _adaptive_arrays(X, y, alpha, weights=None, max_iter=DEFAULT_MAX_ITER, tol=DEFAULT_TOLERANCE):
    if weights is None:
        scale = np.abs(initial_estimate(X, y))
    else:
        w = np.asarray(weights, dtype=float)
        with np.errstate(divide="ignore"):
            scale = np.where(np.isinf(w), 0.0, 1.0 / w)
    # x_j / w_j, with infinite weight giving an all-zero column (coefficient pinned at 0)
    fit = _lasso_arrays(X * scale, y, alpha, max_iter, tol)
    coef = fit.coefficients * scale
    coef[scale == 0] = 0.0
    return LinearFit(coef, fit.intercept, y - (X @ coef + fit.intercept), fit.n_iter, fit.converged)


def adaptive_lasso(X: NumericMatrix, y, cfg: LassoConfig = LassoConfig(), weights=None) -> LinearFit:
    """Weighted-l1 Lasso with weights ``1 / |initial OLS coefficient|``.

    Explicit ``weights`` (possibly ``inf``) override the data-driven ones.
    """
    y = _check_inputs(X, y)
    return _adaptive_arrays(X.data, y, cfg.alpha, weights, cfg.max_iterations, cfg.tolerance)


def alpha_max(X, y) -> float:
    """Smallest alpha at which every Lasso coefficient is zero."""
    X = X.data if isinstance(X, NumericMatrix) else np.asarray(X, dtype=float)
    y = _as_vector(y)
    Xc = X - X.mean(axis=0)
    return float(np.max(np.abs(Xc.T @ (y - y.mean()))) / X.shape[0]) if X.shape[1] else 0.0


def fold_indices(n: int, k: int, seed: int = 0) -> list[np.ndarray]:
    """Seeded shuffle of range(n) split into k near-equal folds."""
    if k < 2:
        raise ConfigError("need at least 2 folds")
    if n < k:
        raise ConfigError(f"{n} samples cannot fill {k} folds")
    perm = np.random.default_rng(seed).permutation(n)
    return np.array_split(perm, k)


def cv_fold_rmse(X, y, alphas, k: int = 5, seed: int = 0) -> np.ndarray:
    """Held-out RMSE per (fold, alpha) over seeded folds.

    Each fold walks the grid from the largest alpha down, warm-starting
    coordinate descent from the previous solution.
    """
    X = X.data if isinstance(X, NumericMatrix) else np.asarray(X, dtype=float)
    y = _as_vector(y, "y")
    alphas = np.asarray(alphas, dtype=float)
    folds = fold_indices(y.size, k, seed)
    order = np.argsort(-alphas, kind="stable")
    scores = np.zeros((len(folds), alphas.size))
    for f, test in enumerate(folds):
        train = np.setdiff1d(np.arange(y.size), test)
        Xt, yt = X[train], y[train]
        xm, ym = Xt.mean(axis=0), yt.mean()
        Xc, yc = Xt - xm, yt - ym
        G = Xc.T @ Xc / train.size
        c = Xc.T @ yc / train.size
        beta = None
        for a in order:
            beta, *_ = _coordinate_descent(
                G, c, yc @ yc / train.size, alphas[a], DEFAULT_MAX_ITER, DEFAULT_TOLERANCE, beta
            )
            pred = (X[test] - xm) @ beta + ym
            scores[f, a] = np.sqrt(np.mean((y[test] - pred) ** 2))
    return scores


def cv_rmse(X, y, alphas, k: int = 5, seed: int = 0) -> np.ndarray:
    """Mean held-out RMSE per alpha."""
    return cv_fold_rmse(X, y, alphas, k, seed).mean(axis=0)


def _check_grid(alphas) -> list[float]:
    alphas = [float(a) for a in alphas]
    if not alphas:
        raise PreconditionError("alpha grid is empty")
    if any(a < 0 for a in alphas):
        raise PreconditionError("alphas must be non-negative")
    return alphas


def cv_best_alpha(X, y, alphas, k: int = 5, seed: int = 0) -> float:
    """Alpha with the lowest mean held-out RMSE; ties go to the larger alpha."""
    alphas = _check_grid(alphas)
    rmse = cv_rmse(X, y, alphas, k, seed)
    best = rmse.min()
    tied = [a for a, r in zip(alphas, rmse) if r <= best * (1 + 1e-12) + 1e-15]
    return max(tied)


def cv_one_se_alpha(X, y, alphas, k: int = 5, seed: int = 0) -> float:
    """Largest alpha whose mean RMSE is within one standard error of the best.

    The standard error is the fold-to-fold sd of the best alpha's RMSE over
    sqrt(k). Same folds as ``cv_best_alpha``, which it never undercuts.
    """
    alphas = _check_grid(alphas)
    scores = cv_fold_rmse(X, y, alphas, k, seed)
    mean = scores.mean(axis=0)
    j = int(np.argmin(mean))
    limit = mean[j] + scores[:, j].std(ddof=1) / np.sqrt(scores.shape[0])
    return max(a for a, r in zip(alphas, mean) if r <= limit * (1 + 1e-12) + 1e-15)


def alpha_grid(X, y, n_alphas: int = 30, ratio: float = 1e-3) -> list[float]:
    """Log-spaced grid from ``alpha_max`` down to ``ratio * alpha_max``."""
    top = alpha_max(X, y)
    if top == 0:
        return [0.0]
    return list(np.geomspace(top, top * ratio, n_alphas))
