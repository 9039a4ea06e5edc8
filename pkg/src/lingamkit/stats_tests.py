"""Normality and independence tests.

``shapiro_wilk`` follows Royston's AS R94 algorithm. ``independence_test``
is an HSIC permutation test with Gaussian kernels; Gram matrices are
replaced by pivoted incomplete Cholesky factors so the statistic and every
permuted replicate cost O(n r^2) instead of O(n^2).

HSIC here is the biased V-statistic ``trace(K H L H) / n**2``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from statistics import NormalDist

import numpy as np

from .errors import DegenerateError, PreconditionError
from .regression import residualize
from .tabular import NumericMatrix

SHAPIRO_MAX_N = 5000
HSIC_MIN_N = 8
MIN_PERMUTATIONS = 99
MATRIX_PERMUTATIONS = 199
PAIR_PERMUTATIONS = 999

ICD_TOLERANCE = 1e-8
ICD_MAX_RANK = 200


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    n: int
    method: str
    subsampled: bool = False

    __test__ = False  # keep pytest from collecting this class

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p-value {self.p_value} outside [0, 1]")


# -- Shapiro-Wilk ------------------------------------------------------------

_C1 = (0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056)
_C2 = (0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633)
_C3 = (0.5440, -0.39978, 0.025054, -6.714e-4)
_C4 = (1.3822, -0.77857, 0.062767, -0.0020322)
_C5 = (-1.5861, -0.31082, -0.083751, 0.0038915)
_C6 = (-0.4803, -0.082676, 0.0030302)
_G = (-2.273, 0.459)


def _poly(coefs, x):
    # coefficients in ascending powers
    out = 0.0
    for c in reversed(coefs):
        out = out * x + c
    return out


def _swilk_coefficients(n: int) -> np.ndarray:
    """Antisymmetric weights a_1..a_[n/2] for the smallest order statistics."""
    nn2 = n // 2
    if n == 3:
        return np.array([math.sqrt(0.5)])
    nd = NormalDist()
    an25 = n + 0.25
    m = np.array([nd.inv_cdf((i - 0.375) / an25) for i in range(1, nn2 + 1)])
    summ2 = 2.0 * float(m @ m)
    ssumm2 = math.sqrt(summ2)
    rsn = 1.0 / math.sqrt(n)
    a1 = _poly(_C1, rsn) - m[0] / ssumm2
    a = np.empty(nn2)
    if n > 5:
        i1 = 2
        a2 = -m[1] / ssumm2 + _poly(_C2, rsn)
        fac = math.sqrt((summ2 - 2 * m[0] ** 2 - 2 * m[1] ** 2) / (1 - 2 * a1**2 - 2 * a2**2))
        a[1] = a2
    else:
        i1 = 1
        fac = math.sqrt((summ2 - 2 * m[0] ** 2) / (1 - 2 * a1**2))
    a[0] = a1
    a[i1:] = -m[i1:] / fac
    return a


def _swilk(x: np.ndarray) -> tuple[float, float]:
    n = x.size
    x = np.sort(x)
    rng = x[-1] - x[0]
    if rng < 1e-19 * max(1.0, abs(x[0])):
        raise DegenerateError("Shapiro-Wilk needs a non-constant sample")
    a = _swilk_coefficients(n)
    full = np.zeros(n)
    full[: a.size] = -a
    full[n - a.size :] = a[::-1]
    xs = x / rng
    asa = full - full.mean()
    xsx = xs - xs.mean()
    ssa, ssx, sax = asa @ asa, xsx @ xsx, asa @ xsx
    ssassx = math.sqrt(ssa * ssx)
    w1 = (ssassx - sax) * (ssassx + sax) / (ssa * ssx)
    w = 1.0 - w1

    if n == 3:
        pw = (6.0 / math.pi) * (math.asin(math.sqrt(w)) - math.pi / 3.0)
        return w, min(max(pw, 0.0), 1.0)
    if w1 <= 0:
        return w, 1.0
    y = math.log(w1)
    lxx = math.log(n)
    if n <= 11:
        gamma = _poly(_G, n)
        if y >= gamma:
            return w, 1e-99
        y = -math.log(gamma - y)
        m = _poly(_C3, n)
        s = math.exp(_poly(_C4, n))
    else:
        m = _poly(_C5, lxx)
        s = math.exp(_poly(_C6, lxx))
    # upper normal tail via erfc keeps precision far out in the tail
    pw = 0.5 * math.erfc((y - m) / s / math.sqrt(2.0))
    return w, min(max(pw, 0.0), 1.0)


def shapiro_wilk(sample, seed: int = 0) -> TestResult:
    """Shapiro-Wilk W and its Royston p-value.

    Samples above 5000 points are tested on a seeded subsample of 5000,
    flagged via ``subsampled``.
    """
    x = np.asarray(sample, dtype=float).ravel()
    if x.size < 3:
        raise PreconditionError("Shapiro-Wilk needs at least 3 observations")
    if not np.all(np.isfinite(x)):
        raise PreconditionError("sample contains non-finite values")
    subsampled = x.size > SHAPIRO_MAX_N
    if subsampled:
        x = np.random.default_rng(seed).choice(x, SHAPIRO_MAX_N, replace=False)
    w, p = _swilk(x)
    return TestResult(w, p, x.size, "shapiro_wilk", subsampled)


# -- HSIC ------------------------------------------------------------------


def _kth_pairwise_distance(s: np.ndarray, k: int) -> float:
    """k-th smallest (0-based) of |s_i - s_j|, i < j, for sorted s.

    Bisects on the distance value, counting pairs with ``searchsorted``,
    until few candidates remain, then selects among them exactly.
    """
    n = s.size
    idx = np.arange(n)

    def upper(t):
        return np.searchsorted(s, s + t, side="right")

    def count(t):
        return int((upper(t) - idx - 1).sum())

    # the doubled range keeps s[0] + hi above s[-1] despite rounding
    lo, hi = 0.0, 2.0 * float(s[-1] - s[0]) + 1e-300
    c_lo, c_hi = count(lo), count(hi)
    if c_lo > k:
        return 0.0
    while c_hi - c_lo > 4 * n and hi - lo > 0:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        c_mid = count(mid)
        if c_mid > k:
            hi, c_hi = mid, c_mid
        else:
            lo, c_lo = mid, c_mid
    start, stop = upper(lo), upper(hi)
    lengths = stop - start
    rows = np.repeat(idx, lengths)
    offsets = np.arange(lengths.sum()) - np.repeat(np.cumsum(lengths) - lengths, lengths)
    cand = s[start[rows] + offsets] - s[rows]
    return float(np.partition(cand, k - c_lo)[k - c_lo])


def median_bandwidth(x) -> float:
    """Median pairwise distance, or 1.0 when that median is zero."""
    s = np.sort(np.asarray(x, dtype=float).ravel())
    m = s.size * (s.size - 1) // 2
    if m == 0:
        return 1.0
    if m % 2:
        med = _kth_pairwise_distance(s, m // 2)
    else:
        med = 0.5 * (_kth_pairwise_distance(s, m // 2 - 1) + _kth_pairwise_distance(s, m // 2))
    return med if med > 0 else 1.0


def gaussian_icd(x, sigma: float, tol: float = ICD_TOLERANCE, max_rank: int = ICD_MAX_RANK) -> np.ndarray:
    """Pivoted incomplete Cholesky factor G with K ~= G G' for a Gaussian kernel.

    Stops once the trace of the remainder falls below ``tol * n``.
    """
    x = np.asarray(x, dtype=float).ravel()
    n = x.size
    max_rank = min(max_rank, n)
    inv = 1.0 / (2.0 * sigma * sigma)
    d = np.ones(n)
    G = np.zeros((n, max_rank))
    k = 0
    while k < max_rank and d.sum() > tol * n:
        i = int(np.argmax(d))
        col = np.exp(-((x - x[i]) ** 2) * inv)
        if k:
            col -= G[:, :k] @ G[i, :k]
        col /= math.sqrt(d[i])
        G[:, k] = col
        d -= col * col
        np.maximum(d, 0.0, out=d)
        d[i] = 0.0
        k += 1
    return G[:, :k]


def _centered_factor(x) -> np.ndarray:
    G = gaussian_icd(x, median_bandwidth(x))
    return G - G.mean(axis=0)


def _hsic_from_factors(Fx: np.ndarray, Fy: np.ndarray) -> float:
    M = Fx.T @ Fy
    return float(np.sum(M * M)) / Fx.shape[0] ** 2


def hsic_statistic(u, v) -> float:
    u = np.asarray(u, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    if u.shape != v.shape:
        raise PreconditionError("u and v must have equal lengths")
    return _hsic_from_factors(_centered_factor(u), _centered_factor(v))


def independence_test(u, v, permutations: int = PAIR_PERMUTATIONS, seed: int = 0) -> TestResult:
    """HSIC permutation test of u independent of v.

    The p-value is ``(1 + #{permuted >= observed}) / (1 + permutations)``
    with v permuted by a generator seeded from ``seed``.
    """
    u = np.asarray(u, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    if u.shape != v.shape:
        raise PreconditionError("u and v must have equal lengths")
    if u.size < HSIC_MIN_N:
        raise PreconditionError(f"independence test needs n >= {HSIC_MIN_N}")
    if permutations < MIN_PERMUTATIONS:
        raise PreconditionError(f"need at least {MIN_PERMUTATIONS} permutations")
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
        raise PreconditionError("inputs contain non-finite values")
    Fu, Fv = _centered_factor(u), _centered_factor(v)
    observed = _hsic_from_factors(Fu, Fv)
    rng = np.random.default_rng(seed)
    threshold = observed * (1.0 - 1e-10)
    exceed = 0
    for _ in range(permutations):
        if _hsic_from_factors(Fu, Fv[rng.permutation(u.size)]) >= threshold:
            exceed += 1
    p = (1 + exceed) / (1 + permutations)
    return TestResult(observed, p, int(u.size), "hsic_permutation")


# -- matrices --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PValueMatrix:
    names: tuple
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        k = len(self.names)
        if vals.shape != (k, k):
            raise ValueError("p-value matrix shape does not match names")
        if np.any((vals < 0) | (vals > 1)):
            raise ValueError("p-values must lie in [0, 1]")
        vals.setflags(write=False)
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "values", vals)

    def to_csv(self, path=None) -> str:
        return write_labeled_matrix(self.names, self.values, path)


def write_labeled_matrix(names, values, path=None, digits: int | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([""] + list(names))
    for name, row in zip(names, values):
        w.writerow([name] + [repr(float(v)) if digits is None else f"{v:.{digits}f}" for v in row])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def residual_independence_matrix(
    m: NumericMatrix, permutations: int = MATRIX_PERMUTATIONS, seed: int = 0
) -> PValueMatrix:
    """Entry (i, j): p-value of x_i against the residual of x_j regressed on x_i."""
    if not m.standardized:
        raise PreconditionError("residual independence matrix needs standardized input")
    p = m.n_cols
    if p < 2:
        raise PreconditionError("need at least two columns")
    X = m.data
    out = np.ones((p, p))
    for i in range(p):
        for j in range(p):
            if i != j:
                r = residualize(X[:, j], X[:, i])
                out[i, j] = independence_test(X[:, i], r, permutations, seed ^ (i * p + j)).p_value
    return PValueMatrix(m.column_names, out)


def correlation_matrix(m: NumericMatrix) -> np.ndarray:
    """Pearson correlations between columns."""
    if m.n_cols == 1:
        return np.ones((1, 1))
    return np.corrcoef(m.data, rowvar=False)
