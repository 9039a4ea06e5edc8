"""Backdoor-adjusted effect estimation and refutation tests.

Effects are treatment coefficients of an OLS fit of the outcome on the
treatment plus an adjustment set, computed on raw (unstandardized) columns.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .discovery import derive_seed
from .errors import DegenerateError, IdentificationError, PreconditionError
from .graph import CausalGraph, descendants, open_backdoor_path, satisfies_backdoor
from .tabular import NumericMatrix

RANDOM_COMMON_CAUSE = "random_common_cause"
DATA_SUBSET = "data_subset"
PLACEBO = "placebo"
ROBUST = "robust"
FRAGILE = "fragile"
DEFAULT_REPETITIONS = 100
MIN_REPETITIONS = 20
DEFAULT_FRACTION = 0.8

TECHNIQUE_LABELS = {
    RANDOM_COMMON_CAUSE: "Add a random common cause",
    DATA_SUBSET: "Use a subset of data",
    PLACEBO: "Use a placebo treatment",
}


@dataclass(frozen=True)
class EffectEstimate:
    treatment: str
    outcome: str
    adjustment: tuple
    ate: float
    n: int


@dataclass(frozen=True)
class RefutationResult:
    technique: str
    original: float
    refuted: float
    p_value: float
    repetitions: int
    verdict: str

    def __post_init__(self):
        lo = 1.0 / (1 + self.repetitions)
        if not lo - 1e-12 <= self.p_value <= 1.0:
            raise PreconditionError(f"p-value {self.p_value} outside [{lo}, 1]")


def _fit_effect(y: np.ndarray, t: np.ndarray, Z: np.ndarray) -> float:
    """Treatment coefficient of y ~ 1 + t + Z."""
    n = y.size
    D = np.column_stack([np.ones(n), t, Z]) if Z.size else np.column_stack([np.ones(n), t])
    if np.ptp(t) == 0:
        raise DegenerateError("treatment has zero variance")
    if np.linalg.matrix_rank(D) < D.shape[1]:
        raise DegenerateError("adjusted design is collinear")
    coef, *_ = np.linalg.lstsq(D, y, rcond=None)
    return float(coef[1])


def _identification_error(g: CausalGraph, treatment, outcome, z) -> IdentificationError:
    bad = sorted(set(z) & descendants(g, treatment))
    if bad:
        return IdentificationError(
            f"adjustment for {treatment} -> {outcome} contains descendants of the treatment: {bad}"
        )
    path = open_backdoor_path(g, treatment, outcome, z)
    shown = " - ".join(path) if path else "?"
    return IdentificationError(f"open backdoor path {shown} for {treatment} -> {outcome}")


def estimate_ate(
    m: NumericMatrix, g: CausalGraph, treatment: str, outcome: str, adjustment=()
) -> EffectEstimate:
    """OLS effect of treatment on outcome adjusting for a backdoor set of g."""
    adjustment = tuple(sorted(adjustment))
    if not satisfies_backdoor(g, treatment, outcome, adjustment):
        raise _identification_error(g, treatment, outcome, adjustment)
    y = m.column(outcome)
    t = m.column(treatment)
    Z = m.select(adjustment).data if adjustment else np.zeros((m.n_rows, 0))
    return EffectEstimate(treatment, outcome, adjustment, _fit_effect(y, t, Z), m.n_rows)


def _arrays(m: NumericMatrix, est: EffectEstimate):
    Z = m.select(est.adjustment).data if est.adjustment else np.zeros((m.n_rows, 0))
    return m.column(est.outcome), m.column(est.treatment), Z


def _check_reps(repetitions: int) -> None:
    if repetitions < MIN_REPETITIONS:
        raise PreconditionError(f"need at least {MIN_REPETITIONS} repetitions, got {repetitions}")


def sign_flip_p_value(shifts, seed: int = 0, draws: int | None = None) -> float:
    """Two-sided p-value for mean(shifts) = 0 under random sign flips.

    ``p = (1 + #{|mean(s * shifts)| >= |mean(shifts)|}) / (1 + draws)``,
    with ``draws`` defaulting to the number of shifts.
    """
    d = np.asarray(shifts, dtype=float)
    draws = d.size if draws is None else draws
    obs = abs(d.mean())
    signs = np.random.default_rng(seed).choice((-1.0, 1.0), size=(draws, d.size))
    null = np.abs(signs @ d) / d.size
    return (1 + int(np.sum(null >= obs * (1 - 1e-12)))) / (1 + draws)


def refute_random_common_cause(
    m: NumericMatrix,
    g: CausalGraph,
    est: EffectEstimate,
    repetitions: int = DEFAULT_REPETITIONS,
    seed: int = 0,
) -> RefutationResult:
    """Re-estimate with an extra independent standard-normal covariate."""
    _check_reps(repetitions)
    y, t, Z = _arrays(m, est)
    new = np.empty(repetitions)
    for r in range(repetitions):
        w = np.random.default_rng(derive_seed(seed, 0, r)).standard_normal(y.size)
        new[r] = _fit_effect(y, t, np.column_stack([Z, w]))
    p = sign_flip_p_value(new - est.ate, derive_seed(seed, 1))
    verdict = ROBUST if p > 0.05 else FRAGILE
    return RefutationResult(RANDOM_COMMON_CAUSE, est.ate, float(new.mean()), p, repetitions, verdict)


def refute_data_subset(
    m: NumericMatrix,
    g: CausalGraph,
    est: EffectEstimate,
    fraction: float = DEFAULT_FRACTION,
    repetitions: int = DEFAULT_REPETITIONS,
    seed: int = 0,
) -> RefutationResult:
    """Re-estimate on seeded subsamples of size ceil(fraction * n)."""
    _check_reps(repetitions)
    if not 0 < fraction < 1:
        raise PreconditionError("fraction must lie strictly between 0 and 1")
    n = m.n_rows
    if fraction * n < 10 * (1 + len(est.adjustment)):
        raise PreconditionError(
            f"subsample of {fraction * n:.1f} rows is too small for {len(est.adjustment)} covariates"
        )
    size = math.ceil(fraction * n)
    y, t, Z = _arrays(m, est)
    new = np.empty(repetitions)
    for r in range(repetitions):
        idx = np.random.default_rng(derive_seed(seed, 0, r)).choice(n, size, replace=False)
        new[r] = _fit_effect(y[idx], t[idx], Z[idx])
    p = sign_flip_p_value(new - est.ate, derive_seed(seed, 1))
    verdict = ROBUST if p > 0.05 else FRAGILE
    return RefutationResult(DATA_SUBSET, est.ate, float(new.mean()), p, repetitions, verdict)


def refute_placebo(
    m: NumericMatrix,
    g: CausalGraph,
    est: EffectEstimate,
    repetitions: int = DEFAULT_REPETITIONS,
    seed: int = 0,
) -> RefutationResult:
    """Re-estimate with the treatment column replaced by a permutation of itself.

    Here a small p-value is good news: the original effect stands out from
    the placebo effects.
    """
    _check_reps(repetitions)
    y, t, Z = _arrays(m, est)
    new = np.empty(repetitions)
    for r in range(repetitions):
        perm = np.random.default_rng(derive_seed(seed, 0, r)).permutation(y.size)
        new[r] = _fit_effect(y, t[perm], Z)
    orig = abs(est.ate)
    p = (1 + int(np.sum(np.abs(new) >= orig))) / (1 + repetitions)
    refuted = float(new.mean())
    verdict = ROBUST if abs(refuted) <= 0.1 * orig and p <= 0.05 else FRAGILE
    return RefutationResult(PLACEBO, est.ate, refuted, p, repetitions, verdict)


def refute_all(m, g, est, repetitions=DEFAULT_REPETITIONS, seed=0, fraction=DEFAULT_FRACTION) -> list:
    return [
        refute_random_common_cause(m, g, est, repetitions, derive_seed(seed, 1)),
        refute_data_subset(m, g, est, fraction, repetitions, derive_seed(seed, 2)),
        refute_placebo(m, g, est, repetitions, derive_seed(seed, 3)),
    ]


# -- tables ----------------------------------------------------------------


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return f"{v:.4f}"


def _emit(text: str, path) -> str:
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _markdown(header, rows) -> str:
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    lines += ["| " + " | ".join(str(c) for c in row) + " |" for row in rows]
    return "\n".join(lines) + "\n"


EFFECT_HEADER = ("From", "To", "Effect", "Adjustment")
REFUTATION_HEADER = ("Variable", "Refutation Technique", "Estimated Effect", "New Effect", "p-value", "Verdict")


def effect_rows(effects) -> list:
    """Rows for effect tables; entries are EffectEstimate or (treatment, outcome, reason)."""
    rows = []
    for e in effects:
        if isinstance(e, EffectEstimate):
            rows.append((e.treatment, e.outcome, _fmt(e.ate), " ".join(e.adjustment)))
        else:
            rows.append((e[0], e[1], "unidentifiable", e[2]))
    return rows


def refutation_rows(pairs) -> list:
    """Rows from (EffectEstimate, [RefutationResult, ...]) pairs."""
    rows = []
    for est, results in pairs:
        for r in results:
            rows.append((
                est.treatment,
                TECHNIQUE_LABELS[r.technique],
                _fmt(r.original),
                _fmt(r.refuted),
                f"{r.p_value:.4f}",
                r.verdict,
            ))
    return rows


def effects_csv(effects, path=None) -> str:
    return _emit(_csv(EFFECT_HEADER, effect_rows(effects)), path)


def effects_markdown(effects, path=None) -> str:
    return _emit(_markdown(EFFECT_HEADER, effect_rows(effects)), path)


def refutations_csv(pairs, path=None) -> str:
    return _emit(_csv(REFUTATION_HEADER, refutation_rows(pairs)), path)


def refutations_markdown(pairs, path=None) -> str:
    return _emit(_markdown(REFUTATION_HEADER, refutation_rows(pairs)), path)
