"""Probe-guarded Lasso feature ranking.

Random Gaussian probe columns are appended to the design, the Lasso is fitted
over several seeds (probes re-drawn each time), and only features whose mean
absolute coefficient beats the strongest probe are kept.
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import PreconditionError
from .regression import LassoConfig, lasso
from .tabular import NumericMatrix

PROBE_PREFIX = "Random_"
DEFAULT_PROBES = 5
DEFAULT_RUNS = 5
TOP_N = 20
_PROBE_RE = re.compile(r"^Random_\d+$")


def is_probe(name: str) -> bool:
    return bool(_PROBE_RE.match(name))


@dataclass(frozen=True)
class ImportanceRanking:
    entries: tuple  # (name, mean_abs_coefficient, is_probe), best first
    runs: int
    seeds: tuple

    def __post_init__(self):
        entries = tuple((str(n), float(v), bool(p)) for n, v, p in self.entries)
        vals = [v for _, v, _ in entries]
        if any(v < 0 for v in vals):
            raise PreconditionError("importances must be non-negative")
        if any(a < b for a, b in zip(vals, vals[1:])):
            raise PreconditionError("ranking must be sorted non-increasing")
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))

    @property
    def probe_count(self) -> int:
        return sum(p for _, _, p in self.entries)

    def importance(self, name: str) -> float:
        for n, v, _ in self.entries:
            if n == name:
                return v
        raise KeyError(name)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["name", "mean_abs_coefficient", "is_probe"])
        for n, v, p in self.entries:
            w.writerow([n, repr(v), "true" if p else "false"])
        return _emit(buf.getvalue(), path)

    def bar_data(self, top: int = TOP_N, path=None) -> str:
        """Name/value pairs of the top features, ready for a horizontal bar chart."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["name", "value"])
        for n, v, _ in self.entries[:top]:
            w.writerow([n, repr(v)])
        return _emit(buf.getvalue(), path)


def _emit(text: str, path) -> str:
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def _probe_block(n: int, k: int, seed: int) -> np.ndarray:
    Z = np.random.default_rng(seed).standard_normal((n, k))
    if n < 2:
        return np.zeros((n, k))
    Z = Z - Z.mean(axis=0)
    return Z / Z.std(axis=0, ddof=1)


def inject_probes(m: NumericMatrix, k: int = DEFAULT_PROBES, seed: int = 0) -> NumericMatrix:
    """Append k seeded standard-normal columns Random_1..Random_k, standardized."""
    if k < 1:
        raise PreconditionError("need at least one probe")
    clash = [n for n in m.column_names if is_probe(n)]
    if clash:
        raise PreconditionError(f"matrix already holds probe columns {clash}")
    names = tuple(f"{PROBE_PREFIX}{i + 1}" for i in range(k))
    out = m.with_columns(names, _probe_block(m.n_rows, k, seed))
    if m.standardized and m.n_rows >= 2:
        return NumericMatrix(out.column_names, out.data, True)
    return out


def rank_features(
    m: NumericMatrix,
    y,
    alpha: float,
    runs: int = DEFAULT_RUNS,
    base_seed: int = 0,
) -> ImportanceRanking:
    """Mean |Lasso coefficient| per column over `runs` seeds, probes re-drawn per run."""
    probes = [n for n in m.column_names if is_probe(n)]
    if not probes:
        raise PreconditionError("rank_features needs a matrix with probe columns")
    if runs < 1:
        raise PreconditionError("runs must be >= 1")
    base = m.drop(probes)
    base = NumericMatrix(base.column_names, base.data, m.standardized)
    cfg = LassoConfig(alpha=alpha)
    seeds = tuple(base_seed + r for r in range(runs))
    total = None
    names = None
    for s in seeds:
        design = inject_probes(base, len(probes), s)
        coef = np.abs(lasso(design, y, cfg).coefficients)
        total = coef if total is None else total + coef
        names = design.column_names
    mean = total / runs
    order = sorted(range(len(names)), key=lambda j: (-mean[j], names[j]))
    entries = tuple((names[j], float(mean[j]), is_probe(names[j])) for j in order)
    return ImportanceRanking(entries, runs, seeds)


def probe_cutoff(r: ImportanceRanking) -> list[str]:
    """Non-probe features strictly above the strongest probe, in rank order."""
    probe_vals = [v for _, v, p in r.entries if p]
    if not probe_vals:
        raise PreconditionError("ranking holds no probes")
    tau = max(probe_vals)
    return [n for n, v, p in r.entries if not p and v > tau]
