"""Synthetic CSV datasets shared by the pipeline and acceptance tests."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from lingamkit.sem import SemSpec, sample


def mixed_dataset(path, n: int = 900, n_noise: int = 33, seed: int = 0) -> dict:
    """CSV with a planted SEM, noise columns, categorical columns, a constant and gaps.

    Structure: c -> a, c -> y, a -> y (1.5), b -> y (-1.0), all uniform noise.
    Returns the true effects on y.
    """
    B = np.zeros((4, 4))
    B[1, 0] = 0.8   # c -> a
    B[3, 0] = 0.6   # c -> y
    B[3, 1] = 1.5   # a -> y
    B[3, 2] = -1.0  # b -> y
    spec = SemSpec(B, tuple(("uniform", 1.0) for _ in range(4)), n=n, seed=seed,
                   names=("c", "a", "b", "y"), permute_columns=False)
    s = sample(spec)
    rng = np.random.default_rng(seed + 1)
    cols = {name: s.values[:, k] for k, name in enumerate(spec.names)}
    for k in range(n_noise):
        cols[f"noise{k + 1:02d}"] = rng.uniform(-1, 1, n) * rng.uniform(0.5, 3)
    header = list(cols) + ["site", "grade", "batch"]
    site = rng.choice(["north", "south", "east"], n)
    grade = rng.choice(["I", "II", "III"], n)
    rows = []
    for i in range(n):
        row = [repr(float(cols[h][i])) for h in cols] + [site[i], grade[i], "1"]
        rows.append(row)
    # a few gaps in noise and categorical columns
    for i, j in zip(rng.choice(n, 12, replace=False), rng.integers(4, len(header) - 1, 12)):
        rows[i][j] = ""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return {"a": 1.5, "b": -1.0, "c": 0.6 + 0.8 * 1.5}
