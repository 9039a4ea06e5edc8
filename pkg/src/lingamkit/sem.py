"""Synthetic linear structural-equation models with known ground truth.

Each variable is ``x_i = sum_j B[i, j] x_j + e_i`` plus, for every latent
confounder touching it, ``strength * L``. Noise families are parametrized to
unit variance before scaling, so ``scale`` is the noise standard deviation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import PreconditionError
from .graph import CausalGraph
from .tabular import NumericMatrix

NOISE_FAMILIES = ("uniform", "laplace", "gaussian", "exponential")


def draw_noise(rng: np.random.Generator, family: str, n: int, scale: float = 1.0) -> np.ndarray:
    """Zero-mean noise with standard deviation ``scale``."""
    if family == "uniform":
        e = rng.uniform(-math.sqrt(3.0), math.sqrt(3.0), n)
    elif family == "laplace":
        e = rng.laplace(0.0, 1.0 / math.sqrt(2.0), n)
    elif family == "gaussian":
        e = rng.standard_normal(n)
    elif family == "exponential":
        e = rng.exponential(1.0, n) - 1.0
    else:
        raise PreconditionError(f"unknown noise family {family!r}")
    return scale * e


@dataclass(frozen=True, eq=False)
class SemSpec:
    weights: np.ndarray
    noise: tuple  # (family, scale) per variable
    n: int = 1000
    seed: int = 0
    latents: tuple = ()  # ((i, j), strength) per hidden confounder
    latent_noise: str = "uniform"
    names: tuple = ()
    permute_columns: bool = True

    def __post_init__(self):
        B = np.array(self.weights, dtype=float)
        p = B.shape[0]
        if B.shape != (p, p):
            raise PreconditionError("weights must be square")
        if np.any(np.diag(B) != 0):
            raise PreconditionError("weights must have a zero diagonal")
        names = tuple(self.names) or tuple(f"x{i + 1}" for i in range(p))
        noise = tuple((str(f), float(s)) for f, s in self.noise)
        if len(noise) != p or len(names) != p:
            raise PreconditionError("need one noise entry and one name per variable")
        for fam, s in noise:
            if fam not in NOISE_FAMILIES or not s > 0:
                raise PreconditionError(f"bad noise entry ({fam!r}, {s})")
        if self.latent_noise not in NOISE_FAMILIES:
            raise PreconditionError(f"unknown latent noise {self.latent_noise!r}")
        latents = tuple(((int(a), int(b)), float(s)) for (a, b), s in self.latents)
        for (a, b), _ in latents:
            if a == b or not (0 <= a < p and 0 <= b < p):
                raise PreconditionError("latent confounder needs two distinct variables")
        if self.n < 1:
            raise PreconditionError("n must be positive")
        B.setflags(write=False)
        object.__setattr__(self, "weights", B)
        object.__setattr__(self, "noise", noise)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "latents", latents)
        self.graph()  # rejects cyclic weights

    @property
    def p(self) -> int:
        return self.weights.shape[0]

    def graph(self) -> CausalGraph:
        B = self.weights
        edges = {
            (self.names[j], self.names[i]): B[i, j]
            for i in range(self.p)
            for j in range(self.p)
            if B[i, j] != 0
        }
        bi = {tuple(sorted((self.names[a], self.names[b]))) for (a, b), _ in self.latents}
        return CausalGraph(self.names, edges, sorted(bi))

    def implied_covariance(self) -> np.ndarray:
        """Population covariance ``(I - B)^-1 Omega (I - B)^-T`` of the observed variables."""
        omega = np.diag([s * s for _, s in self.noise])
        for (a, b), s in self.latents:
            omega[a, a] += s * s
            omega[b, b] += s * s
            omega[a, b] += s * s
            omega[b, a] += s * s
        A = np.linalg.inv(np.eye(self.p) - self.weights)
        return A @ omega @ A.T

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "noise": [list(x) for x in self.noise],
            "n": self.n,
            "seed": self.seed,
            "latents": [[list(pair), s] for pair, s in self.latents],
            "latent_noise": self.latent_noise,
            "names": list(self.names),
            "permute_columns": self.permute_columns,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SemSpec":
        return cls(
            weights=np.array(d["weights"], dtype=float),
            noise=tuple(tuple(x) for x in d["noise"]),
            n=int(d["n"]),
            seed=int(d["seed"]),
            latents=tuple((tuple(pair), s) for pair, s in d.get("latents", [])),
            latent_noise=d.get("latent_noise", "uniform"),
            names=tuple(d.get("names", ())),
            permute_columns=bool(d.get("permute_columns", True)),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "SemSpec":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True, eq=False)
class SemSample:
    """Everything drawn for one spec; arrays are in spec variable order."""

    spec: SemSpec
    values: np.ndarray
    noise: np.ndarray
    latent_values: np.ndarray
    column_order: tuple = field(default=())

    def matrix(self) -> NumericMatrix:
        names = tuple(self.spec.names[i] for i in self.column_order)
        return NumericMatrix(names, self.values[:, list(self.column_order)])


def sample(spec: SemSpec) -> SemSample:
    rng = np.random.default_rng(spec.seed)
    p, n = spec.p, spec.n
    noise = np.column_stack([draw_noise(rng, fam, n, s) for fam, s in spec.noise])
    lat = np.column_stack(
        [draw_noise(rng, spec.latent_noise, n) for _ in spec.latents]
    ) if spec.latents else np.zeros((n, 0))
    confound = np.zeros((n, p))
    for k, ((a, b), s) in enumerate(spec.latents):
        confound[:, a] += s * lat[:, k]
        confound[:, b] += s * lat[:, k]
    X = np.zeros((n, p))
    index = {name: i for i, name in enumerate(spec.names)}
    for name in spec.graph().topological_order():
        i = index[name]
        X[:, i] = X @ spec.weights[i] + noise[:, i] + confound[:, i]
    order = tuple(rng.permutation(p).tolist()) if spec.permute_columns else tuple(range(p))
    return SemSample(spec, X, noise, lat, order)


def generate(spec: SemSpec) -> tuple[NumericMatrix, CausalGraph]:
    """Draw data and the true graph; latents appear only as bi-directed edges."""
    s = sample(spec)
    return s.matrix(), spec.graph()


def random_spec(
    p: int,
    density: float,
    noise_family: str = "uniform",
    seed: int = 0,
    n: int = 1000,
    weight_range: tuple = (0.3, 0.9),
) -> SemSpec:
    """Random lower-triangular SEM; each possible edge appears with probability density."""
    if not 0 < density <= 1:
        raise PreconditionError("density must lie in (0, 1]")
    lo, hi = weight_range
    rng = np.random.default_rng(seed)
    B = np.zeros((p, p))
    for i in range(p):
        for j in range(i):
            if rng.uniform() < density:
                B[i, j] = rng.uniform(lo, hi) * rng.choice((-1.0, 1.0))
    return SemSpec(B, tuple((noise_family, 1.0) for _ in range(p)), n=n, seed=seed)
