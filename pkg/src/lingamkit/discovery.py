"""DirectLiNGAM ordering and an RCD-style variant with latent-confounder edges.

Weights follow the convention ``weights[i, j]`` = strength of edge j -> i,
estimated on the standardized input.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError
from .graph import CausalGraph
from .regression import _adaptive_arrays, initial_estimate, residualize, residualize_many
from .stats_tests import (
    MATRIX_PERMUTATIONS,
    _centered_factor,
    _hsic_from_factors,
    independence_test,
)
from .tabular import NumericMatrix

X_CAUSES_Y = "x_causes_y"
Y_CAUSES_X = "y_causes_x"
CONFOUNDED = "undecided_confounded"


def derive_seed(seed: int, *keys: int) -> int:
    """Independent child seed for a (seed, keys...) tuple, stable across runs."""
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1)[0])


@dataclass(frozen=True)
class DiscoveryConfig:
    permutations: int = MATRIX_PERMUTATIONS
    alpha_ind: float = 0.01
    seed: int = 0
    # None selects log(n) / n, see prune_penalty
    prune_alpha: float | None = None
    prune_threshold: float = 0.01
    max_rounds: int | None = None


def prune_penalty(n: int) -> float:
    """Default adaptive-Lasso penalty for edge pruning.

    With weights 1/|b_ols| a coefficient survives roughly when b_ols**2 >
    alpha; log(n)/n keeps true edges while a null coefficient
    (b_ols ~ N(0, 1/n)) survives with probability P(|Z| > sqrt(log n)).
    """
    return math.log(n) / n


@dataclass(frozen=True)
class CausalOrder:
    order: tuple

    def __post_init__(self):
        order = tuple(int(i) for i in self.order)
        if sorted(order) != list(range(len(order))):
            raise PreconditionError(f"{order} is not a permutation of 0..{len(order) - 1}")
        object.__setattr__(self, "order", order)

    def position(self, i: int) -> int:
        return self.order.index(i)

    def __iter__(self):
        return iter(self.order)

    def __len__(self):
        return len(self.order)


@dataclass(frozen=True)
class PairwiseDecision:
    direction: str
    p_xy: float  # x vs residual of y on x
    p_yx: float
    low_confidence: bool = False

    @property
    def score(self) -> float:
        return self.p_xy - self.p_yx


@dataclass(frozen=True, eq=False)
class DiscoveryResult:
    names: tuple
    order: CausalOrder
    weights: np.ndarray
    bidirected: frozenset = frozenset()
    diagnostics: dict = field(default_factory=dict)
    algorithm: str = "direct_lingam"

    def __post_init__(self):
        B = np.array(self.weights, dtype=float)
        p = len(self.names)
        if B.shape != (p, p) or len(self.order) != p:
            raise PreconditionError("weights, order and names disagree in size")
        if np.any(np.diag(B) != 0):
            raise PreconditionError("weight matrix diagonal must be zero")
        pos = {v: k for k, v in enumerate(self.order)}
        for i, j in zip(*np.nonzero(B)):
            if pos[j] >= pos[i]:
                raise PreconditionError(f"edge {j}->{i} contradicts the causal order")
        bi = frozenset(tuple(sorted(pr)) for pr in self.bidirected)
        for i, j in bi:
            if B[i, j] != 0 or B[j, i] != 0:
                raise PreconditionError(f"pair ({i}, {j}) is both directed and bi-directed")
        B.setflags(write=False)
        object.__setattr__(self, "weights", B)
        object.__setattr__(self, "bidirected", bi)

    def edges(self) -> list:
        """Directed edges (from, to, weight) by index, in causal order."""
        out = []
        for i in self.order:
            for j in self.order:
                if self.weights[i, j] != 0:
                    out.append((j, i, float(self.weights[i, j])))
        return out

    def to_graph(self) -> CausalGraph:
        n = self.names
        return CausalGraph(
            n,
            {(n[j], n[i]): w for j, i, w in self.edges()},
            [(n[i], n[j]) for i, j in sorted(self.bidirected)],
        )

    def to_dot(self) -> str:
        return self.to_graph().to_dot()

    def to_json(self) -> str:
        doc = {
            "algorithm": self.algorithm,
            "names": list(self.names),
            "order": [self.names[i] for i in self.order],
            "weights": self.weights.tolist(),
            "bidirected": [[self.names[i], self.names[j]] for i, j in sorted(self.bidirected)],
            "diagnostics": self.diagnostics,
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _check_matrix(m: NumericMatrix) -> np.ndarray:
    if not isinstance(m, NumericMatrix) or not m.standardized:
        raise PreconditionError("causal discovery needs a standardized NumericMatrix")
    n, p = m.shape
    if p < 2:
        raise PreconditionError("need at least two variables")
    if n <= p:
        raise PreconditionError("need more rows than variables")
    return m.data


def pairwise_direction(
    x, y, permutations: int = MATRIX_PERMUTATIONS, seed: int = 0, alpha_ind: float = 0.01
) -> PairwiseDecision:
    """Decide between x -> y, y -> x and a latent confounder from regression asymmetry.

    In the true direction the regressor is independent of the residual; in
    the reverse direction they are dependent unless the noise is Gaussian.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size or x.size < 8:
        raise PreconditionError("pairwise_direction needs equal-length inputs with n >= 8")
    p_xy = independence_test(x, residualize(y, x), permutations, derive_seed(seed, 0)).p_value
    p_yx = independence_test(y, residualize(x, y), permutations, derive_seed(seed, 1)).p_value
    ok_xy, ok_yx = p_xy > alpha_ind, p_yx > alpha_ind
    if ok_xy and not ok_yx:
        return PairwiseDecision(X_CAUSES_Y, p_xy, p_yx)
    if ok_yx and not ok_xy:
        return PairwiseDecision(Y_CAUSES_X, p_xy, p_yx)
    if not ok_xy:
        return PairwiseDecision(CONFOUNDED, p_xy, p_yx)
    # both residuals look independent; the tie goes to x -> y
    direction = X_CAUSES_Y if p_xy >= p_yx else Y_CAUSES_X
    return PairwiseDecision(direction, p_xy, p_yx, low_confidence=True)


def _exogenous_scores(X: np.ndarray, active: list) -> dict:
    factors = {i: _centered_factor(X[:, i]) for i in active}
    scores = {}
    for i in active:
        total = 0.0
        for j in active:
            if j != i:
                r = residualize(X[:, j], X[:, i])
                total += _hsic_from_factors(factors[i], _centered_factor(r))
        scores[i] = total
    return scores


def find_exogenous(m, active=None) -> int:
    """Index in ``active`` whose regressions leave the least dependent residuals.

    Candidates are scored by the summed HSIC statistic between the candidate
    and the residual of every other active variable regressed on it; ties go
    to the lowest index.
    """
    X = m.data if isinstance(m, NumericMatrix) else np.asarray(m, dtype=float)
    active = sorted(range(X.shape[1]) if active is None else set(active))
    if not active:
        raise PreconditionError("active set is empty")
    if len(active) == 1:
        return active[0]
    scores = _exogenous_scores(X, active)
    return min(active, key=lambda i: (scores[i], i))


def _estimate_weights(data: np.ndarray, predecessors: dict, cfg: DiscoveryConfig) -> np.ndarray:
    """Regress each variable on its candidate parents, pruning with the adaptive Lasso.

    The adaptive Lasso (OLS-initialized) picks the support; surviving
    coefficients are then re-estimated by OLS on that support so the
    reported strengths carry no shrinkage bias.
    """
    n, p = data.shape
    alpha = prune_penalty(n) if cfg.prune_alpha is None else cfg.prune_alpha
    B = np.zeros((p, p))
    for i, preds in predecessors.items():
        preds = list(preds)
        if not preds:
            continue
        coef = _adaptive_arrays(data[:, preds], data[:, i], alpha).coefficients
        keep = [k for k, c in zip(preds, coef) if abs(c) >= cfg.prune_threshold]
        if keep:
            B[i, keep] = initial_estimate(data[:, keep], data[:, i])
    return B


def direct_lingam(m: NumericMatrix, cfg: DiscoveryConfig = DiscoveryConfig()) -> DiscoveryResult:
    data = _check_matrix(m)
    p = data.shape[1]
    X = data.copy()
    active = list(range(p))
    order, steps = [], []
    while len(active) > 1:
        scores = _exogenous_scores(X, active)
        k = min(active, key=lambda i: (scores[i], i))
        steps.append({m.column_names[i]: scores[i] for i in active})
        order.append(k)
        active.remove(k)
        for j in active:
            X[:, j] = residualize(X[:, j], X[:, k])
    order.append(active[0])
    B = _estimate_weights(data, {order[t]: order[:t] for t in range(p)}, cfg)
    return DiscoveryResult(
        m.column_names,
        CausalOrder(tuple(order)),
        B,
        frozenset(),
        {"exogenous_scores": steps},
        "direct_lingam",
    )


def _topological(p: int, parents: dict) -> list | None:
    """Lowest-index-first topological order, or None if cyclic."""
    indeg = {i: len(parents[i]) for i in range(p)}
    children = {i: [] for i in range(p)}
    for i, ps in parents.items():
        for j in ps:
            children[j].append(i)
    ready = sorted(i for i in range(p) if indeg[i] == 0)
    out = []
    while ready:
        i = ready.pop(0)
        out.append(i)
        for c in children[i]:
            indeg[c] -= 1
            if indeg[c] == 0:
                ready.append(c)
                ready.sort()
    return out if len(out) == p else None


def _find_cycle(p: int, parents: dict) -> list:
    children = {i: [] for i in range(p)}
    for i, ps in parents.items():
        for j in ps:
            children[j].append(i)
    color = [0] * p
    stack_path = []

    def dfs(u):
        color[u] = 1
        stack_path.append(u)
        for v in sorted(children[u]):
            if color[v] == 1:
                return stack_path[stack_path.index(v):] + [v]
            if color[v] == 0:
                found = dfs(v)
                if found:
                    return found
        color[u] = 2
        stack_path.pop()
        return None

    for s in range(p):
        if color[s] == 0:
            found = dfs(s)
            if found:
                return found
    return []


def rcd_discover(m: NumericMatrix, cfg: DiscoveryConfig = DiscoveryConfig()) -> DiscoveryResult:
    """Pairwise ancestor search tolerant of hidden common causes.

    Each round re-tests every pair on residuals after regressing out the
    pair's currently known common ancestors: independent residuals mean no
    relation, a one-sided pass gives an ancestor direction, and a two-sided
    failure marks a latent confounder. Rounds repeat until the pair
    decisions stop changing (at most p rounds).
    """
    data = _check_matrix(m)
    n, p = data.shape
    max_rounds = cfg.max_rounds or p
    pairs = [(i, j) for i in range(p) for j in range(i + 1, p)]
    status = {pr: None for pr in pairs}
    detail = {}
    cache = {}
    converged = False
    rounds = 0
    changed_last = set()
    for rounds in range(1, max_rounds + 1):
        anc = {i: set() for i in range(p)}
        for (i, j), st in status.items():
            if st == "i->j":
                anc[j].add(i)
            elif st == "j->i":
                anc[i].add(j)
        new_status = {}
        for i, j in pairs:
            common = tuple(sorted(anc[i] & anc[j]))
            key = (i, j, common)
            if key not in cache:
                cache[key] = _decide_pair(data, i, j, common, cfg)
            new_status[(i, j)], detail[(i, j)] = cache[key]
        changed_last = {pr for pr in pairs if new_status[pr] != status[pr]}
        status = new_status
        if not changed_last:
            converged = True
            break

    diagnostics = {"rounds": rounds, "converged": converged, "dropped_cycle_edges": []}
    if not converged:
        diagnostics["unresolved"] = [[m.column_names[i], m.column_names[j]] for i, j in sorted(changed_last)]
        for pr in changed_last:
            status[pr] = "confounded"

    parents = {i: set() for i in range(p)}
    for (i, j), st in status.items():
        if st == "i->j":
            parents[j].add(i)
        elif st == "j->i":
            parents[i].add(j)
    # errors can leave the ancestor relation cyclic; drop the weakest link until it is not
    while _topological(p, parents) is None:
        cyc = _find_cycle(p, parents)
        links = list(zip(cyc, cyc[1:]))

        def strength(link):
            a, b = link
            d = detail[(min(a, b), max(a, b))]
            return (max(d.p_xy, d.p_yx), a, b)

        a, b = min(links, key=strength)
        parents[b].discard(a)
        status[(min(a, b), max(a, b))] = None
        diagnostics["dropped_cycle_edges"].append([m.column_names[a], m.column_names[b]])

    order = _topological(p, parents)
    B = _estimate_weights(data, {i: sorted(parents[i], key=order.index) for i in range(p)}, cfg)
    bidirected = frozenset(pr for pr, st in status.items() if st == "confounded")
    diagnostics["pairs"] = {
        f"{m.column_names[i]}|{m.column_names[j]}": status[(i, j)] or "none" for i, j in pairs
    }
    return DiscoveryResult(m.column_names, CausalOrder(tuple(order)), B, bidirected, diagnostics, "rcd")


def _decide_pair(data, i, j, common, cfg):
    ri = residualize_many(data[:, i], data[:, list(common)])
    rj = residualize_many(data[:, j], data[:, list(common)])
    seed = derive_seed(cfg.seed, i, j, *common)
    p_ind = independence_test(ri, rj, cfg.permutations, derive_seed(seed, 2)).p_value
    if p_ind > cfg.alpha_ind:
        return "independent", PairwiseDecision("independent", p_ind, p_ind)
    d = pairwise_direction(ri, rj, cfg.permutations, seed, cfg.alpha_ind)
    st = {X_CAUSES_Y: "i->j", Y_CAUSES_X: "j->i", CONFOUNDED: "confounded"}[d.direction]
    return st, d
