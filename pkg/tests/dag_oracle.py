"""Brute-force oracles for graph queries on small DAGs.

DAGs are enumerated once per isomorphism class: every DAG has a topological
order, so upper-triangular adjacency patterns cover all of them, and two
patterns are merged when some node relabelling maps one onto the other.
Queries on one representative with every query triple cover every labelled
copy of the class.

Separation is decided by listing every simple path of the skeleton and
applying the chain / fork / collider rules to each path directly.
"""

from __future__ import annotations

import itertools

import numpy as np

# number of unlabelled DAGs on n nodes, n = 1..6
KNOWN_CLASS_COUNTS = {1: 1, 2: 2, 3: 6, 4: 31, 5: 302, 6: 5984}


def dag_classes(n: int) -> list:
    """One edge list per isomorphism class of DAGs on nodes 0..n-1."""
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    m = len(pairs)
    codes = np.arange(2**m, dtype=np.int64)
    bits = [(codes >> e) & 1 for e in range(m)]
    best = None
    for perm in itertools.permutations(range(n)):
        key = np.zeros_like(codes)
        for e, (i, j) in enumerate(pairs):
            key |= bits[e] << (perm[i] * n + perm[j])
        best = key if best is None else np.minimum(best, key)
    _, first = np.unique(best, return_index=True)
    return [[pairs[e] for e in range(m) if (c >> e) & 1] for c in sorted(first.tolist())]


class PathOracle:
    """All simple skeleton paths of a DAG on nodes 0..n-1, with blocking masks."""

    def __init__(self, n: int, edges):
        self.n = n
        self.edges = set(edges)
        nbrs = {v: set() for v in range(n)}
        for u, v in edges:
            nbrs[u].add(v)
            nbrs[v].add(u)
        children = {v: [b for a, b in edges if a == v] for v in range(n)}
        # desc[v]: bitmask of v and all its descendants
        self.desc = [0] * n
        for v in range(n):
            seen, stack = 1 << v, [v]
            while stack:
                for c in children[stack.pop()]:
                    if not seen >> c & 1:
                        seen |= 1 << c
                        stack.append(c)
            self.desc[v] = seen
        # paths[(s, t)]: list of (noncollider mask, collider list, first edge points into s)
        self.paths = {(s, t): [] for s in range(n) for t in range(n) if s != t}

        def extend(path):
            for nxt in sorted(nbrs[path[-1]]):
                if nxt in path:
                    continue
                p = path + [nxt]
                self.paths[(p[0], nxt)].append(self._describe(p))
                extend(p)

        for s in range(n):
            extend([s])

    def _describe(self, p):
        noncol, col = 0, []
        for k in range(1, len(p) - 1):
            into_from_left = (p[k - 1], p[k]) in self.edges
            into_from_right = (p[k + 1], p[k]) in self.edges
            if into_from_left and into_from_right:
                col.append(p[k])
            else:
                noncol |= 1 << p[k]
        return noncol, tuple(col), (p[1], p[0]) in self.edges

    def _active(self, path, z: int) -> bool:
        noncol, col, _ = path
        return not noncol & z and all(self.desc[c] & z for c in col)

    def connected(self, z: int) -> list:
        """conn[u]: bitmask of nodes with an active path to u given z."""
        conn = [0] * self.n
        for (s, t), paths in self.paths.items():
            if s < t and any(self._active(p, z) for p in paths):
                conn[s] |= 1 << t
                conn[t] |= 1 << s
        return conn

    def d_separated(self, a: int, b: int, z: int) -> bool:
        conn = self.connected(z)
        return not any(conn[u] & b for u in range(self.n) if a >> u & 1)

    def backdoor(self, t: int, y: int, z: int) -> bool:
        if z & (self.desc[t] & ~(1 << t)):
            return False
        return not any(into and self._active((nc, col, into), z) for nc, col, into in self.paths[(t, y)])


def bits(mask: int, n: int) -> list:
    return [v for v in range(n) if mask >> v & 1]


def compare_exhaustive(max_nodes: int, d_separated, satisfies_backdoor, CausalGraph) -> dict:
    """Run every disjoint (a, b, z) separation query and every backdoor query on
    every DAG class with up to ``max_nodes`` nodes; collect disagreements."""
    stats = {"graphs": 0, "dsep_queries": 0, "backdoor_queries": 0, "disagreements": []}
    for n in range(1, max_nodes + 1):
        names = [f"v{k}" for k in range(n)]
        for edges in dag_classes(n):
            stats["graphs"] += 1
            g = CausalGraph(names, [(names[u], names[v]) for u, v in edges])
            oracle = PathOracle(n, edges)
            full = (1 << n) - 1
            for z in range(1 << n):
                zs = {names[v] for v in bits(z, n)}
                conn = oracle.connected(z)
                rest = bits(full & ~z, n)
                for labels in itertools.product((0, 1, 2), repeat=len(rest)):
                    a = [v for v, l in zip(rest, labels) if l == 1]
                    b = [v for v, l in zip(rest, labels) if l == 2]
                    if not a or not b or a[0] > b[0]:
                        continue
                    bmask = sum(1 << v for v in b)
                    expect = not any(conn[u] & bmask for u in a)
                    got = d_separated(g, {names[v] for v in a}, {names[v] for v in b}, zs)
                    stats["dsep_queries"] += 1
                    if got != expect:
                        stats["disagreements"].append(("dsep", edges, a, b, bits(z, n)))
                for t in range(n):
                    for y in range(n):
                        if t == y or (z >> t & 1) or (z >> y & 1):
                            continue
                        expect = oracle.backdoor(t, y, z)
                        got = satisfies_backdoor(g, names[t], names[y], zs)
                        stats["backdoor_queries"] += 1
                        if got != expect:
                            stats["disagreements"].append(("backdoor", edges, t, y, bits(z, n)))
    return stats
