"""Causal graphs with directed and bi-directed edges, d-separation and
backdoor adjustment.

Bi-directed edges stand for a latent common parent. Every separation query
first replaces each ``a <-> b`` with a fresh hidden node ``L -> a, L -> b``.
"""

from __future__ import annotations

import itertools
import re
from pathlib import Path
from typing import Iterable

from .errors import BudgetError, GraphError, PreconditionError

LATENT_PREFIX = "__latent__"


def _pair(a, b) -> frozenset:
    return frozenset((a, b))


class CausalGraph:
    """Immutable mixed graph: weighted directed edges plus bi-directed pairs."""

    def __init__(self, nodes: Iterable[str], directed=(), bidirected=()):
        nodes = tuple(nodes)
        if len(set(nodes)) != len(nodes):
            raise GraphError("duplicate node names")
        known = set(nodes)
        if isinstance(directed, dict):
            directed = [(u, v, w) for (u, v), w in directed.items()]
        edges = {}
        for e in directed:
            u, v = e[0], e[1]
            w = e[2] if len(e) > 2 else None
            self._check_nodes(known, u, v)
            if u == v:
                raise GraphError(f"self-loop on {u!r}")
            edges[(u, v)] = None if w is None else float(w)
        bi = set()
        for a, b in bidirected:
            self._check_nodes(known, a, b)
            if a == b:
                raise GraphError(f"bi-directed self-loop on {a!r}")
            bi.add(_pair(a, b))
        for u, v in edges:
            if _pair(u, v) in bi:
                raise GraphError(f"pair ({u!r}, {v!r}) is both directed and bi-directed")
        self._nodes = nodes
        self._edges = edges
        self._bidirected = frozenset(bi)
        self._parents = {n: [] for n in nodes}
        self._children = {n: [] for n in nodes}
        for u, v in edges:
            self._parents[v].append(u)
            self._children[u].append(v)
        self._order = self._toposort()

    @staticmethod
    def _check_nodes(known, *names):
        for n in names:
            if n not in known:
                raise GraphError(f"unknown node {n!r}")

    def _toposort(self) -> tuple:
        indeg = {n: len(self._parents[n]) for n in self._nodes}
        ready = [n for n in self._nodes if indeg[n] == 0]
        out = []
        while ready:
            n = ready.pop(0)
            out.append(n)
            for c in self._children[n]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
        if len(out) != len(self._nodes):
            raise GraphError("directed edges contain a cycle")
        return tuple(out)

    # -- accessors ---------------------------------------------------------

    @property
    def nodes(self) -> tuple:
        return self._nodes

    @property
    def directed(self) -> dict:
        return dict(self._edges)

    @property
    def bidirected(self) -> frozenset:
        return self._bidirected

    def weight(self, u, v):
        return self._edges[(u, v)]

    def has_edge(self, u, v) -> bool:
        return (u, v) in self._edges

    def parents(self, v) -> list:
        self._require(v)
        return list(self._parents[v])

    def children(self, v) -> list:
        self._require(v)
        return list(self._children[v])

    def topological_order(self) -> tuple:
        return self._order

    def _require(self, v):
        if v not in self._parents:
            raise GraphError(f"unknown node {v!r}")

    def __contains__(self, v) -> bool:
        return v in self._parents

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, CausalGraph)
            and set(self._nodes) == set(other._nodes)
            and self._edges == other._edges
            and self._bidirected == other._bidirected
        )

    def __repr__(self) -> str:
        return (
            f"CausalGraph({len(self._nodes)} nodes, {len(self._edges)} directed, "
            f"{len(self._bidirected)} bidirected)"
        )

    # -- derived graphs ----------------------------------------------------

    def without_outgoing(self, v) -> "CausalGraph":
        self._require(v)
        edges = {e: w for e, w in self._edges.items() if e[0] != v}
        return CausalGraph(self._nodes, edges, [tuple(p) for p in self._bidirected])

    def expand_latents(self) -> "CausalGraph":
        """Replace every bi-directed pair with an explicit hidden parent."""
        if not self._bidirected:
            return self
        nodes = list(self._nodes)
        edges = dict(self._edges)
        pairs = sorted(tuple(sorted(p)) for p in self._bidirected)
        for k, (a, b) in enumerate(pairs):
            latent = f"{LATENT_PREFIX}{k}"
            while latent in self._parents:
                latent += "_"
            nodes.append(latent)
            edges[(latent, a)] = None
            edges[(latent, b)] = None
        return CausalGraph(nodes, edges)

    # -- serialization -----------------------------------------------------

    def to_dot(self, name: str = "G") -> str:
        lines = [f"digraph {name} {{"]
        for n in self._nodes:
            lines.append(f"  {_dot_quote(n)};")
        for (u, v), w in self._edges.items():
            attr = f' [label="{w:.4f}"]' if w is not None else ""
            lines.append(f"  {_dot_quote(u)} -> {_dot_quote(v)}{attr};")
        for a, b in sorted(tuple(sorted(p)) for p in self._bidirected):
            lines.append(f"  {_dot_quote(a)} -> {_dot_quote(b)} [dir=both, style=dashed];")
        lines.append("}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_dot(cls, text: str) -> "CausalGraph":
        nodes, edges, bi = [], {}, []
        body = text.strip()
        if not body.startswith(("digraph", "strict digraph")) or "{" not in body:
            raise GraphError("not a DOT digraph")
        body = body[body.index("{") + 1 : body.rindex("}")]
        for stmt in _split_statements(body):
            m = _DOT_EDGE.fullmatch(stmt)
            if m:
                u, v = _dot_unquote(m.group(1)), _dot_unquote(m.group(2))
                attrs = _parse_attrs(m.group(3) or "")
                for n in (u, v):
                    if n not in nodes:
                        nodes.append(n)
                if attrs.get("dir") == "both":
                    bi.append((u, v))
                else:
                    label = attrs.get("label")
                    edges[(u, v)] = float(label) if label not in (None, "") else None
                continue
            m = _DOT_NODE.fullmatch(stmt)
            if m:
                n = _dot_unquote(m.group(1))
                if n in ("graph", "node", "edge"):
                    continue
                if n not in nodes:
                    nodes.append(n)
                continue
            if "=" in stmt and "->" not in stmt:
                continue  # graph-level attribute
            raise GraphError(f"cannot parse DOT statement: {stmt!r}")
        return cls(nodes, edges, bi)

    def to_edgelist(self) -> str:
        lines = [n for n in self._nodes]
        for (u, v), w in self._edges.items():
            lines.append(f"{u} -> {v}" + (f" [{w!r}]" if w is not None else ""))
        for a, b in sorted(tuple(sorted(p)) for p in self._bidirected):
            lines.append(f"{a} <-> {b}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_edgelist(cls, text: str) -> "CausalGraph":
        nodes, edges, bi = [], {}, []

        def add(n):
            if n not in nodes:
                nodes.append(n)

        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if " <-> " in line:
                a, b = (s.strip() for s in line.split(" <-> ", 1))
                add(a), add(b)
                bi.append((a, b))
            elif " -> " in line:
                u, rest = (s.strip() for s in line.split(" -> ", 1))
                m = re.fullmatch(r"(.*?)\s*\[([^\]]*)\]", rest)
                v, w = (m.group(1).strip(), float(m.group(2))) if m else (rest, None)
                add(u), add(v)
                edges[(u, v)] = w
            else:
                add(line)
        return cls(nodes, edges, bi)

    def write(self, path) -> None:
        path = Path(path)
        text = self.to_dot() if path.suffix == ".dot" else self.to_edgelist()
        path.write_text(text, encoding="utf-8")

    @classmethod
    def read(cls, path) -> "CausalGraph":
        path = Path(path)
        text = path.read_text(encoding="utf-8")
        return cls.from_dot(text) if path.suffix == ".dot" else cls.from_edgelist(text)


_ID = r'"(?:[^"\\]|\\.)*"|[A-Za-z_0-9.]+'
_DOT_EDGE = re.compile(rf"({_ID})\s*->\s*({_ID})\s*(?:\[(.*)\])?", re.S)
_DOT_NODE = re.compile(rf"({_ID})\s*(?:\[.*\])?", re.S)


def _dot_quote(name: str) -> str:
    return '"' + name.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _dot_unquote(token: str) -> str:
    if token.startswith('"'):
        return re.sub(r"\\(.)", r"\1", token[1:-1])
    return token


def _split_statements(body: str) -> list[str]:
    out, cur, quoted, esc = [], [], False, False
    for ch in body:
        if quoted:
            cur.append(ch)
            if esc:
                esc = False
            elif ch == "\\":
                esc = True
            elif ch == '"':
                quoted = False
            continue
        if ch == '"':
            quoted = True
            cur.append(ch)
        elif ch in ";\n":
            stmt = "".join(cur).strip()
            if stmt:
                out.append(stmt)
            cur = []
        else:
            cur.append(ch)
    stmt = "".join(cur).strip()
    if stmt:
        out.append(stmt)
    return out


def _parse_attrs(text: str) -> dict:
    attrs = {}
    for m in re.finditer(r'(\w+)\s*=\s*("(?:[^"\\]|\\.)*"|[^,\s\]]+)', text):
        attrs[m.group(1)] = _dot_unquote(m.group(2))
    return attrs


# -- queries ---------------------------------------------------------------


def descendants(g: CausalGraph, v) -> set:
    """Nodes reachable from v along directed edges, v excluded."""
    g._require(v)
    seen, stack = set(), list(g._children[v])
    while stack:
        n = stack.pop()
        if n not in seen:
            seen.add(n)
            stack.extend(g._children[n])
    return seen


def ancestors(g: CausalGraph, vs: Iterable) -> set:
    """Nodes with a directed path into any of ``vs``, the nodes themselves included."""
    seen, stack = set(), list(vs)
    while stack:
        n = stack.pop()
        if n not in seen:
            seen.add(n)
            stack.extend(g._parents[n])
    return seen


def _as_set(g: CausalGraph, nodes) -> set:
    if isinstance(nodes, str):
        nodes = {nodes}
    s = set(nodes)
    for n in s:
        g._require(n)
    return s


def _reachable(g: CausalGraph, sources: set, z: set) -> set:
    """Nodes with an active trail from ``sources`` given ``z`` (Bayes-ball)."""
    anc_z = ancestors(g, z)
    parents, children = g._parents, g._children
    visited, reach = set(), set()
    # True = arrived from a child (moving up), False = arrived from a parent
    stack = [(s, True) for s in sources]
    while stack:
        node, up = stack.pop()
        if (node, up) in visited:
            continue
        visited.add((node, up))
        blocked = node in z
        if not blocked:
            reach.add(node)
        if up:
            if not blocked:
                stack.extend((p, True) for p in parents[node])
                stack.extend((c, False) for c in children[node])
        else:
            if not blocked:
                stack.extend((c, False) for c in children[node])
            if node in anc_z:
                stack.extend((p, True) for p in parents[node])
    return reach


def d_separated(g: CausalGraph, a, b, z=()) -> bool:
    """True iff every path between sets a and b is blocked by z."""
    a, b, z = _as_set(g, a), _as_set(g, b), _as_set(g, z)
    if a & b or a & z or b & z:
        raise PreconditionError("d-separation query sets must be disjoint")
    if not a or not b:
        return True
    h = g.expand_latents()
    return not (_reachable(h, a, z) & b)


def _backdoor_args(g, treatment, outcome, z):
    g._require(treatment)
    g._require(outcome)
    if treatment == outcome:
        raise PreconditionError("treatment and outcome must differ")
    z = _as_set(g, z)
    if treatment in z or outcome in z:
        raise PreconditionError("adjustment set must exclude treatment and outcome")
    return z


def satisfies_backdoor(g: CausalGraph, treatment, outcome, z=()) -> bool:
    """Backdoor criterion: z holds no descendant of the treatment and blocks
    every path into the treatment."""
    z = _backdoor_args(g, treatment, outcome, z)
    if z & descendants(g, treatment):
        return False
    h = g.expand_latents().without_outgoing(treatment)
    return not (outcome in _reachable(h, {treatment}, z))


def open_backdoor_path(g: CausalGraph, treatment, outcome, z=()):
    """An unblocked path into the treatment, as a node list, or None.

    Used to explain identification failures; exponential in the worst case.
    """
    z = _backdoor_args(g, treatment, outcome, z)
    h = g.expand_latents()
    anc_z = ancestors(h, z)
    nbrs = {n: [(p, "in") for p in h._parents[n]] + [(c, "out") for c in h._children[n]] for n in h.nodes}

    def active(path, arrows):
        # arrows[k] is the edge path[k] - path[k+1]: "in" when it points at path[k]
        for k in range(1, len(path) - 1):
            collider = arrows[k - 1] == "out" and arrows[k] == "in"
            if collider and path[k] not in anc_z:
                return False
            if not collider and path[k] in z:
                return False
        return True

    def walk(path, arrows):
        node = path[-1]
        if node == outcome:
            return path if active(path, arrows) else None
        for nxt, kind in nbrs[node]:
            if nxt in path or (len(path) == 1 and kind != "in"):
                continue
            found = walk(path + [nxt], arrows + [kind])
            if found:
                return found
        return None

    return walk([treatment], [])


def minimal_backdoor_sets(g: CausalGraph, treatment, outcome, max_nodes: int = 20) -> list:
    """All inclusion-minimal backdoor adjustment sets, by size then name order."""
    _backdoor_args(g, treatment, outcome, ())
    if len(g.nodes) > max_nodes:
        raise BudgetError(
            f"graph has {len(g.nodes)} nodes > {max_nodes}; pass an explicit adjustment set"
        )
    excluded = descendants(g, treatment) | {treatment, outcome}
    candidates = sorted(n for n in g.nodes if n not in excluded)
    found = []
    for size in range(len(candidates) + 1):
        for combo in itertools.combinations(candidates, size):
            s = frozenset(combo)
            if any(m <= s for m in found):
                continue
            if satisfies_backdoor(g, treatment, outcome, s):
                found.append(s)
    return sorted(found, key=lambda s: (len(s), sorted(s)))
