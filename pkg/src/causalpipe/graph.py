"""Causal DAGs and the graphical criteria used for identification.

Graphs are immutable.  Every query is a pure function of its arguments, so a
graph can be shared freely between threads.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .errors import CycleError, GraphError, SearchLimitError, UnknownVariableError

# Largest candidate pool searched exhaustively (2**12 subsets).
MAX_SEARCH_POOL = 12

RELATIVE_KINDS = ("parents", "children", "ancestors", "descendants")


def _as_set(names) -> frozenset:
    if names is None:
        return frozenset()
    if isinstance(names, str):
        return frozenset([names])
    return frozenset(names)


def sort_key(names: Iterable[str]):
    """Ordering used for every returned collection: size, then lexicographic."""
    members = sorted(names)
    return (len(members), members)


@dataclass(frozen=True)
class CausalGraph:
    """A DAG over named variables, some of which may be latent."""

    nodes: frozenset = frozenset()
    edges: frozenset = frozenset()
    latent: frozenset = frozenset()
    _parents: dict = field(default=None, init=False, repr=False, compare=False)
    _children: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        edges = frozenset((str(a), str(b)) for a, b in self.edges)
        nodes = frozenset(str(n) for n in self.nodes)
        nodes = nodes | {a for a, _ in edges} | {b for _, b in edges}
        latent = frozenset(self.latent)
        for n in nodes:
            if not n:
                raise GraphError("variable names must be nonempty")
        if latent - nodes:
            raise UnknownVariableError(latent - nodes)
        loops = [a for a, b in edges if a == b]
        if loops:
            raise CycleError([loops[0], loops[0]])
        parents = {n: set() for n in nodes}
        children = {n: set() for n in nodes}
        for a, b in edges:
            parents[b].add(a)
            children[a].add(b)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "latent", latent)
        object.__setattr__(self, "_parents", {k: frozenset(v) for k, v in parents.items()})
        object.__setattr__(self, "_children", {k: frozenset(v) for k, v in children.items()})
        self.topological_order()

    @classmethod
    def from_edges(cls, edges, nodes=(), latent=()) -> "CausalGraph":
        return cls(nodes=frozenset(nodes), edges=frozenset(edges), latent=frozenset(latent))

    @property
    def observed(self) -> Mapping[str, bool]:
        return {n: n not in self.latent for n in sorted(self.nodes)}

    def is_observed(self, name: str) -> bool:
        self.check(name)
        return name not in self.latent

    def check(self, *names) -> None:
        """Raise UnknownVariableError unless every name is a node."""
        missing = set()
        for item in names:
            missing |= _as_set(item) - self.nodes
        if missing:
            raise UnknownVariableError(missing)

    def parents(self, name: str) -> frozenset:
        return self._parents[name]

    def children(self, name: str) -> frozenset:
        return self._children[name]

    def topological_order(self) -> list:
        """Kahn's algorithm with lexicographic tie-breaking; raises CycleError."""
        indegree = {n: len(p) for n, p in self._parents.items()}
        ready = sorted(n for n, d in indegree.items() if d == 0)
        order = []
        while ready:
            n = ready.pop(0)
            order.append(n)
            for c in sorted(self._children[n]):
                indegree[c] -= 1
                if indegree[c] == 0:
                    ready.append(c)
            ready.sort()
        if len(order) != len(self.nodes):
            raise CycleError(self._find_cycle(set(self.nodes) - set(order)))
        return order

    def _find_cycle(self, remaining):
        # Every node left after Kahn's algorithm has a parent inside `remaining`.
        start = min(remaining)
        path, seen = [start], {start: 0}
        node = start
        while True:
            node = min(p for p in self._parents[node] if p in remaining)
            if node in seen:
                cycle = path[seen[node]:] + [node]
                return list(reversed(cycle))
            seen[node] = len(path)
            path.append(node)

    def without_outgoing(self, sources) -> "CausalGraph":
        sources = _as_set(sources)
        edges = frozenset(e for e in self.edges if e[0] not in sources)
        return CausalGraph(nodes=self.nodes, edges=edges, latent=self.latent)

    def with_latent(self, names) -> "CausalGraph":
        names = _as_set(names)
        self.check(names)
        return CausalGraph(nodes=self.nodes, edges=self.edges, latent=self.latent | names)

    def add_common_cause(self, name: str, targets) -> "CausalGraph":
        """Return a copy with a new observed root `name` pointing at each target."""
        if name in self.nodes:
            raise GraphError(f"variable {name!r} already exists")
        targets = _as_set(targets)
        self.check(targets)
        edges = self.edges | {(name, t) for t in targets}
        return CausalGraph(nodes=self.nodes | {name}, edges=edges, latent=self.latent)


def _reach(g: CausalGraph, start: frozenset, step) -> set:
    seen = set()
    queue = deque(start)
    while queue:
        n = queue.popleft()
        for m in step(n):
            if m not in seen:
                seen.add(m)
                queue.append(m)
    return seen


def relatives(g: CausalGraph, x: str, kind: str) -> frozenset:
    """Parents, children, ancestors or descendants of `x` (never including `x`)."""
    g.check(x)
    if kind == "parents":
        return g.parents(x)
    if kind == "children":
        return g.children(x)
    if kind == "ancestors":
        return frozenset(_reach(g, {x}, g.parents) - {x})
    if kind == "descendants":
        return frozenset(_reach(g, {x}, g.children) - {x})
    raise ValueError(f"kind must be one of {RELATIVE_KINDS}, got {kind!r}")


def ancestors_of(g: CausalGraph, names) -> frozenset:
    names = _as_set(names)
    return frozenset(_reach(g, names, g.parents) - names)


def descendants_of(g: CausalGraph, names) -> frozenset:
    names = _as_set(names)
    return frozenset(_reach(g, names, g.children) - names)


def d_separated(g: CausalGraph, x, y, z=()) -> bool:
    """True iff `z` d-separates `x` from `y`.

    Uses the moralized ancestral graph: restrict to ancestors of x, y and z,
    marry co-parents, drop directions, delete z and test connectivity.
    """
    x, y, z = _as_set(x), _as_set(y), _as_set(z)
    g.check(x, y, z)
    if x & y or x & z or y & z:
        raise GraphError("x, y and z must be pairwise disjoint")
    if not x or not y:
        return True
    keep = x | y | z
    keep = keep | ancestors_of(g, keep)
    adjacent = {n: set() for n in keep}
    for n in keep:
        pa = [p for p in g.parents(n)]
        for p in pa:
            adjacent[n].add(p)
            adjacent[p].add(n)
        for a, b in itertools.combinations(pa, 2):
            adjacent[a].add(b)
            adjacent[b].add(a)
    seen = set(x)
    queue = deque(x)
    while queue:
        n = queue.popleft()
        for m in adjacent[n]:
            if m in z or m in seen:
                continue
            if m in y:
                return False
            seen.add(m)
            queue.append(m)
    return True


def backdoor_holds(g: CausalGraph, causes, effects, z) -> bool:
    """Back-door criterion for sets: z observed, free of descendants of `causes`,
    and d-separating causes from effects once the causes' outgoing edges are cut."""
    causes, effects, z = _as_set(causes), _as_set(effects), _as_set(z)
    if z & g.latent:
        return False
    if z & descendants_of(g, causes):
        return False
    return d_separated(g.without_outgoing(causes), causes, effects, z)


def is_valid_backdoor_set(g: CausalGraph, t: str, y: str, z) -> bool:
    z = _as_set(z)
    g.check(t, y, z)
    if t == y:
        raise GraphError("treatment and outcome must differ")
    if t in z or y in z:
        raise GraphError("adjustment set must exclude treatment and outcome")
    return backdoor_holds(g, {t}, {y}, z)


def canonical_backdoor_set(g: CausalGraph, t: str, y: str) -> frozenset:
    """Observed ancestors of t or y that are not descendants of t."""
    g.check(t, y)
    pool = ancestors_of(g, {t, y}) - descendants_of(g, {t}) - {t, y}
    return frozenset(n for n in pool if n not in g.latent)


def _backdoor_pool(g: CausalGraph, t: str, y: str) -> list:
    # Minimal separators always lie inside the ancestors of the separated sets.
    return sorted(canonical_backdoor_set(g, t, y))


def _subsets(pool, max_size):
    for k in range(0, min(max_size, len(pool)) + 1):
        yield from itertools.combinations(pool, k)


def enumerate_backdoor_sets(g: CausalGraph, t: str, y: str, max_size: int | None = None) -> list:
    """All minimal valid back-door sets of size <= max_size.

    The canonical set leads the list when it is itself minimal; the rest are
    ordered by size then lexicographically.
    """
    g.check(t, y)
    if t == y:
        raise GraphError("treatment and outcome must differ")
    pool = _backdoor_pool(g, t, y)
    if max_size is None:
        max_size = len(pool)
    if len(pool) > MAX_SEARCH_POOL:
        canonical = canonical_backdoor_set(g, t, y)
        status = "valid" if backdoor_holds(g, {t}, {y}, canonical) else "not valid"
        raise SearchLimitError(
            f"{len(pool)} candidate adjustment variables exceed the exhaustive-search "
            f"limit of {MAX_SEARCH_POOL}; the canonical set {sorted(canonical)} is {status}. "
            "Supply an adjustment set manually."
        )
    valid = []
    minimal = []
    for combo in _subsets(pool, max_size):
        z = frozenset(combo)
        if not backdoor_holds(g, {t}, {y}, z):
            continue
        if not any(v < z for v in valid):
            minimal.append(z)
        valid.append(z)
    canonical = canonical_backdoor_set(g, t, y)
    if canonical in minimal:
        minimal.remove(canonical)
        minimal.insert(0, canonical)
    return minimal


def _intercepts(g: CausalGraph, t: str, y: str, m: frozenset) -> bool:
    blocked = lambda n: frozenset(c for c in g.children(n) if c not in m)
    return y not in _reach(g, {t}, blocked)


def is_valid_frontdoor_set(g: CausalGraph, t: str, y: str, m) -> bool:
    m = _as_set(m)
    g.check(t, y, m)
    if not m or m & g.latent or t in m or y in m:
        return False
    return (
        _intercepts(g, t, y, m)
        and backdoor_holds(g, {t}, m, frozenset())
        and backdoor_holds(g, m, {y}, {t})
    )


def find_frontdoor_set(g: CausalGraph, t: str, y: str, max_size: int | None = None):
    """Smallest observed set satisfying the front-door criterion, or None."""
    g.check(t, y)
    if t == y:
        raise GraphError("treatment and outcome must differ")
    pool = sorted(find_mediation(g, t, y))
    if not pool:
        return None
    if max_size is None:
        max_size = len(pool)
    if len(pool) > MAX_SEARCH_POOL:
        raise SearchLimitError(
            f"{len(pool)} candidate mediators exceed the exhaustive-search limit of "
            f"{MAX_SEARCH_POOL}; supply a front-door set manually."
        )
    for k in range(1, min(max_size, len(pool)) + 1):
        for combo in itertools.combinations(pool, k):
            if is_valid_frontdoor_set(g, t, y, combo):
                return frozenset(combo)
    return None


def is_instrument(g: CausalGraph, t: str, y: str, z: str) -> bool:
    g.check(t, y, z)
    if z in (t, y) or z in g.latent or z in descendants_of(g, {t}):
        return False
    relevant = not d_separated(g, {z}, {t})
    excluded = d_separated(g.without_outgoing({t}), {z}, {y})
    return relevant and excluded


def find_instruments(g: CausalGraph, t: str, y: str) -> frozenset:
    """Observed unconditional instruments for the effect of t on y."""
    g.check(t, y)
    if t == y:
        raise GraphError("treatment and outcome must differ")
    return frozenset(z for z in g.nodes if is_instrument(g, t, y, z))


def find_mediation(g: CausalGraph, t: str, y: str) -> frozenset:
    """Observed variables on some directed path from t to y."""
    g.check(t, y)
    if t == y:
        raise GraphError("treatment and outcome must differ")
    between = descendants_of(g, {t}) & ancestors_of(g, {y})
    return frozenset(n for n in between if n not in g.latent)


def augment_with_dataset_columns(g: CausalGraph, columns, t: str, y: str) -> CausalGraph:
    """Add every column missing from the graph as an observed common cause of t and y."""
    columns = list(columns)
    g.check(t, y)
    if t not in columns or y not in columns:
        raise GraphError("columns must include the treatment and the outcome")
    clash = sorted(c for c in columns if c in g.latent)
    if clash:
        raise GraphError(f"column(s) {clash} collide with latent variables in the graph")
    new = [c for c in dict.fromkeys(columns) if c not in g.nodes]
    if not new:
        return g
    edges = set(g.edges)
    for c in new:
        edges.add((c, t))
        edges.add((c, y))
    return CausalGraph(nodes=g.nodes | set(new), edges=frozenset(edges), latent=g.latent)
