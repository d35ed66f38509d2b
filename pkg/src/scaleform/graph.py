"""Sensing graphs, 2-rootedness and dual-entry path (DEP) decompositions.

Edges are ordered pairs ``(i, k)`` meaning agent ``k`` measures agent ``i``.
Agents are labelled ``1..n``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import networkx as nx

from .errors import (
    ArgumentError,
    ConsistencyError,
    ConstructionError,
    DecompositionError,
    GraphShapeError,
)

Edge = tuple[int, int]


@dataclass(frozen=True)
class SensingGraph:
    """Directed sensing graph on agents ``1..n``."""

    n: int
    edges: frozenset[Edge]
    _in: dict = field(init=False, repr=False, compare=False, hash=False)
    _out: dict = field(init=False, repr=False, compare=False, hash=False)

    def __init__(self, n: int, edges: Iterable[Sequence[int]] = ()) -> None:
        n = int(n)
        if n < 0:
            raise ArgumentError(f"agent count must be non-negative, got {n}")
        es = frozenset((int(i), int(k)) for i, k in edges)
        for i, k in es:
            if i == k:
                raise GraphShapeError(f"self-loop on agent {i}")
            if not (1 <= i <= n and 1 <= k <= n):
                raise GraphShapeError(f"edge ({i}, {k}) has a label outside 1..{n}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "edges", es)
        ins: dict[int, set[int]] = {v: set() for v in range(1, n + 1)}
        outs: dict[int, set[int]] = {v: set() for v in range(1, n + 1)}
        for i, k in es:
            ins[k].add(i)
            outs[i].add(k)
        object.__setattr__(self, "_in", {v: frozenset(s) for v, s in ins.items()})
        object.__setattr__(self, "_out", {v: frozenset(s) for v, s in outs.items()})

    @property
    def vertices(self) -> range:
        return range(1, self.n + 1)

    def in_neighbors(self, k: int) -> frozenset[int]:
        """Agents measured by ``k`` (the neighbor set N_k)."""
        return self._in[k]

    def out_neighbors(self, i: int) -> frozenset[int]:
        return self._out[i]

    def is_bidirectional(self) -> bool:
        return all((k, i) in self.edges for i, k in self.edges)

    def require_bidirectional(self) -> None:
        for i, k in sorted(self.edges):
            if (k, i) not in self.edges:
                raise GraphShapeError(
                    f"graph is not bidirectional: edge ({i}, {k}) has no reverse"
                )

    def symmetrized(self) -> "SensingGraph":
        return SensingGraph(self.n, self.edges | {(k, i) for i, k in self.edges})

    def sorted_edges(self) -> list[Edge]:
        return sorted(self.edges)

    def _undirected(self) -> nx.Graph:
        h = nx.Graph()
        h.add_nodes_from(self.vertices)
        h.add_edges_from(e for e in self.sorted_edges() if e[0] < e[1])
        return h


def _check_agent(g: SensingGraph, v: int) -> None:
    if not 1 <= v <= g.n:
        raise ArgumentError(f"agent {v} outside 1..{g.n}")


def _disjoint_paths(
    g: SensingGraph, sources: Iterable[int], target: int, drop_internal: bool = False
) -> list[list[int]]:
    """Up to two vertex-disjoint bidirectional paths from ``sources`` to ``target``.

    Each returned path starts at a distinct source and ends at ``target``.
    Computed by unit vertex-capacity max-flow from a super source.
    With ``drop_internal`` edges between two sources are ignored.
    """
    src = set(sources)
    h = g._undirected()
    if drop_internal:
        h.remove_edges_from([(a, b) for a, b in list(h.edges) if a in src and b in src])
    root = ("source",)
    h.add_node(root)
    h.add_edges_from((root, s) for s in sorted(src))
    try:
        paths = list(nx.node_disjoint_paths(h, root, target, cutoff=2))
    except nx.NetworkXNoPath:
        return []
    return sorted((p[1:] for p in paths), key=lambda p: (len(p), p))


def two_reachable(g: SensingGraph, u: Iterable[int], i: int) -> bool:
    """Whether agent ``i`` is 2-reachable from the agent set ``u``.

    Equivalently (Menger), there are two bidirectional paths from distinct
    members of ``u`` to ``i`` sharing no agent other than ``i``.
    """
    g.require_bidirectional()
    u = set(u)
    if len(u) < 2:
        raise ArgumentError("2-reachability needs a source set with at least two agents")
    for v in u:
        _check_agent(g, v)
    _check_agent(g, i)
    if i in u:
        raise ArgumentError(f"agent {i} belongs to the source set")
    return len(_disjoint_paths(g, u, i)) >= 2


def is_two_rooted(g: SensingGraph, roots: Sequence[int]) -> bool:
    """Every agent outside ``roots`` is 2-reachable from ``roots``."""
    roots = _check_roots(g, roots)
    g.require_bidirectional()
    return all(two_reachable(g, roots, v) for v in g.vertices if v not in roots)


def _check_roots(g: SensingGraph, roots: Sequence[int]) -> tuple[int, int]:
    roots = tuple(int(r) for r in roots)
    if len(roots) != 2 or roots[0] == roots[1]:
        raise ArgumentError(f"roots must be two distinct agents, got {roots}")
    for r in roots:
        _check_agent(g, r)
    return roots


@dataclass(frozen=True)
class Dep:
    """Dual-entry path: ``entry_i -> inner[0] - ... - inner[-1] <- entry_j``."""

    entry_i: int
    entry_j: int
    inner: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "inner", tuple(int(v) for v in self.inner))
        if not self.inner:
            raise ConstructionError("a DEP needs at least one inner agent")
        if self.entry_i == self.entry_j:
            raise ConstructionError(f"DEP entries must be distinct, got {self.entry_i} twice")
        if len(set(self.inner)) != len(self.inner):
            raise ConstructionError(f"repeated inner agent in {self.inner}")
        if {self.entry_i, self.entry_j} & set(self.inner):
            raise ConstructionError("DEP entries overlap its inner agents")

    @property
    def length(self) -> int:
        return len(self.inner)

    @property
    def vertices(self) -> frozenset[int]:
        return frozenset((self.entry_i, self.entry_j, *self.inner))

    def edges(self) -> set[Edge]:
        first, last = self.inner[0], self.inner[-1]
        es = {(self.entry_i, first), (self.entry_j, last)}
        for a, b in zip(self.inner, self.inner[1:]):
            es.add((a, b))
            es.add((b, a))
        return es

    def neighbors_of(self, pos: int) -> tuple[int, int]:
        """The two agents measured by the inner agent at chain position ``pos``.

        Returned as (predecessor along the chain, successor along the chain).
        """
        prev = self.entry_i if pos == 0 else self.inner[pos - 1]
        nxt = self.entry_j if pos == self.length - 1 else self.inner[pos + 1]
        return prev, nxt

    def relabeled(self, mapping: dict[int, int]) -> "Dep":
        return Dep(mapping[self.entry_i], mapping[self.entry_j], tuple(mapping[v] for v in self.inner))


@dataclass(frozen=True)
class DepDecomposition:
    """Ordered DEPs that grow a spanning DEP-induced graph from two roots.

    ``deps`` use the original agent labels. ``construction_label`` maps an
    original label to its label in the recursive construction (roots first,
    then each DEP's inner agents consecutively).
    """

    n: int
    roots: tuple[int, int]
    deps: tuple[Dep, ...]

    @property
    def construction_label(self) -> dict[int, int]:
        order = list(self.roots)
        for d in self.deps:
            order.extend(d.inner)
        return {v: idx + 1 for idx, v in enumerate(order)}

    @property
    def original_label(self) -> dict[int, int]:
        return {c: o for o, c in self.construction_label.items()}

    def follower_order(self) -> list[int]:
        """Non-root agents in construction order."""
        return [v for d in self.deps for v in d.inner]

    def induced_graph(self) -> SensingGraph:
        return build_dep_induced(self.roots, self.deps)

    def validate(self, graph: SensingGraph | None = None) -> None:
        """Check the recursive construction rules, raising ``ConstructionError``.

        With ``graph`` given, also check that the induced edges belong to it
        and that the decomposition spans all of its agents.
        """
        induced = build_dep_induced(self.roots, self.deps)
        if induced.n != self.n:
            raise ConstructionError(f"decomposition covers {induced.n} agents, expected {self.n}")
        if graph is not None:
            if graph.n != self.n:
                raise ConstructionError(f"decomposition is for {self.n} agents, graph has {graph.n}")
            missing = sorted(induced.edges - graph.edges)
            if missing:
                raise ConstructionError(f"DEP edges {missing} are not in the sensing graph")

    def is_valid(self, graph: SensingGraph | None = None) -> bool:
        try:
            self.validate(graph)
        except ConstructionError:
            return False
        return True


def build_dep_induced(roots: Sequence[int], deps: Sequence[Dep]) -> SensingGraph:
    """Union graph obtained by attaching ``deps`` one after another to ``roots``."""
    roots = tuple(int(r) for r in roots)
    if len(roots) != 2 or roots[0] == roots[1]:
        raise ConstructionError(f"roots must be two distinct agents, got {roots}")
    covered = set(roots)
    edges: set[Edge] = set()
    for h, d in enumerate(deps, start=1):
        for e in (d.entry_i, d.entry_j):
            if e not in covered:
                raise ConstructionError(f"DEP {h}: entry agent {e} is not covered yet")
        clash = covered & set(d.inner)
        if clash:
            raise ConstructionError(f"DEP {h}: inner labels {sorted(clash)} already used")
        covered |= set(d.inner)
        edges |= d.edges()
    n = len(covered)
    if covered != set(range(1, n + 1)):
        raise ConstructionError(f"agent labels {sorted(covered)} are not contiguous from 1")
    return SensingGraph(n, edges)


def _ear_through(g: SensingGraph, covered: set[int], x: int) -> Dep | None:
    paths = _disjoint_paths(g, covered, x, drop_internal=True)
    if len(paths) < 2:
        return None
    segs = []
    for p in paths:
        last = max(idx for idx, v in enumerate(p) if v in covered)
        segs.append(p[last:])
    a, b = segs[0][0], segs[1][0]
    chain = segs[0][1:] + segs[1][1:-1][::-1]
    if a > b:
        a, b, chain = b, a, chain[::-1]
    return Dep(a, b, tuple(chain))


def _ear_key(d: Dep) -> tuple:
    return (d.length, tuple(sorted(d.inner)), d.inner, d.entry_i, d.entry_j)


def decompose_deps(g: SensingGraph, roots: Sequence[int]) -> DepDecomposition:
    """Decompose a 2-rooted graph into DEPs attached one after another.

    At each round every uncovered agent reachable through two vertex-disjoint
    paths from distinct covered agents yields a candidate DEP; the candidate
    with the shortest inner chain (then smallest labels) is attached.
    """
    g.require_bidirectional()
    roots = _check_roots(g, roots)
    covered = set(roots)
    deps: list[Dep] = []
    while len(covered) < g.n:
        uncovered = [v for v in g.vertices if v not in covered]
        best: Dep | None = None
        for x in uncovered:
            entries = sorted(g.in_neighbors(x) & covered)
            if len(entries) >= 2:
                best = Dep(entries[0], entries[1], (x,))
                break
        if best is None:
            candidates = [d for d in (_ear_through(g, covered, x) for x in uncovered) if d]
            if candidates:
                best = min(candidates, key=_ear_key)
        if best is None:
            witness = next((v for v in uncovered if not two_reachable(g, roots, v)), None)
            if witness is None:
                raise ConsistencyError("no DEP found although every agent is 2-reachable")
            raise DecompositionError(
                f"agent {witness} is not 2-reachable from roots {roots}", witness=witness
            )
        deps.append(best)
        covered |= set(best.inner)
    dec = DepDecomposition(g.n, roots, tuple(deps))
    dec.validate(g)
    return dec
