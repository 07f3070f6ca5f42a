"""Exact brute-force exploration at a fixed number of nodes.

Reconfigurable networks are explored through the counting abstraction: the
topology can be rewired before every broadcast, so a configuration is just a
multiset of states.  Static and lossy networks keep their topology, so every
isomorphism class of graphs on ``k`` nodes is explored separately.
"""

from __future__ import annotations

import itertools
import os
import time
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Iterator

from .protocol import Protocol, TargetSet
from .semantics import Semantics

DEFAULT_MAX_STATES = 10**7
BUDGET_ENV = "BCAST_BUDGET_STATES"
# 12346 graph classes on 8 nodes take about a minute to enumerate; 9 would take hours
MAX_TOPOLOGY_NODES = 8


class BudgetExceeded(RuntimeError):
    def __init__(self, message: str, states_visited: int):
        self.states_visited = states_visited
        super().__init__(message)


@dataclass
class Budget:
    """Caps on visited configurations and wall time, shared by one query."""

    max_states: int | None = None
    max_seconds: float | None = None
    visited: int = 0
    started: float = field(default_factory=time.monotonic)

    def __post_init__(self):
        if self.max_states is None:
            self.max_states = int(os.environ.get(BUDGET_ENV, DEFAULT_MAX_STATES))

    def charge(self, n: int = 1) -> None:
        self.visited += n
        if self.visited > self.max_states:
            raise BudgetExceeded(f"search budget of {self.max_states} states exhausted", self.visited)
        if self.max_seconds is not None and time.monotonic() - self.started > self.max_seconds:
            raise BudgetExceeded(f"exceeded {self.max_seconds}s of search", self.visited)

    @property
    def elapsed_ms(self) -> int:
        return int((time.monotonic() - self.started) * 1000)


def _budget(budget: Budget | None) -> Budget:
    return budget if budget is not None else Budget()


# ---------------------------------------------------------------------------
# Compiled protocol tables
# ---------------------------------------------------------------------------

class _Tables:
    """Integer-indexed view of a protocol."""

    def __init__(self, p: Protocol):
        self.states = p.states
        self.index = p.state_index
        n = len(p.states)
        self.init = tuple(sorted(self.index[q] for q in p.init))
        # per state: tuple of (message, target index)
        self.bcasts = [[] for _ in range(n)]
        for t in p.broadcasts:
            entry = (t.message, self.index[t.target])
            if entry not in self.bcasts[self.index[t.source]]:
                self.bcasts[self.index[t.source]].append(entry)
        # (state, message) -> distinct reception targets in declaration order
        self.recv: dict[tuple[int, str], tuple[int, ...]] = {}
        for t in p.receptions:
            key = (self.index[t.source], t.message)
            targets = self.recv.setdefault(key, ())
            if self.index[t.target] not in targets:
                self.recv[key] = targets + (self.index[t.target],)

    def targets_of(self, f: Iterable[str]) -> frozenset:
        return frozenset(self.index[q] for q in f)

    def receive(self, q: int, msg: str) -> tuple[int, ...]:
        # a missing reception behaves as the implicit self-loop
        return self.recv.get((q, msg), (q,))


def _as_states(f: TargetSet | Iterable[str]) -> tuple[str, ...]:
    return tuple(f.states) if isinstance(f, TargetSet) else tuple(f)


# ---------------------------------------------------------------------------
# Generic layered BFS
# ---------------------------------------------------------------------------

def _layered_bfs(initials: Iterable[Hashable], successors: Callable[[Hashable], Iterator[Hashable]],
                 budget: Budget, goal: Callable[[Hashable], bool] | None = None):
    """Return ``(layer of first goal or None, visited set)``."""
    visited = set()
    frontier = []
    for c in initials:
        if c not in visited:
            visited.add(c)
            frontier.append(c)
    budget.charge(len(frontier))
    layer = 0
    while frontier:
        if goal is not None and any(goal(c) for c in frontier):
            return layer, visited
        nxt = []
        for c in frontier:
            for d in successors(c):
                if d not in visited:
                    visited.add(d)
                    nxt.append(d)
        budget.charge(len(nxt))
        frontier = nxt
        layer += 1
    return None, visited


# ---------------------------------------------------------------------------
# Reconfigurable semantics: counting abstraction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MultisetConfig:
    states: tuple[str, ...]
    counts: tuple[int, ...]

    @property
    def total(self) -> int:
        return sum(self.counts)

    def as_dict(self) -> dict[str, int]:
        return {q: c for q, c in zip(self.states, self.counts) if c}

    def support(self) -> frozenset:
        return frozenset(q for q, c in zip(self.states, self.counts) if c)


def _initial_multisets(tables: _Tables, k: int):
    n = len(tables.states)
    for combo in itertools.combinations_with_replacement(tables.init, k):
        vec = [0] * n
        for q in combo:
            vec[q] += 1
        yield tuple(vec)


def _multiset_successors(tables: _Tables):
    n = len(tables.states)

    def successors(vec: tuple[int, ...]) -> Iterator[tuple[int, ...]]:
        out = set()
        for s in range(n):
            if not vec[s]:
                continue
            for msg, t in tables.bcasts[s]:
                rest = list(vec)
                rest[s] -= 1
                base = list(rest)
                base[t] += 1
                partial = {tuple(base)}
                for q in range(n):
                    c = rest[q]
                    moves = [x for x in tables.receive(q, msg) if x != q]
                    if not c or not moves:
                        continue
                    grown = set()
                    for v in partial:
                        for j in range(c + 1):
                            for combo in itertools.combinations_with_replacement(moves, j):
                                w = list(v)
                                w[q] -= j
                                for x in combo:
                                    w[x] += 1
                                grown.add(tuple(w))
                    partial = grown
                out |= partial
        return iter(out)

    return successors


def reconfig_reachable_multisets(p: Protocol, k: int, budget: Budget | None = None) -> set[MultisetConfig]:
    if k < 1:
        raise ValueError("k must be at least 1")
    tables = _Tables(p)
    _, visited = _layered_bfs(_initial_multisets(tables, k), _multiset_successors(tables), _budget(budget))
    return {MultisetConfig(p.states, v) for v in visited}


def _reconfig_search(p: Protocol, f, k: int, budget: Budget) -> int | None:
    tables = _Tables(p)
    targets = tables.targets_of(_as_states(f))
    layer, _ = _layered_bfs(_initial_multisets(tables, k), _multiset_successors(tables), budget,
                            goal=lambda v: any(v[q] for q in targets))
    return layer


# ---------------------------------------------------------------------------
# Topology classes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TopologyClass:
    k: int
    edges: tuple[tuple[int, int], ...]

    def adjacency(self) -> tuple[tuple[int, ...], ...]:
        adj = [[] for _ in range(self.k)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        return tuple(tuple(sorted(a)) for a in adj)


def canonical_edges(k: int, edges: Iterable[tuple[int, int]]) -> tuple[tuple[int, int], ...]:
    """Least sorted edge list over the relabellings that list nodes by nonincreasing degree.

    Restricting to degree-ordered relabellings is isomorphism invariant, so
    the result is still a canonical form.
    """
    edges = [tuple(e) for e in edges]
    deg = [0] * k
    for u, v in edges:
        deg[u] += 1
        deg[v] += 1
    groups: dict[int, list[int]] = {}
    for v in range(k):
        groups.setdefault(deg[v], []).append(v)
    ordered = [groups[d] for d in sorted(groups, reverse=True)]
    best = None
    for parts in itertools.product(*(itertools.permutations(g) for g in ordered)):
        order = [v for part in parts for v in part]
        pos = {v: i for i, v in enumerate(order)}
        cand = tuple(sorted(tuple(sorted((pos[u], pos[v]))) for u, v in edges))
        if best is None or cand < best:
            best = cand
    return best if best is not None else ()


_CLASSES: dict[int, tuple[TopologyClass, ...]] = {1: (TopologyClass(1, ()),)}


def topology_classes(k: int, budget: Budget | None = None) -> tuple[TopologyClass, ...]:
    """One canonical representative per isomorphism class of graphs on ``k`` nodes.

    Classes on ``k`` nodes are grown from those on ``k-1`` by adding a node
    with every possible neighbourhood.  Each candidate graph is charged to
    ``budget``, so a hopeless ``k`` fails fast instead of hanging; only fully
    built levels are cached.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if k in _CLASSES:
        return _CLASSES[k]
    budget = _budget(budget)
    if k > MAX_TOPOLOGY_NODES:
        raise BudgetExceeded(f"fixed-topology search supports at most {MAX_TOPOLOGY_NODES} nodes", budget.visited)
    prev = topology_classes(k - 1, budget)
    seen = set()
    new = k - 1
    for rep in prev:
        budget.charge(2 ** new)
        for r in range(k):
            for nbrs in itertools.combinations(range(new), r):
                seen.add(canonical_edges(k, rep.edges + tuple((u, new) for u in nbrs)))
    classes = tuple(TopologyClass(k, e) for e in sorted(seen, key=lambda e: (len(e), e)))
    _CLASSES[k] = classes
    return classes


# ---------------------------------------------------------------------------
# Static and lossy semantics: fixed topology
# ---------------------------------------------------------------------------

def _initial_labellings(tables: _Tables, k: int):
    return itertools.product(tables.init, repeat=k)


def _graph_successors(tables: _Tables, adj, lossy: bool):
    k = len(adj)

    def successors(labels: tuple[int, ...]) -> Iterator[tuple[int, ...]]:
        out = set()
        for v in range(k):
            neigh = adj[v]
            for msg, t in tables.bcasts[labels[v]]:
                if lossy or not neigh:
                    lost = list(labels)
                    lost[v] = t
                    out.add(tuple(lost))
                if not neigh:
                    continue
                options = [tables.receive(labels[x], msg) for x in neigh]
                for choice in itertools.product(*options):
                    w = list(labels)
                    w[v] = t
                    for x, y in zip(neigh, choice):
                        w[x] = y
                    out.add(tuple(w))
        return iter(out)

    return successors


def _fixed_topology_search(tables: _Tables, topo: TopologyClass, lossy: bool, budget: Budget,
                           targets: frozenset | None):
    goal = None if targets is None else (lambda labels: any(q in targets for q in labels))
    return _layered_bfs(_initial_labellings(tables, topo.k),
                        _graph_successors(tables, topo.adjacency(), lossy), budget, goal)


def _topology_search(p: Protocol, f, k: int, sem: Semantics, budget: Budget) -> int | None:
    """Minimum, over topologies on ``k`` nodes, of the first covering BFS layer."""
    tables = _Tables(p)
    targets = tables.targets_of(_as_states(f))
    best = None
    for topo in topology_classes(k, budget):
        layer, _ = _fixed_topology_search(tables, topo, sem is Semantics.LOSSY, budget, targets)
        if layer is not None and (best is None or layer < best):
            best = layer
            if best == 0:
                break
    return best


# ---------------------------------------------------------------------------
# Queries
# ---------------------------------------------------------------------------

def min_cover_length(p: Protocol, f: TargetSet | Iterable[str], sem: Semantics | str, k: int,
                     budget: Budget | None = None) -> int | None:
    """Length of a shortest covering execution with exactly ``k`` nodes, or None."""
    sem = Semantics.parse(sem)
    if k < 1:
        raise ValueError("k must be at least 1")
    budget = _budget(budget)
    if sem is Semantics.RECONFIGURABLE:
        return _reconfig_search(p, f, k, budget)
    return _topology_search(p, f, k, sem, budget)


def covers_with(p: Protocol, f, sem: Semantics | str, k: int, budget: Budget | None = None) -> bool:
    return min_cover_length(p, f, sem, k, budget) is not None


def exact_cutoff(p: Protocol, f: TargetSet | Iterable[str], sem: Semantics | str, k_max: int,
                 budget: Budget | None = None) -> int | None:
    """Least ``k <= k_max`` admitting a covering execution with ``k`` nodes.

    For static semantics a None answer only means "none up to ``k_max``".
    """
    sem = Semantics.parse(sem)
    budget = _budget(budget)
    for k in range(1, k_max + 1):
        if covers_with(p, f, sem, k, budget):
            return k
    return None


def mincover_decide(p: Protocol, f: TargetSet | Iterable[str], k: int, sem: Semantics | str,
                    budget: Budget | None = None) -> bool:
    """Is there a covering execution with exactly ``k`` nodes (reconfigurable or lossy)?"""
    sem = Semantics.parse(sem)
    if sem is Semantics.STATIC:
        raise ValueError("MinCover is defined for reconfigurable and lossy semantics")
    if k < 1:
        return False
    # copycat monotonicity: a smaller cover extends to one of size exactly k
    return exact_cutoff(p, f, sem, k, budget) is not None


def coverable_states_at(p: Protocol, k: int, sem: Semantics | str, budget: Budget | None = None) -> frozenset:
    """States that label some node of some configuration reachable with ``k`` nodes."""
    sem = Semantics.parse(sem)
    budget = _budget(budget)
    if sem is Semantics.RECONFIGURABLE:
        found = set()
        for ms in reconfig_reachable_multisets(p, k, budget):
            found |= ms.support()
        return frozenset(found)
    tables = _Tables(p)
    found_idx: set[int] = set()
    for topo in topology_classes(k, budget):
        _, visited = _fixed_topology_search(tables, topo, sem is Semantics.LOSSY, budget, None)
        for labels in visited:
            found_idx.update(labels)
    return frozenset(p.states[i] for i in found_idx)


def reach_report(p: Protocol, k: int, sem: Semantics | str, budget: Budget | None = None) -> dict:
    sem = Semantics.parse(sem)
    states = coverable_states_at(p, k, sem, budget)
    return {"coverable": sorted(states, key=p.state_index.__getitem__)}
