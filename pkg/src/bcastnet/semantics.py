"""Operational semantics of broadcast networks (static, reconfigurable, lossy).

Configurations and executions are immutable values.  A step names its sender,
the broadcast transition it fires and, for every neighbour of the sender, the
reception transition that neighbour takes; replay is therefore deterministic.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping

from .protocol import Protocol, Transition, TargetSet


class Semantics(str, Enum):
    STATIC = "static"
    RECONFIGURABLE = "reconfigurable"
    LOSSY = "lossy"

    @classmethod
    def parse(cls, value: "str | Semantics") -> "Semantics":
        if isinstance(value, Semantics):
            return value
        aliases = {"reconfig": cls.RECONFIGURABLE, "r": cls.RECONFIGURABLE, "s": cls.STATIC, "l": cls.LOSSY}
        try:
            return aliases.get(value) or cls(value)
        except ValueError:
            raise ValueError(f"unknown semantics {value!r}") from None


class SemanticsError(ValueError):
    pass


class NotEnabled(SemanticsError):
    """A step descriptor is not enabled in the given configuration."""


class MalformedEdges(SemanticsError):
    pass


class IllegalExecution(SemanticsError):
    """Replay failed; ``step`` is the 0-based index of the first bad step (None: initial config)."""

    def __init__(self, message: str, step: int | None = None, cause: Exception | None = None):
        self.step = step
        self.cause = cause
        prefix = "initial configuration" if step is None else f"step {step}"
        super().__init__(f"{prefix}: {message}")


def make_edges(pairs: Iterable[Iterable[str]], nodes: Iterable[str] | None = None) -> frozenset:
    node_set = None if nodes is None else set(nodes)
    out = set()
    for pair in pairs:
        pair = tuple(pair)
        if len(pair) != 2:
            raise MalformedEdges(f"edge must have two endpoints, got {pair!r}")
        u, v = pair
        if u == v:
            raise MalformedEdges(f"self-loop on {u!r}: edges are irreflexive")
        if node_set is not None and (u not in node_set or v not in node_set):
            raise MalformedEdges(f"edge {u}-{v} mentions an unknown node")
        out.add(frozenset((u, v)))
    return frozenset(out)


@dataclass(frozen=True)
class Configuration:
    nodes: tuple[str, ...]
    edges: frozenset
    labels: Mapping[str, str]

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        if len(set(self.nodes)) != len(self.nodes):
            raise SemanticsError("duplicate node identifiers")
        object.__setattr__(self, "edges", make_edges(self.edges, self.nodes))
        if set(self.labels) != set(self.nodes):
            raise SemanticsError("labels must be defined exactly on the nodes")
        object.__setattr__(self, "labels", {n: self.labels[n] for n in self.nodes})

    def __hash__(self):
        return hash((self.nodes, self.edges, tuple(self.labels[n] for n in self.nodes)))

    def neighbours(self, node: str) -> tuple[str, ...]:
        return tuple(n for n in self.nodes if frozenset((node, n)) in self.edges)

    def label_set(self) -> set[str]:
        return set(self.labels.values())

    def covers(self, targets: Iterable[str]) -> bool:
        return not self.label_set().isdisjoint(targets)

    def sorted_edges(self) -> list[tuple[str, str]]:
        pos = {n: i for i, n in enumerate(self.nodes)}
        pairs = [tuple(sorted(e, key=pos.__getitem__)) for e in self.edges]
        return sorted(pairs, key=lambda uv: (pos[uv[0]], pos[uv[1]]))

    def relabel(self, changes: Mapping[str, str]) -> "Configuration":
        labels = dict(self.labels)
        labels.update(changes)
        return Configuration(self.nodes, self.edges, labels)

    def with_edges(self, edges) -> "Configuration":
        return Configuration(self.nodes, edges, self.labels)


@dataclass(frozen=True)
class StepDescriptor:
    sender: str
    broadcast: Transition
    receptions: Mapping[str, Transition] = field(default_factory=dict)
    lost: bool = False
    new_edges: frozenset | None = None

    def __post_init__(self):
        object.__setattr__(self, "receptions", dict(self.receptions))
        if self.new_edges is not None:
            object.__setattr__(self, "new_edges", make_edges(self.new_edges))

    def __hash__(self):
        return hash((self.sender, self.broadcast, self.lost, tuple(sorted(self.receptions.items())),
                     self.new_edges))


@dataclass(frozen=True)
class Execution:
    semantics: Semantics
    initial: Configuration
    steps: tuple[StepDescriptor, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "semantics", Semantics.parse(self.semantics))
        object.__setattr__(self, "steps", tuple(self.steps))

    @property
    def size(self) -> int:
        return len(self.initial.nodes)

    def __len__(self) -> int:
        return len(self.steps)


@dataclass(frozen=True)
class ExecMetrics:
    size: int
    length: int
    active_length: dict[str, int]
    real_active_length: dict[str, int]
    final: Configuration

    @property
    def max_active_length(self) -> int:
        return max(self.active_length.values(), default=0)

    @property
    def max_real_active_length(self) -> int:
        return max(self.real_active_length.values(), default=0)

    @property
    def lost_steps(self) -> int:
        return sum(self.active_length.values()) - sum(self.real_active_length.values())

    def covers(self, targets: Iterable[str]) -> bool:
        return self.final.covers(targets)

    def to_json(self) -> dict:
        return {
            "size": self.size,
            "length": self.length,
            "active_length": dict(self.active_length),
            "real_active_length": dict(self.real_active_length),
            "max_active_length": self.max_active_length,
            "max_real_active_length": self.max_real_active_length,
            "final_labels": dict(self.final.labels),
        }


def is_covering(metrics: ExecMetrics, targets: TargetSet | Iterable[str]) -> bool:
    return metrics.covers(targets)


# ---------------------------------------------------------------------------
# Steps
# ---------------------------------------------------------------------------

def apply_step(c: Configuration, s: StepDescriptor, sem: Semantics | str,
               protocol: Protocol | None = None) -> Configuration:
    """Fire ``s`` from ``c``.  When ``protocol`` is given, transitions must belong to it."""
    sem = Semantics.parse(sem)
    if s.sender not in c.labels:
        raise NotEnabled(f"unknown sender {s.sender!r}")
    b = s.broadcast
    if not b.is_broadcast:
        raise NotEnabled(f"'{b}' is not a broadcast transition")
    if b.source != c.labels[s.sender]:
        raise NotEnabled(f"sender {s.sender} is in {c.labels[s.sender]!r}, not {b.source!r}")
    if protocol is not None and b not in protocol.transitions:
        raise NotEnabled(f"'{b}' is not a protocol transition")
    if s.lost and sem is not Semantics.LOSSY:
        raise NotEnabled("only lossy steps may be lost")
    if s.new_edges is not None and sem is not Semantics.RECONFIGURABLE:
        raise NotEnabled("only reconfigurable steps may change the topology")

    expected = set() if s.lost else set(c.neighbours(s.sender))
    got = set(s.receptions)
    if got != expected:
        missing, extra = sorted(expected - got), sorted(got - expected)
        detail = []
        if missing:
            detail.append("missing receptions for " + ", ".join(missing))
        if extra:
            detail.append("receptions for non-neighbours " + ", ".join(extra))
        raise NotEnabled("; ".join(detail))

    changes = {s.sender: b.target}
    for n, r in s.receptions.items():
        if not r.is_receive or r.message != b.message:
            raise NotEnabled(f"node {n}: '{r}' does not receive {b.message!r}")
        if r.source != c.labels[n]:
            raise NotEnabled(f"node {n} is in {c.labels[n]!r}, reception '{r}' starts in {r.source!r}")
        if protocol is not None and r not in protocol.transitions:
            raise NotEnabled(f"'{r}' is not a protocol transition")
        changes[n] = r.target

    out = c.relabel(changes)
    if s.new_edges is not None:
        out = out.with_edges(make_edges(s.new_edges, c.nodes))
    return out


def enabled_steps(c: Configuration, sem: Semantics | str, p: Protocol) -> list[StepDescriptor]:
    """All enabled steps (``new_edges`` left unset), in node then declaration order.

    Under lossy semantics a lost variant follows each successful one; it is
    omitted when the sender has no neighbours since both would coincide.
    """
    sem = Semantics.parse(sem)
    out: list[StepDescriptor] = []
    for n in c.nodes:
        neigh = c.neighbours(n)
        for b in p.broadcasts_from(c.labels[n]):
            options = [p.enabled_receptions(c.labels[x], b.message) for x in neigh]
            for choice in itertools.product(*options):
                out.append(StepDescriptor(n, b, dict(zip(neigh, choice))))
            if sem is Semantics.LOSSY and neigh:
                out.append(StepDescriptor(n, b, {}, lost=True))
    return out


def is_initial(c: Configuration, p: Protocol) -> bool:
    init = set(p.init)
    return all(q in init for q in c.labels.values())


def replay(e: Execution, p: Protocol) -> ExecMetrics:
    states = set(p.states)
    bad = [n for n, q in e.initial.labels.items() if q not in states]
    if bad:
        raise IllegalExecution(f"labels of {', '.join(bad)} are not protocol states")
    if not is_initial(e.initial, p):
        raise IllegalExecution("not an initial configuration (labels outside init)")
    c = e.initial
    alen = {n: 0 for n in c.nodes}
    rlen = {n: 0 for n in c.nodes}
    for i, s in enumerate(e.steps):
        try:
            c = apply_step(c, s, e.semantics, p)
        except SemanticsError as exc:
            raise IllegalExecution(str(exc), step=i, cause=exc) from exc
        alen[s.sender] += 1
        if not s.lost:
            rlen[s.sender] += 1
    return ExecMetrics(len(e.initial.nodes), len(e.steps), alen, rlen, c)


def configurations(e: Execution) -> list[Configuration]:
    """All configurations along ``e`` (no protocol membership checks)."""
    out = [e.initial]
    for s in e.steps:
        out.append(apply_step(out[-1], s, e.semantics))
    return out


def lossy_to_reconfig(e: Execution, p: Protocol | None = None) -> Execution:
    """Simulate each lost broadcast by a broadcast under the empty topology."""
    if e.semantics is not Semantics.LOSSY:
        raise SemanticsError("input execution is not lossy")
    if p is not None:
        replay(e, p)
    else:
        configurations(e)
    full = e.initial.edges
    empty = frozenset()

    def topology_for(i: int) -> frozenset:
        if i >= len(e.steps):
            return full
        return empty if e.steps[i].lost else full

    steps = []
    current = topology_for(0)
    for i, s in enumerate(e.steps):
        nxt = topology_for(i + 1)
        steps.append(StepDescriptor(s.sender, s.broadcast, s.receptions,
                                    new_edges=None if nxt == current else nxt))
        current = nxt
    initial = e.initial.with_edges(topology_for(0))
    return Execution(Semantics.RECONFIGURABLE, initial, tuple(steps))


# ---------------------------------------------------------------------------
# JSON trace format
# ---------------------------------------------------------------------------

def execution_to_json(e: Execution) -> dict:
    init = e.initial
    doc = {
        "semantics": e.semantics.value,
        "initial": {
            "nodes": [{"id": n, "state": init.labels[n]} for n in init.nodes],
            "edges": [list(uv) for uv in init.sorted_edges()],
        },
        "steps": [],
    }
    pos = {n: i for i, n in enumerate(init.nodes)}
    for s in e.steps:
        step = {"sender": s.sender, "bcast": s.broadcast.as_list()}
        if s.lost:
            step["lost"] = True
        step["recv"] = {n: s.receptions[n].as_list() for n in sorted(s.receptions, key=pos.__getitem__)}
        if s.new_edges is not None:
            step["new_edges"] = [list(uv) for uv in init.with_edges(s.new_edges).sorted_edges()]
        doc["steps"].append(step)
    return doc


def execution_from_json(doc: Mapping) -> Execution:
    try:
        init = doc["initial"]
        nodes = [entry["id"] for entry in init["nodes"]]
        labels = {entry["id"]: entry["state"] for entry in init["nodes"]}
        initial = Configuration(tuple(nodes), make_edges(init.get("edges", []), nodes), labels)
        steps = []
        for raw in doc.get("steps", []):
            new_edges = raw.get("new_edges")
            steps.append(StepDescriptor(
                sender=raw["sender"],
                broadcast=Transition.from_list(raw["bcast"]),
                receptions={n: Transition.from_list(t) for n, t in raw.get("recv", {}).items()},
                lost=bool(raw.get("lost", False)),
                new_edges=None if new_edges is None else make_edges(new_edges, nodes),
            ))
        return Execution(Semantics.parse(doc["semantics"]), initial, tuple(steps))
    except (KeyError, TypeError) as exc:
        raise SemanticsError(f"malformed execution document: {exc}") from exc


def dumps_execution(e: Execution, indent: int | None = None) -> str:
    return json.dumps(execution_to_json(e), indent=indent)


def loads_execution(text: str) -> Execution:
    return execution_from_json(json.loads(text))
