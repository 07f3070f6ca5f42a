"""Small covering executions built from a saturation trace via copycat constructions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .protocol import Protocol, TargetSet
from .saturation import SaturationTrace, saturate, witness_bounds
from .semantics import (
    Configuration,
    Execution,
    SemanticsError,
    Semantics,
    StepDescriptor,
    configurations,
    replay,
)


class NotCoverable(ValueError):
    pass


class WitnessError(AssertionError):
    """A synthesized execution failed its own post-condition check."""


@dataclass(frozen=True)
class CopycatResult:
    execution: Execution
    injection: dict[str, str]
    fresh: str


def fresh_node_id(nodes: Iterable[str]) -> str:
    taken = set(nodes)
    i = len(taken) + 1
    while f"n{i}" in taken:
        i += 1
    return f"n{i}"


def _checked_configurations(e: Execution, src: str, sem: Semantics, protocol: Protocol | None):
    if e.semantics is not sem:
        raise SemanticsError(f"expected a {sem.value} execution, got {e.semantics.value}")
    if src not in e.initial.labels:
        raise SemanticsError(f"unknown node {src!r}")
    if protocol is not None:
        replay(e, protocol)
    return configurations(e)


def _assemble(initial: Configuration, emitted: list[tuple[StepDescriptor, frozenset]],
              final_edges: frozenset) -> Execution:
    """Build a reconfigurable execution from steps paired with the topology each fires in."""
    topologies = [t for _, t in emitted] + [final_edges]
    steps = []
    for k, (s, topo) in enumerate(emitted):
        nxt = topologies[k + 1]
        steps.append(StepDescriptor(s.sender, s.broadcast, s.receptions,
                                    new_edges=None if nxt == topo else nxt))
    return Execution(Semantics.RECONFIGURABLE, initial.with_edges(topologies[0]), tuple(steps))


def copycat_reconfig(e: Execution, src: str, protocol: Protocol | None = None,
                     fresh: str | None = None) -> CopycatResult:
    """Add a node that shadows ``src``.

    The fresh node repeats each broadcast of ``src`` right after it, with every
    node disconnected, and is wired to the neighbours of ``src`` whenever
    ``src`` receives.
    """
    confs = _checked_configurations(e, src, Semantics.RECONFIGURABLE, protocol)
    fresh = fresh or fresh_node_id(e.initial.nodes)
    if fresh in e.initial.labels:
        raise SemanticsError(f"fresh node {fresh!r} already exists")
    labels = dict(e.initial.labels)
    labels[fresh] = labels[src]
    initial = Configuration(e.initial.nodes + (fresh,), frozenset(), labels)

    emitted = []
    for i, s in enumerate(e.steps):
        topo = confs[i].edges
        if s.sender == src:
            emitted.append((s, topo))
            emitted.append((StepDescriptor(fresh, s.broadcast, {}), frozenset()))
        elif src in s.receptions:
            receptions = dict(s.receptions)
            receptions[fresh] = s.receptions[src]
            wired = topo | {frozenset((fresh, x)) for x in confs[i].neighbours(src)}
            emitted.append((StepDescriptor(s.sender, s.broadcast, receptions), wired))
        else:
            emitted.append((s, topo))

    out = _assemble(initial, emitted, confs[-1].edges)
    injection = {n: n for n in e.initial.nodes}
    result = CopycatResult(out, injection, fresh)
    if protocol is not None:
        replay(out, protocol)
    return result


def copycat_lossy(e: Execution, src: str, protocol: Protocol | None = None,
                  fresh: str | None = None) -> CopycatResult:
    """Add a node wired like ``src`` that copies it; all its own broadcasts are lost."""
    confs = _checked_configurations(e, src, Semantics.LOSSY, protocol)
    fresh = fresh or fresh_node_id(e.initial.nodes)
    if fresh in e.initial.labels:
        raise SemanticsError(f"fresh node {fresh!r} already exists")
    labels = dict(e.initial.labels)
    labels[fresh] = labels[src]
    edges = e.initial.edges | {frozenset((fresh, x)) for x in e.initial.neighbours(src)}
    initial = Configuration(e.initial.nodes + (fresh,), edges, labels)

    steps = []
    for s in e.steps:
        if s.sender == src:
            steps.append(s)
            steps.append(StepDescriptor(fresh, s.broadcast, {}, lost=True))
        elif src in s.receptions:
            receptions = dict(s.receptions)
            receptions[fresh] = s.receptions[src]
            steps.append(StepDescriptor(s.sender, s.broadcast, receptions, lost=s.lost))
        else:
            steps.append(s)

    out = Execution(Semantics.LOSSY, initial, tuple(steps))
    if protocol is not None:
        replay(out, protocol)
    return CopycatResult(out, {n: n for n in e.initial.nodes}, fresh)


# ---------------------------------------------------------------------------
# Witness synthesis
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Witness:
    execution: Execution
    representatives: dict[str, str]  # state -> node ending in it (main node for lossy)
    retired: frozenset
    iterations: int
    counter: int

    def summary(self, protocol: Protocol) -> dict:
        metrics = replay(self.execution, protocol)
        order = protocol.state_index
        return {
            "size": metrics.size,
            "length": metrics.length,
            "max_alen": metrics.max_active_length,
            "max_real_alen": metrics.max_real_active_length,
            "covered_states": sorted(metrics.final.label_set(), key=order.__getitem__),
        }


def _initial_execution(p: Protocol, sem: Semantics) -> tuple[Execution, dict[str, str]]:
    nodes = tuple(f"n{i}" for i in range(1, len(p.init) + 1))
    labels = dict(zip(nodes, p.init))
    return Execution(sem, Configuration(nodes, frozenset(), labels), ()), dict(zip(p.init, nodes))


def _with_final_topology(e: Execution, edges: frozenset) -> Execution:
    final = configurations(e)[-1]
    if final.edges == edges:
        return e
    if not e.steps:
        return Execution(e.semantics, e.initial.with_edges(edges), ())
    last = e.steps[-1]
    last = StepDescriptor(last.sender, last.broadcast, last.receptions, last.lost, edges)
    return Execution(e.semantics, e.initial, e.steps[:-1] + (last,))


def _resolve_upto(trace: SaturationTrace, f, stop_at_target: bool) -> int:
    if f is None or not stop_at_target:
        if f is not None and trace.first_covering_index(f) is None:
            raise NotCoverable(f"none of {sorted(f)} is coverable")
        return trace.m
    idx = trace.first_covering_index(f)
    if idx is None:
        raise NotCoverable(f"none of {sorted(f)} is coverable")
    return idx


def build_reconfig_witness(p: Protocol, trace: SaturationTrace | None = None,
                           upto: int | None = None) -> Witness:
    """Execution with ``c_upto`` nodes whose final labels are exactly ``S_upto``."""
    trace = trace or saturate(p)
    upto = trace.m if upto is None else upto
    e, rep = _initial_execution(p, Semantics.RECONFIGURABLE)
    for j, q_new in zip(trace.justifications[:upto], trace.inserted[:upto]):
        b = j.broadcast
        if j.kind == "broadcast":
            cc = copycat_reconfig(e, rep[b.source])
            e = _with_final_topology(cc.execution, frozenset())
            e = Execution(e.semantics, e.initial, e.steps + (StepDescriptor(cc.fresh, b, {}),))
            rep[q_new] = cc.fresh
        else:
            r = j.reception
            c1 = copycat_reconfig(e, rep[r.source])
            c2 = copycat_reconfig(c1.execution, rep[b.source])
            e = _with_final_topology(c2.execution, frozenset({frozenset((c1.fresh, c2.fresh))}))
            e = Execution(e.semantics, e.initial, e.steps + (StepDescriptor(c2.fresh, b, {c1.fresh: r}),))
            rep[q_new] = c1.fresh
    return Witness(e, rep, frozenset(), upto, trace.counters[upto])


def build_lossy_witness(p: Protocol, trace: SaturationTrace | None = None,
                        upto: int | None = None) -> Witness:
    """Lossy execution with one main node per state of ``S_upto``.

    Every node that is not a main node is retired: its label no longer
    matters.  Main nodes never broadcast successfully and only neighbour
    retired nodes.
    """
    trace = trace or saturate(p)
    upto = trace.m if upto is None else upto
    e, main = _initial_execution(p, Semantics.LOSSY)
    retired: set[str] = set()
    for j, q_new in zip(trace.justifications[:upto], trace.inserted[:upto]):
        b = j.broadcast
        if j.kind == "broadcast":
            cc = copycat_lossy(e, main[b.source])
            e = cc.execution
            e = Execution(e.semantics, e.initial, e.steps + (StepDescriptor(cc.fresh, b, {}, lost=True),))
            main[q_new] = cc.fresh
        else:
            r = j.reception
            c1 = copycat_lossy(e, main[r.source])
            c2 = copycat_lossy(c1.execution, main[b.source])
            f1, f2 = c1.fresh, c2.fresh
            e = c2.execution
            # f1 and f2 never send for real, so the new edge leaves every step unchanged
            e = Execution(e.semantics, e.initial.with_edges(e.initial.edges | {frozenset((f1, f2))}), e.steps)
            final = configurations(e)[-1]
            receptions = {}
            for x in final.neighbours(f2):
                if x == f1:
                    receptions[x] = r
                else:
                    receptions[x] = p.enabled_receptions(final.labels[x], b.message)[0]
            e = Execution(e.semantics, e.initial, e.steps + (StepDescriptor(f2, b, receptions),))
            retired.add(f2)
            main[q_new] = f1
    return Witness(e, main, frozenset(retired), upto, trace.counters[upto])


def _targets(f) -> set[str] | None:
    if f is None:
        return None
    return set(f.states) if isinstance(f, TargetSet) else set(f)


def check_reconfig_witness(p: Protocol, w: Witness, trace: SaturationTrace) -> None:
    metrics = replay(w.execution, p)
    expected = set(trace.sets[w.iterations])
    if metrics.final.label_set() != expected:
        raise WitnessError(f"final labels {metrics.final.label_set()} != {expected}")
    if metrics.size != w.counter:
        raise WitnessError(f"size {metrics.size} != counter {w.counter}")
    if metrics.max_active_length > w.iterations:
        raise WitnessError("a node broadcasts more often than the iteration count")
    if metrics.length > metrics.size * w.iterations:
        raise WitnessError("length exceeds size times iterations")


def check_lossy_witness(p: Protocol, w: Witness, trace: SaturationTrace) -> None:
    metrics = replay(w.execution, p)
    final = metrics.final
    expected = set(trace.sets[w.iterations])
    if set(w.representatives) != expected:
        raise WitnessError("main nodes do not match the saturation set")
    mains = set(w.representatives.values())
    if len(mains) != len(w.representatives):
        raise WitnessError("main nodes are not distinct")
    for q, n in w.representatives.items():
        if final.labels[n] != q:
            raise WitnessError(f"main node {n} of {q!r} ends in {final.labels[n]!r}")
        if metrics.real_active_length[n] != 0:
            raise WitnessError(f"main node {n} sends for real")
        if not set(final.neighbours(n)) <= w.retired:
            raise WitnessError(f"main node {n} has a non-retired neighbour")
    if set(final.nodes) - mains != set(w.retired):
        raise WitnessError("every non-main node must be retired")
    if metrics.max_real_active_length > 1:
        raise WitnessError("a node sends for real more than once")
    if metrics.size != w.counter:
        raise WitnessError(f"size {metrics.size} != counter {w.counter}")
    if metrics.max_active_length > w.iterations:
        raise WitnessError("a node broadcasts more often than the iteration count")


def synthesize_reconfig_witness(p: Protocol, f: TargetSet | Iterable[str] | None,
                                stop_at_target: bool = False) -> Execution:
    """Reconfigurable execution whose final labels are all the coverable states.

    ``f`` must be coverable.  With ``stop_at_target`` the construction stops
    at the first saturation set meeting ``f``, which gives a smaller witness.
    """
    trace = saturate(p)
    upto = _resolve_upto(trace, _targets(f), stop_at_target)
    w = build_reconfig_witness(p, trace, upto)
    check_reconfig_witness(p, w, trace)
    _check_global_bounds(p, trace, w)
    return w.execution


def synthesize_lossy_witness(p: Protocol, f: TargetSet | Iterable[str] | None,
                             stop_at_target: bool = False) -> Execution:
    trace = saturate(p)
    upto = _resolve_upto(trace, _targets(f), stop_at_target)
    w = build_lossy_witness(p, trace, upto)
    check_lossy_witness(p, w, trace)
    _check_global_bounds(p, trace, w)
    return w.execution


def synthesize_witness(p: Protocol, f, sem: Semantics | str, stop_at_target: bool = False) -> Witness:
    """Like the two ``synthesize_*`` functions but returns the bookkeeping too."""
    sem = Semantics.parse(sem)
    trace = saturate(p)
    upto = _resolve_upto(trace, _targets(f), stop_at_target)
    if sem is Semantics.RECONFIGURABLE:
        w = build_reconfig_witness(p, trace, upto)
        check_reconfig_witness(p, w, trace)
    elif sem is Semantics.LOSSY:
        w = build_lossy_witness(p, trace, upto)
        check_lossy_witness(p, w, trace)
    else:
        raise ValueError("no witness construction for static semantics")
    _check_global_bounds(p, trace, w)
    return w


def _check_global_bounds(p: Protocol, trace: SaturationTrace, w: Witness) -> None:
    bounds = witness_bounds(trace, p)
    e = w.execution
    nq = len(p.states)
    if e.size > bounds.cutoff_ub or e.size > 2 * nq - len(p.init):
        raise WitnessError(f"witness size {e.size} exceeds the node bound")
    if len(e.steps) > 2 * nq * nq:
        raise WitnessError(f"witness length {len(e.steps)} exceeds 2|Q|^2")
