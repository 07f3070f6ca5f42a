"""Refined saturation: the coverable states, one insertion at a time, with a node counter."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .protocol import Protocol, TargetSet, Transition


@dataclass(frozen=True)
class Justification:
    """Why a state was inserted.

    ``kind`` is ``"broadcast"`` (the state is the target of ``broadcast``) or
    ``"reception"`` (the state is the target of ``reception``, fired while
    some node performs ``broadcast``).
    """

    kind: str
    broadcast: Transition
    reception: Transition | None = None

    @property
    def cost(self) -> int:
        return 1 if self.kind == "broadcast" else 2

    def to_json(self) -> dict:
        doc = {"kind": self.kind, "broadcast": self.broadcast.as_list()}
        if self.reception is not None:
            doc["reception"] = self.reception.as_list()
        return doc


@dataclass(frozen=True)
class SaturationTrace:
    sets: tuple[frozenset, ...]
    counters: tuple[int, ...]
    inserted: tuple[str, ...]
    justifications: tuple[Justification, ...]

    @property
    def m(self) -> int:
        return len(self.inserted)

    @property
    def final(self) -> frozenset:
        return self.sets[-1]

    @property
    def final_counter(self) -> int:
        return self.counters[-1]

    def first_covering_index(self, targets: Iterable[str]) -> int | None:
        targets = set(targets)
        for i, s in enumerate(self.sets):
            if s & targets:
                return i
        return None

    def to_json(self, protocol: Protocol | None = None) -> dict:
        order = (lambda s: sorted(s, key=protocol.state_index.__getitem__)) if protocol else sorted
        return {
            "sets": [order(s) for s in self.sets],
            "counters": list(self.counters),
            "inserted": list(self.inserted),
            "justifications": [j.to_json() for j in self.justifications],
        }


def saturate(p: Protocol) -> SaturationTrace:
    """Run the refined saturation on a reception-complete protocol.

    The broadcast rule is tried before the reception rule.  Ties go to the
    first transition in declaration order; for the reception rule the
    reception is chosen first, then the first matching broadcast.
    """
    current = set(p.init)
    sets = [frozenset(current)]
    counters = [len(current)]
    inserted: list[str] = []
    just: list[Justification] = []

    while True:
        step = None
        for b in p.broadcasts:
            if b.source in current and b.target not in current:
                step = (b.target, Justification("broadcast", b))
                break
        if step is None:
            for r in p.receptions:
                if r.source not in current or r.target in current:
                    continue
                b = next((b for b in p.broadcasts
                          if b.message == r.message and b.source in current and b.target in current), None)
                if b is not None:
                    step = (r.target, Justification("reception", b, r))
                    break
        if step is None:
            break
        q, j = step
        current.add(q)
        sets.append(frozenset(current))
        counters.append(counters[-1] + j.cost)
        inserted.append(q)
        just.append(j)

    return SaturationTrace(tuple(sets), tuple(counters), tuple(inserted), tuple(just))


def coverable_states(p: Protocol) -> frozenset:
    return saturate(p).final


def is_coverable(p: Protocol, f: TargetSet | Iterable[str]) -> bool:
    """Coverability under both reconfigurable and lossy semantics."""
    return not coverable_states(p).isdisjoint(f)


@dataclass(frozen=True)
class WitnessBounds:
    cutoff_ub: int
    length_ub: int
    max_active_ub: int

    def to_json(self) -> dict:
        return {"cutoff_ub": self.cutoff_ub, "length_ub": self.length_ub, "max_active_ub": self.max_active_ub}


class TraceMismatch(ValueError):
    pass


def check_trace(t: SaturationTrace, p: Protocol) -> None:
    """Raise TraceMismatch unless ``t`` is a well-formed saturation trace of ``p``."""
    if not t.sets or t.sets[0] != frozenset(p.init) or t.counters[0] != len(p.init):
        raise TraceMismatch("trace does not start from the protocol's initial states")
    if not (len(t.sets) == len(t.counters) == t.m + 1 == len(t.justifications) + 1):
        raise TraceMismatch("trace lists have inconsistent lengths")
    transitions = set(p.transitions)
    for i, (q, j) in enumerate(zip(t.inserted, t.justifications)):
        before, after = t.sets[i], t.sets[i + 1]
        if q in before or after != before | {q}:
            raise TraceMismatch(f"iteration {i + 1} does not insert exactly {q!r}")
        if t.counters[i + 1] != t.counters[i] + j.cost:
            raise TraceMismatch(f"iteration {i + 1}: counter does not grow by {j.cost}")
        used = [j.broadcast] + ([j.reception] if j.reception else [])
        if any(x not in transitions for x in used):
            raise TraceMismatch(f"iteration {i + 1}: justification uses unknown transitions")
        b = j.broadcast
        if j.kind == "broadcast":
            ok = b.is_broadcast and b.source in before and b.target == q
        else:
            r = j.reception
            ok = (b.is_broadcast and r.is_receive and r.message == b.message
                  and {b.source, b.target, r.source} <= before and r.target == q)
        if not ok:
            raise TraceMismatch(f"iteration {i + 1}: justification does not derive {q!r}")
    if len(t.sets[-1]) > len(p.states):
        raise TraceMismatch("trace has more states than the protocol")


def witness_bounds(t: SaturationTrace, p: Protocol) -> WitnessBounds:
    check_trace(t, p)
    cutoff, m = t.final_counter, t.m
    bounds = WitnessBounds(cutoff_ub=cutoff, length_ub=cutoff * m, max_active_ub=m)
    nq = len(p.states)
    assert bounds.cutoff_ub <= 2 * nq - len(p.init), bounds
    assert bounds.length_ub <= 2 * nq * nq, bounds
    return bounds
