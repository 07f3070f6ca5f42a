"""Protocol families, worked examples, and the SetCover to MinCover reduction."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Hashable

from .protocol import BROADCAST, RECEIVE, Protocol, TargetSet, Transition, complete_receptions

SMILEY = "smiley"
BOT = "bot"


def _b(src, msg, tgt):
    return Transition(src, BROADCAST, msg, tgt)


def _r(src, msg, tgt):
    return Transition(src, RECEIVE, msg, tgt)


def _build(name, states, init, messages, transitions, target) -> tuple[Protocol, TargetSet]:
    f = TargetSet(tuple(target))
    p = Protocol(tuple(states), tuple(init), tuple(messages), tuple(transitions), name, f)
    return complete_receptions(p), f


def gen_lower_bound(n: int) -> tuple[Protocol, TargetSet]:
    """Chain needing ``n+1`` nodes and ``(n^2+5n)/2`` steps to reach ``smiley``.

    States ``q0 .. q{2n-1}, smiley``; messages ``a1..an, b1..bn``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    chain = [f"q{i}" for i in range(2 * n)] + [SMILEY]
    trans = []
    for i in range(1, n + 1):
        before, mid, after = chain[2 * i - 2], chain[2 * i - 1], chain[2 * i]
        trans.append(_b(before, f"a{i}", mid))
        trans.append(_b(mid, f"b{i}", mid))
        trans.append(_r(mid, f"b{i}", after))
    messages = [f"a{i}" for i in range(1, n + 1)] + [f"b{i}" for i in range(1, n + 1)]
    return _build(f"lowerbound_{n}", chain, ["q0"], messages, trans, [SMILEY])


def gen_succinctness(n: int) -> tuple[Protocol, TargetSet]:
    """Reconfigurable cutoff 3, lossy cutoff ``n+1``; ``3n+2`` states."""
    if n < 1:
        raise ValueError("n must be at least 1")
    qs = [f"q{i}" for i in range(2 * n + 1)]
    rs = [f"r{i}" for i in range(1, n)]
    r_chain = ["q0"] + rs + [SMILEY]  # r_0 is q0
    trans = [_b("q0", "a", "q0")]
    for i in range(n):
        trans.append(_r(qs[2 * i], "a", qs[2 * i + 1]))
        trans.append(_b(qs[2 * i + 1], f"b{i + 1}", qs[2 * i + 2]))
    for i in range(n):
        trans.append(_r(r_chain[i], f"b{i + 1}", r_chain[i + 1]))
    for i in range(1, n + 1):
        trans.append(_r("q0", f"b{i}", BOT))
    states = qs + rs + [SMILEY, BOT]
    messages = ["a"] + [f"b{i}" for i in range(1, n + 1)]
    return _build(f"succinct_{n}", states, ["q0"], messages, trans, [SMILEY])


def gen_tradeoff(n: int) -> tuple[Protocol, TargetSet]:
    """Static cutoff 3 with quadratic length, or ``n+2`` nodes with linear length."""
    if n < 1:
        raise ValueError("n must be at least 1")
    qs = [f"q{i}" for i in range(n + 1)]
    rs = [f"r{i}" for i in range(1, n)]
    r_chain = [qs[n]] + rs + [SMILEY]  # r_0 is q_n
    trans = [_b("q0", "a", "q0")]
    for i in range(n):
        trans.append(_r(qs[i], "a", qs[i + 1]))
    for i in range(1, n + 1):
        trans.append(_b(qs[n], f"b{i}", "q0"))
    for i in range(n):
        trans.append(_r(r_chain[i], f"b{i + 1}", r_chain[i + 1]))
    messages = ["a"] + [f"b{i}" for i in range(1, n + 1)]
    return _build(f"tradeoff_{n}", qs + rs + [SMILEY], ["q0"], messages, trans, [SMILEY])


def running_example() -> tuple[Protocol, TargetSet]:
    """Eight states; smiley is coverable by reconfiguring with three nodes, never on a fixed topology."""
    states = ["q0", "q1", "q2", "q3", "q4", "r1", SMILEY, BOT]
    trans = [
        _b("q0", "a", "q0"),
        _r("q0", "a", "q1"),
        _r("q0", "b1", "r1"),
        _r("q0", "b1", BOT),
        _r("q0", "b2", BOT),
        _b("q1", "b1", "q2"),
        _r("q2", "a", "q3"),
        _b("q3", "b2", "q4"),
        _r("r1", "b2", SMILEY),
    ]
    return _build("running_example", states, ["q0"], ["a", "b1", "b2"], trans, [SMILEY])


def chain_example() -> tuple[Protocol, TargetSet]:
    """Seven-state protocol where every state needs the previous ones; target ``q6``."""
    states = [f"q{i}" for i in range(7)]
    trans = [
        _b("q0", "a", "q1"),
        _r("q0", "a", "q2"),
        _b("q2", "b", "q3"),
        _r("q1", "b", "q4"),
        _b("q4", "c", "q5"),
        _r("q3", "c", "q6"),
    ]
    return _build("chain", states, ["q0"], ["a", "b", "c"], trans, ["q6"])


def gen_examples() -> list[tuple[str, Protocol, TargetSet]]:
    return [("running_example", *running_example()), ("chain", *chain_example())]


FAMILIES = {
    "lowerbound": gen_lower_bound,
    "succinct": gen_succinctness,
    "tradeoff": gen_tradeoff,
}


# ---------------------------------------------------------------------------
# SetCover
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SetCoverInstance:
    universe: tuple
    collection: tuple
    k: int

    def __post_init__(self):
        object.__setattr__(self, "universe", tuple(self.universe))
        object.__setattr__(self, "collection", tuple(frozenset(s) for s in self.collection))
        if len(set(self.universe)) != len(self.universe):
            raise ValueError("universe has repeated elements")
        u = set(self.universe)
        for j, s in enumerate(self.collection):
            if not s <= u:
                raise ValueError(f"subset {j + 1} is not contained in the universe")
        if self.k < 0:
            raise ValueError("k must be nonnegative")

    @classmethod
    def from_json(cls, doc) -> "SetCoverInstance":
        try:
            return cls(tuple(doc["universe"]), tuple(tuple(s) for s in doc["sets"]), int(doc["k"]))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed SetCover document: {exc}") from exc

    def to_json(self) -> dict:
        order = {a: i for i, a in enumerate(self.universe)}
        return {
            "universe": list(self.universe),
            "sets": [sorted(s, key=order.__getitem__) for s in self.collection],
            "k": self.k,
        }


def _message_name(element: Hashable) -> str:
    return f"a_{element}"


def setcover_reduce(inst: SetCoverInstance) -> tuple[Protocol, TargetSet, int]:
    n, m = len(inst.universe), len(inst.collection)
    if n < 1 or m < 1:
        raise ValueError("the reduction needs a nonempty universe and collection")
    msgs = [_message_name(a) for a in inst.universe]
    if len(set(msgs)) != n:
        raise ValueError("universe elements must have distinct string forms")
    ss = [f"s{j}" for j in range(1, m + 1)]
    qs = [f"q{i}" for i in range(1, n + 1)]
    trans = []
    for sj, subset in zip(ss, inst.collection):
        for a in inst.universe:  # universe order keeps the output deterministic
            if a in subset:
                trans.append(_b(sj, _message_name(a), sj))
    chain = qs + [SMILEY]
    for i in range(n):
        trans.append(_r(chain[i], msgs[i], chain[i + 1]))
    p, f = _build("setcover", ss + qs + [SMILEY], ss + ["q1"], msgs, trans, [SMILEY])
    return p, f, inst.k + 1


def setcover_bruteforce(inst: SetCoverInstance, max_sets: int = 20) -> bool:
    m = len(inst.collection)
    if m > max_sets:
        raise ValueError(f"brute force limited to {max_sets} subsets, got {m}")
    universe = frozenset(inst.universe)
    for size in range(0, min(inst.k, m) + 1):
        for combo in itertools.combinations(inst.collection, size):
            if frozenset().union(*combo) >= universe:
                return True
    return False


def all_setcover_instances(max_n: int, max_m: int) -> list[SetCoverInstance]:
    """Every instance with universe ``1..n`` (n <= max_n), m <= max_m subsets and k <= m.

    Collections are enumerated as multisets of subsets, since order and the
    labelling of subsets do not change either problem's answer.
    """
    out = []
    for n in range(1, max_n + 1):
        universe = tuple(range(1, n + 1))
        subsets = [frozenset(c) for r in range(n + 1) for c in itertools.combinations(universe, r)]
        for m in range(1, max_m + 1):
            for coll in itertools.combinations_with_replacement(subsets, m):
                for k in range(0, m + 1):
                    out.append(SetCoverInstance(universe, coll, k))
    return out

