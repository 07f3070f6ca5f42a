"""Broadcast protocols: data model, DSL parser/renderer, normalization and validation.

A protocol is a finite automaton whose transitions either broadcast (``!m``)
or receive (``?m``) a message.  The textual format is line oriented::

    protocol example
    states: q0 q1
    init: q0
    messages: a
    trans:
      q0 !a q0
      q0 ?a q1
    target: q1

``#`` starts a comment.  The ``target:`` line is optional.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

BROADCAST = "!"
RECEIVE = "?"

_IDENT = re.compile(r"[\w][\w.'\-]*\Z")


class ProtocolError(ValueError):
    """Raised when protocol text or a protocol value is malformed."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)


@dataclass(frozen=True)
class Transition:
    source: str
    kind: str  # BROADCAST or RECEIVE
    message: str
    target: str

    def __post_init__(self):
        if self.kind not in (BROADCAST, RECEIVE):
            raise ProtocolError(f"transition kind must be '!' or '?', got {self.kind!r}")

    @property
    def is_broadcast(self) -> bool:
        return self.kind == BROADCAST

    @property
    def is_receive(self) -> bool:
        return self.kind == RECEIVE

    def as_list(self) -> list[str]:
        return [self.source, self.kind + self.message, self.target]

    @classmethod
    def from_list(cls, triple) -> "Transition":
        src, action, tgt = triple
        if not action or action[0] not in (BROADCAST, RECEIVE):
            raise ProtocolError(f"bad action {action!r}; expected '!msg' or '?msg'")
        return cls(src, action[0], action[1:], tgt)

    def __str__(self) -> str:
        return f"{self.source} {self.kind}{self.message} {self.target}"


@dataclass(frozen=True)
class TargetSet:
    states: tuple[str, ...]

    def __post_init__(self):
        if not self.states:
            raise ProtocolError("target set must be nonempty")
        object.__setattr__(self, "states", tuple(dict.fromkeys(self.states)))

    def __contains__(self, state: str) -> bool:
        return state in self.states

    def __iter__(self):
        return iter(self.states)

    def check(self, protocol: "Protocol") -> None:
        unknown = [q for q in self.states if q not in protocol.state_index]
        if unknown:
            raise ProtocolError(f"target states not in protocol: {', '.join(unknown)}")


@dataclass(frozen=True)
class Protocol:
    """Immutable protocol ``(Q, I, M, Delta)``; all tuples keep declaration order."""

    states: tuple[str, ...]
    init: tuple[str, ...]
    messages: tuple[str, ...]
    transitions: tuple[Transition, ...]
    name: str = "protocol"
    target: TargetSet | None = field(default=None, compare=True)

    def __post_init__(self):
        for attr in ("states", "init", "messages", "transitions"):
            object.__setattr__(self, attr, tuple(getattr(self, attr)))

    @cached_property
    def state_index(self) -> dict[str, int]:
        return {q: i for i, q in enumerate(self.states)}

    @cached_property
    def message_index(self) -> dict[str, int]:
        return {m: i for i, m in enumerate(self.messages)}

    @cached_property
    def broadcasts(self) -> tuple[Transition, ...]:
        return tuple(t for t in self.transitions if t.is_broadcast)

    @cached_property
    def receptions(self) -> tuple[Transition, ...]:
        return tuple(t for t in self.transitions if t.is_receive)

    @cached_property
    def _broadcasts_from(self) -> dict[str, tuple[Transition, ...]]:
        table: dict[str, list[Transition]] = {}
        for t in self.broadcasts:
            table.setdefault(t.source, []).append(t)
        return {q: tuple(ts) for q, ts in table.items()}

    @cached_property
    def _receptions_of(self) -> dict[tuple[str, str], tuple[Transition, ...]]:
        table: dict[tuple[str, str], list[Transition]] = {}
        for t in self.receptions:
            table.setdefault((t.source, t.message), []).append(t)
        return {key: tuple(ts) for key, ts in table.items()}

    def broadcasts_from(self, state: str) -> tuple[Transition, ...]:
        return self._broadcasts_from.get(state, ())

    def enabled_receptions(self, state: str, message: str) -> tuple[Transition, ...]:
        return self._receptions_of.get((state, message), ())

    def with_target(self, states: Iterable[str] | None) -> "Protocol":
        target = TargetSet(tuple(states)) if states else None
        return Protocol(self.states, self.init, self.messages, self.transitions, self.name, target)

    def without_transitions(self) -> "Protocol":
        return Protocol(self.states, self.init, self.messages, (), self.name, self.target)


# ---------------------------------------------------------------------------
# DSL
# ---------------------------------------------------------------------------

_SECTIONS = ("states", "init", "messages", "target")


def _strip_comment(line: str) -> str:
    pos = line.find("#")
    return line if pos < 0 else line[:pos]


def _idents(rest: str, lineno: int, offset: int) -> list[tuple[str, int]]:
    out = []
    for m in re.finditer(r"\S+", rest):
        tok = m.group()
        col = offset + m.start() + 1
        if not _IDENT.match(tok):
            raise ProtocolError(f"invalid identifier {tok!r}", lineno, col)
        out.append((tok, col))
    return out


def parse_protocol(text: str) -> Protocol:
    """Parse protocol DSL text.  Receptions are *not* completed."""
    name = None
    sections: dict[str, list[tuple[str, int]]] = {}
    section_lines: dict[str, int] = {}
    transitions: list[tuple[Transition, int, int]] = []
    in_trans = False

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line.strip():
            continue
        indent = len(line) - len(line.lstrip())
        stripped = line.strip()

        if name is None:
            m = re.match(r"protocol\s+(\S+)\s*\Z", stripped)
            if not m:
                raise ProtocolError("expected 'protocol <name>' header", lineno, indent + 1)
            name = m.group(1)
            continue

        head = re.match(r"(\w+)\s*:", stripped)
        if head and head.group(1) in _SECTIONS + ("trans",):
            key = head.group(1)
            if key in section_lines:
                raise ProtocolError(f"duplicate section {key!r}", lineno, indent + 1)
            section_lines[key] = lineno
            rest = stripped[head.end():]
            if key == "trans":
                if rest.strip():
                    raise ProtocolError("transitions go on their own lines after 'trans:'", lineno,
                                        indent + head.end() + 1)
                in_trans = True
                continue
            in_trans = False
            sections[key] = _idents(rest, lineno, indent + head.end())
            continue

        if not in_trans:
            raise ProtocolError(f"unexpected line {stripped!r}", lineno, indent + 1)
        parts = list(re.finditer(r"\S+", line))
        if len(parts) != 3:
            raise ProtocolError("transition must be '<state> !<msg> <state>' or '<state> ?<msg> <state>'",
                                lineno, indent + 1)
        src, action, tgt = (p.group() for p in parts)
        if action[0] not in (BROADCAST, RECEIVE) or not _IDENT.match(action[1:] or "-"):
            raise ProtocolError(f"bad action {action!r}", lineno, parts[1].start() + 1)
        for tok, p in ((src, parts[0]), (tgt, parts[2])):
            if not _IDENT.match(tok):
                raise ProtocolError(f"invalid identifier {tok!r}", lineno, p.start() + 1)
        transitions.append((Transition(src, action[0], action[1:], tgt), lineno, parts[0].start() + 1))

    if name is None:
        raise ProtocolError("empty protocol text")
    for key in ("states", "init", "messages"):
        if key not in section_lines:
            raise ProtocolError(f"missing '{key}:' section")

    def unique(key: str) -> tuple[str, ...]:
        seen: dict[str, int] = {}
        for tok, col in sections[key]:
            if tok in seen:
                raise ProtocolError(f"duplicate identifier {tok!r} in '{key}:'", section_lines[key], col)
            seen[tok] = col
        return tuple(seen)

    states = unique("states")
    messages = unique("messages")
    init = unique("init")
    if not init:
        raise ProtocolError("init set must be nonempty", section_lines["init"])
    state_set = set(states)
    for tok, col in sections["init"]:
        if tok not in state_set:
            raise ProtocolError(f"unknown state {tok!r} in init", section_lines["init"], col)

    message_set = set(messages)
    seen_trans: set[Transition] = set()
    trans_out: list[Transition] = []
    for t, lineno, col in transitions:
        for q in (t.source, t.target):
            if q not in state_set:
                raise ProtocolError(f"unknown state {q!r}", lineno, col)
        if t.message not in message_set:
            raise ProtocolError(f"unknown message {t.message!r}", lineno, col)
        if t in seen_trans:
            raise ProtocolError(f"duplicate transition '{t}'", lineno, col)
        seen_trans.add(t)
        trans_out.append(t)

    target = None
    if "target" in sections:
        tgt = unique("target")
        for tok, col in sections["target"]:
            if tok not in state_set:
                raise ProtocolError(f"unknown state {tok!r} in target", section_lines["target"], col)
        if not tgt:
            raise ProtocolError("target set must be nonempty", section_lines["target"])
        target = TargetSet(tgt)

    return Protocol(states, init, messages, tuple(trans_out), name, target)


def render(p: Protocol) -> str:
    lines = [
        f"protocol {p.name}",
        "states: " + " ".join(p.states),
        "init: " + " ".join(p.init),
        "messages: " + " ".join(p.messages),
        "trans:",
    ]
    lines.extend(f"  {t}" for t in p.transitions)
    if p.target is not None:
        lines.append("target: " + " ".join(p.target.states))
    return "\n".join(line.rstrip() for line in lines) + "\n"


# ---------------------------------------------------------------------------
# Normalization and validation
# ---------------------------------------------------------------------------

def complete_receptions(p: Protocol) -> Protocol:
    """Materialize the implicit ``(q, ?m, q)`` self-loops.

    Added loops are appended after the declared transitions, ordered by state
    then message.  Idempotent.
    """
    missing = [
        Transition(q, RECEIVE, m, q)
        for q in p.states
        for m in p.messages
        if not p.enabled_receptions(q, m)
    ]
    if not missing:
        return p
    return Protocol(p.states, p.init, p.messages, p.transitions + tuple(missing), p.name, p.target)


def is_reception_complete(p: Protocol) -> bool:
    return all(p.enabled_receptions(q, m) for q in p.states for m in p.messages)


@dataclass(frozen=True)
class Diagnostic:
    code: str
    subject: str
    message: str
    severity: str = "error"

    def __str__(self) -> str:
        return f"{self.severity}: {self.code}: {self.message}"


def validate(p: Protocol) -> list[Diagnostic]:
    """Check every protocol invariant; an empty list means well-formed and complete."""
    out: list[Diagnostic] = []

    def dup(kind: str, items: Iterable[str]) -> None:
        seen = set()
        for x in items:
            if x in seen:
                out.append(Diagnostic(f"duplicate-{kind}", x, f"{kind} {x!r} declared twice"))
            seen.add(x)

    dup("state", p.states)
    dup("message", p.messages)
    dup("init", p.init)
    states, messages = set(p.states), set(p.messages)
    if not p.init:
        out.append(Diagnostic("init-empty", "", "init set is empty"))
    for q in p.init:
        if q not in states:
            out.append(Diagnostic("init-not-subset", q, f"initial state {q!r} is not a declared state"))
    seen_t: set[Transition] = set()
    for t in p.transitions:
        for q in (t.source, t.target):
            if q not in states:
                out.append(Diagnostic("unknown-state", q, f"transition '{t}' uses undeclared state {q!r}"))
        if t.message not in messages:
            out.append(Diagnostic("unknown-message", t.message,
                                  f"transition '{t}' uses undeclared message {t.message!r}"))
        if t in seen_t:
            out.append(Diagnostic("duplicate-transition", str(t), f"transition '{t}' declared twice"))
        seen_t.add(t)
    if p.target is not None:
        for q in p.target.states:
            if q not in states:
                out.append(Diagnostic("target-not-subset", q, f"target state {q!r} is not a declared state"))
    for q in p.states:
        for m in p.messages:
            if not p.enabled_receptions(q, m):
                out.append(Diagnostic("incomplete-receptions", f"{q}?{m}",
                                      f"no reception of {m!r} from {q!r}", severity="warning"))
    return out


def load_protocol(path, complete: bool = True) -> Protocol:
    with open(path, encoding="utf-8") as fh:
        p = parse_protocol(fh.read())
    return complete_receptions(p) if complete else p
