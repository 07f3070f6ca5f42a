"""Command-line entry point.

Every command prints one JSON document on stdout.  Exit codes: 0 success,
1 negative answer, 2 usage or parse error, 3 search budget exceeded.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .explorer import Budget, BudgetExceeded, exact_cutoff, min_cover_length, reach_report
from .instances import FAMILIES, SetCoverInstance, gen_examples, setcover_reduce
from .protocol import ProtocolError, TargetSet, load_protocol, render
from .saturation import saturate
from .semantics import IllegalExecution, SemanticsError, Semantics, execution_to_json, loads_execution, replay
from .witness import NotCoverable, synthesize_witness

OK, NEGATIVE, USAGE, BUDGET = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _emit(doc, pretty: bool) -> None:
    print(json.dumps(doc, indent=2 if pretty else None))


def _load(path: str):
    try:
        return load_protocol(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from exc


def _targets(p, given: list[str] | None) -> TargetSet:
    if given:
        f = TargetSet(tuple(given))
    elif p.target is not None:
        f = p.target
    else:
        raise UsageError("no target: pass --target or add a target line to the protocol")
    try:
        f.check(p)
    except ProtocolError as exc:
        raise UsageError(str(exc)) from exc
    return f


def cmd_cover(args) -> int:
    p = _load(args.protocol)
    f = _targets(p, args.target)
    trace = saturate(p)
    doc = trace.to_json(p)
    hit = [q for q in f if q in trace.final]
    doc["coverable_targets"] = hit
    doc["coverable"] = bool(hit)
    _emit(doc, args.pretty)
    return OK if hit else NEGATIVE


def cmd_witness(args) -> int:
    p = _load(args.protocol)
    f = _targets(p, args.target)
    sem = Semantics.parse(args.semantics)
    if sem is Semantics.STATIC:
        raise UsageError("witnesses exist only for reconfigurable and lossy semantics")
    try:
        w = synthesize_witness(p, f, sem, stop_at_target=args.stop_at_target)
    except NotCoverable as exc:
        _emit({"coverable": False, "error": str(exc)}, args.pretty)
        return NEGATIVE
    _emit({"execution": execution_to_json(w.execution), "summary": w.summary(p)}, args.pretty)
    return OK


def cmd_explore(args) -> int:
    p = _load(args.protocol)
    sem = Semantics.parse(args.semantics)
    budget = Budget(max_states=args.budget_states, max_seconds=args.budget_seconds)
    k = args.k if args.k is not None else args.k_max
    if k is None:
        raise UsageError("explore needs --k or --k-max")
    if k < 1:
        raise UsageError("the number of nodes must be at least 1")
    doc = {"semantics": sem.value, "k": k, "report": args.report}
    try:
        if args.report == "reach":
            result = reach_report(p, k, sem, budget)
            positive = True
        else:
            f = _targets(p, args.target)
            if args.report == "cutoff":
                result = exact_cutoff(p, f, sem, k, budget)
            else:
                result = min_cover_length(p, f, sem, k, budget)
            positive = result is not None
    except BudgetExceeded as exc:
        doc.update(result=None, error=str(exc), states_visited=exc.states_visited,
                   elapsed_ms=budget.elapsed_ms)
        _emit(doc, args.pretty)
        return BUDGET
    doc.update(result=result, states_visited=budget.visited, elapsed_ms=budget.elapsed_ms)
    _emit(doc, args.pretty)
    return OK if positive else NEGATIVE


def cmd_replay(args) -> int:
    p = _load(args.protocol)
    try:
        text = Path(args.trace).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {args.trace}: {exc.strerror or exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{args.trace}: invalid JSON: {exc}") from exc
    # accept a bare execution or the document printed by `witness`
    if isinstance(doc, dict) and "execution" in doc:
        doc = doc["execution"]
    try:
        e = loads_execution(json.dumps(doc))
    except (SemanticsError, KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"{args.trace}: malformed execution: {exc}") from exc
    try:
        metrics = replay(e, p)
    except IllegalExecution as exc:
        _emit({"legal": False, "step": exc.step, "error": str(exc)}, args.pretty)
        return NEGATIVE
    out = {"legal": True, "metrics": metrics.to_json()}
    f = args.target or (list(p.target) if p.target else None)
    if f:
        out["covers"] = metrics.covers(f)
    _emit(out, args.pretty)
    return OK


def cmd_gen(args) -> int:
    if args.family == "examples":
        for i, (_, p, _) in enumerate(gen_examples()):
            if i:
                print()
            print(render(p), end="")
        return OK
    if args.n is None:
        raise UsageError(f"family {args.family} needs --n")
    try:
        p, _ = FAMILIES[args.family](args.n)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    print(render(p), end="")
    return OK


def cmd_reduce(args) -> int:
    try:
        inst = SetCoverInstance.from_json(json.loads(Path(args.setcover).read_text()))
        p, f, k = setcover_reduce(inst)
    except OSError as exc:
        raise UsageError(f"cannot read {args.setcover}: {exc.strerror or exc}") from exc
    except ValueError as exc:  # includes JSONDecodeError
        raise UsageError(f"{args.setcover}: {exc}") from exc
    _emit({"protocol": render(p), "k": k, "target": list(f)}, args.pretty)
    return OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bcastnet", description="Broadcast network protocol toolkit.")
    sub = ap.add_subparsers(dest="command", required=True)

    def with_protocol(name, help_, before=()):
        sp = sub.add_parser(name, help=help_)
        for arg, arg_help in before:
            sp.add_argument(arg, help=arg_help)
        sp.add_argument("protocol", help="protocol file")
        sp.add_argument("--target", action="append", metavar="STATE",
                        help="target state (repeatable); defaults to the protocol's target line")
        sp.add_argument("--pretty", action="store_true", help="indent the JSON output")
        return sp

    sp = with_protocol("cover", "saturation trace and coverability verdict")
    sp.set_defaults(run=cmd_cover)

    sp = with_protocol("witness", "synthesize a covering execution")
    sp.add_argument("--semantics", default="reconfigurable",
                    choices=["reconfig", "reconfigurable", "lossy"])
    sp.add_argument("--stop-at-target", action="store_true",
                    help="stop once the target is covered instead of covering every coverable state")
    sp.set_defaults(run=cmd_witness)

    sp = with_protocol("explore", "exact search at a fixed number of nodes")
    sp.add_argument("--semantics", default="reconfigurable",
                    choices=["static", "reconfig", "reconfigurable", "lossy"])
    grp = sp.add_mutually_exclusive_group()
    grp.add_argument("--k", type=int, help="number of nodes (length and reach reports)")
    grp.add_argument("--k-max", type=int, help="largest number of nodes tried (cutoff report)")
    sp.add_argument("--report", default="cutoff", choices=["cutoff", "length", "reach"])
    sp.add_argument("--budget-states", type=int, default=None,
                    help="cap on visited configurations (default: $BCAST_BUDGET_STATES or 10^7)")
    sp.add_argument("--budget-seconds", type=float, default=None, help="wall-time cap")
    sp.set_defaults(run=cmd_explore)

    sp = with_protocol("replay", "check an execution trace and report its metrics",
                       before=[("trace", "execution JSON (bare, or as printed by `witness`)")])
    sp.set_defaults(run=cmd_replay)

    sp = sub.add_parser("gen", help="print a protocol family member as DSL text")
    sp.add_argument("--family", required=True, choices=[*FAMILIES, "examples"])
    sp.add_argument("--n", type=int)
    sp.set_defaults(run=cmd_gen)

    sp = sub.add_parser("reduce", help="SetCover instance to MinCover instance")
    sp.add_argument("--setcover", required=True, metavar="FILE")
    sp.add_argument("--pretty", action="store_true")
    sp.set_defaults(run=cmd_reduce)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on bad usage and 0 on --help
        return int(exc.code or 0)
    try:
        return args.run(args)
    except (UsageError, ProtocolError) as exc:
        print(f"bcastnet: error: {exc}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
