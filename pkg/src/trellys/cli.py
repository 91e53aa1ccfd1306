"""Command-line front end.

Exit codes: 0 success, 1 parse or type error, 2 the program aborted,
3 fuel or search budget exhausted, 4 internal invariant violation (a
checked program got stuck, or a property suite found a counterexample),
5 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence, TextIO

from .cbv import default_fuel, run, trace
from .erasure import erase
from .parallel import BudgetExceeded, joinable
from .cbv import cbv_join
from .prelude import prelude_signature
from .surface import DataDecl, ParseError, parse_expr, parse_with_scope, pretty
from .syntax import Star
from .typecheck import CheckError, CheckedProgram, Signature, check_program, tele_to_pi

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_ABORT = 2
EXIT_FUEL = 3
EXIT_INTERNAL = 4
EXIT_USAGE = 5


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit with status 2
        raise UsageError(f"{self.prog}: {message}")


def _base(no_prelude: bool) -> Signature:
    return Signature() if no_prelude else prelude_signature()


def _load(path: str, no_prelude: bool):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc
    base = _base(no_prelude)
    program, _ = parse_with_scope(text, base.scope.copy())
    return program, check_program(program, base)


def _pick(checked: CheckedProgram, name: Optional[str]) -> str:
    if name is None:
        if "main" in checked.names:
            return "main"
        if not checked.names:
            raise UsageError("the file defines nothing to run")
        return checked.names[-1]
    if name not in checked.names:
        raise UsageError(f"no definition named {name}")
    return name


# ---------------------------------------------------------------------------
# subcommands


def cmd_check(args, out: TextIO) -> int:
    program, checked = _load(args.file, args.no_prelude)
    sig = checked.signature
    for item in program.items:
        if isinstance(item, DataDecl):
            info = sig.datatypes[item.name]
            print(f"data {item.name} : {pretty(tele_to_pi(info.params, Star()))}", file=out)
        else:
            print(f"{item.name} : {pretty(sig.definition(item.name).type)}", file=out)
    if args.emit_derivation:
        doc = {
            "file": args.file,
            "definitions": [
                {"name": n, "derivation": checked.derivations[n].to_json()} for n in checked.names
            ],
        }
        Path(args.emit_derivation).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_erase(args, out: TextIO) -> int:
    _, checked = _load(args.file, args.no_prelude)
    name = _pick(checked, args.definition)
    print(pretty(erase(checked.signature.definition(name).body)), file=out)
    return EXIT_OK


def cmd_run(args, out: TextIO) -> int:
    _, checked = _load(args.file, args.no_prelude)
    name = _pick(checked, args.definition)
    term = checked.signature.definition(name).closed
    fuel = default_fuel() if args.fuel is None else args.fuel
    if args.trace:
        for k, m, rule in trace(term, fuel):
            print(f"{k}: {pretty(m)}" + (f"    [{rule}]" if rule else ""), file=out)
    result = run(term, fuel)
    if result.outcome == "stuck":
        print(f"internal error: evaluation got stuck: {result.reason}", file=sys.stderr)
        print(f"  at: {pretty(result.term)}", file=sys.stderr)
        return EXIT_INTERNAL
    if not args.trace:
        print(pretty(result.term), file=out)
    print(f"{result.outcome} after {result.steps} steps", file=out)
    return {"value": EXIT_OK, "abort": EXIT_ABORT, "out-of-fuel": EXIT_FUEL}[result.outcome]


def cmd_join(args, out: TextIO) -> int:
    base = _base(args.no_prelude)
    sides = []
    for text in (args.lhs, args.rhs):
        sides.append(base.close(erase(parse_expr(text, base.scope.copy()))))
    lhs, rhs = sides
    if args.parallel:
        try:
            verdict = joinable(lhs, rhs, args.depth)
        except BudgetExceeded as exc:
            print(f"search budget exhausted: {exc}", file=sys.stderr)
            return EXIT_FUEL
        how = f"parallel reduction, depth {args.depth}"
    else:
        i, j = args.cbv
        verdict = cbv_join(lhs, rhs, i, j)
        how = f"call-by-value, {i} and {j} steps"
    print(f"{'joinable' if verdict else 'not joinable'} ({how})", file=out)
    return EXIT_OK


def cmd_fuzz(args, out: TextIO) -> int:
    from .meta.suites import SUITES, dump_reports

    names = list(SUITES) if args.suite == "all" else [args.suite]
    reports = [SUITES[n](args.cases, seed=args.seed) for n in names]
    if args.report == "json":
        print(dump_reports(reports), file=out)
    else:
        print("\n".join(r.to_text() for r in reports), file=out)
    return EXIT_OK if all(r.ok for r in reports) else EXIT_INTERNAL


# ---------------------------------------------------------------------------
# argument parsing


def _nonnegative(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"must not be negative: {text}")
    return value


def _positive(text: str) -> int:
    value = _nonnegative(text)
    if value == 0:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    from .meta.suites import SUITES

    parser = _Parser(prog="trellys", description="Check, erase and run programs of the core language.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name: str, help_text: str, file_arg: bool = True) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        if file_arg:
            p.add_argument("file", help="a .tre source file")
        p.add_argument("--no-prelude", action="store_true", help="do not load the standard prelude")
        return p

    p = add("check", "parse and type check a file, printing each declaration's type")
    p.add_argument("--emit-derivation", metavar="OUT", help="write typing derivations as JSON")
    p.set_defaults(handler=cmd_check)

    p = add("erase", "print the erasure of a definition")
    p.add_argument("--def", dest="definition", metavar="NAME")
    p.set_defaults(handler=cmd_erase)

    for name, tracing in (("run", False), ("trace", True)):
        p = add(name, "evaluate a definition" + (", printing every step" if tracing else ""))
        p.add_argument("--def", dest="definition", metavar="NAME", help="defaults to main, else the last definition")
        p.add_argument("--fuel", type=_nonnegative, help="step limit (default: TRELLYS_FUEL or 1000000)")
        if tracing:
            p.set_defaults(trace=True)
        else:
            p.add_argument("--trace", action="store_true", help="print every step")
        p.set_defaults(handler=cmd_run)

    p = add("join", "decide whether two expressions meet", file_arg=False)
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--cbv", nargs=2, type=_nonnegative, metavar=("I", "J"), help="call-by-value step bounds")
    mode.add_argument("--parallel", action="store_true", help="search parallel reducts")
    p.add_argument("--depth", type=_nonnegative, default=None, metavar="K", help="parallel search depth")
    p.add_argument("lhs")
    p.add_argument("rhs")
    p.set_defaults(handler=cmd_join)

    p = add("fuzz", "run a randomised property suite", file_arg=False)
    p.add_argument("--suite", required=True, choices=[*SUITES, "all"])
    p.add_argument("--cases", type=_positive, default=100)
    p.add_argument("--seed", type=_nonnegative, default=0)
    p.add_argument("--report", choices=("json", "text"), default="text")
    p.set_defaults(handler=cmd_fuzz)
    return parser


def main(argv: Optional[Sequence[str]] = None, out: Optional[TextIO] = None) -> int:
    out = out if out is not None else sys.stdout
    try:
        args = build_parser().parse_args(argv)
        if args.command == "join" and args.parallel and args.depth is None:
            raise UsageError("trellys join: --parallel needs --depth K")
        return args.handler(args, out)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except CheckError as exc:
        print(f"type error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except SystemExit as exc:  # --help
        return exc.code if isinstance(exc.code, int) else EXIT_OK


def entry() -> None:
    sys.exit(main())
