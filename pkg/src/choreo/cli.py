"""Command-line entry point: ``choreo check | project | run | bench``.

Exit codes: 0 success, 1 check or run failure, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .bench import BENCHMARKS, VARIANTS, BenchConfig, run_bench
from .lang.checks import check_program, render_error
from .lang.evaluate import ImplRegistry, MissingImplFunction
from .lang.interp import SessionAborted
from .lang.parser import ChorSyntaxError, parse, parse_impls, parse_value
from .lang.values import format_value
from .projection.listing import format_endpoint
from .projection.lower import project, required_functions
from .runtime.session import SessionError, World
from .runtime.trace import Trace

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class _Exit(Exception):
    def __init__(self, code: int):
        self.code = code


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        print(f"error: cannot read {path}: {exc.strerror or exc}", file=sys.stderr)
        raise _Exit(EXIT_USAGE)


def _syntax_report(source: str, err: ChorSyntaxError) -> str:
    if err.span is None:
        return f"ERROR: {err}"
    lines = source.splitlines()
    line = lines[err.span.line - 1] if 0 < err.span.line <= len(lines) else ""
    indent = len(line) - len(line.lstrip())
    msg = err.message + (f" (expected {err.hint})" if err.hint else "")
    return "\n".join([
        f"ERROR: {msg}",
        "|",
        f"| {line.strip()}",
        "| " + " " * max(0, err.span.column - 1 - indent) + "^" * max(1, err.span.length),
        "|",
        f"|-- {err.span.file.rsplit('/', 1)[-1]}:{err.span.line}",
    ])


def _load_checked(path: str, out):
    """Parse and check ``path``; print the report to ``out`` and exit 1 on errors."""
    source = _read(path)
    try:
        prog = parse(source, path)
    except ChorSyntaxError as exc:
        print(_syntax_report(source, exc), file=out)
        raise _Exit(EXIT_FAIL)
    errors = check_program(prog)
    if errors:
        print("\n\n".join(render_error(prog, e) for e in errors), file=out)
        raise _Exit(EXIT_FAIL)
    return prog


# ------------------------------------------------------------ commands


def cmd_check(args) -> int:
    prog = _load_checked(args.file, sys.stdout)
    if args.interfaces:
        for role in prog.roles:
            specs = required_functions(prog, role)
            print(f"{role}: {', '.join(str(s) for s in specs)}".rstrip())
    else:
        print(f"ok: {args.file}")
    return EXIT_OK


def cmd_project(args) -> int:
    prog = _load_checked(args.file, sys.stdout)
    if args.role is not None and args.role not in prog.roles:
        print(f"error: unknown role {args.role}; roles are {', '.join(prog.roles)}", file=sys.stderr)
        return EXIT_USAGE
    roles = [args.role] if args.role else list(prog.roles)
    print("\n\n".join(format_endpoint(project(prog, r)) for r in roles))
    return EXIT_OK


def _parse_args(values: list) -> list:
    out = []
    for text in values:
        try:
            out.append(parse_value(text))
        except ChorSyntaxError as exc:
            print(f"error: bad --args value {text!r}: {exc}", file=sys.stderr)
            raise _Exit(EXIT_USAGE)
    return out


def cmd_run(args) -> int:
    prog = _load_checked(args.file, sys.stderr)
    impls = ImplRegistry()
    for path in args.impl or ():
        try:
            parse_impls(_read(path), path, impls)
        except ChorSyntaxError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_FAIL
    values = _parse_args(args.args or [])
    transport = None
    if args.transport == "tcp":
        from .transport.tcp import TcpTransport
        transport = TcpTransport()
    trace = Trace(enabled=args.trace is not None)
    world = World(seed=args.seed, transport=transport, trace=trace)
    programs = {r: project(prog, r) for r in prog.roles}
    try:
        session = world.start(programs, impls, values)
        world.run(until=lambda: session.done)
    except (MissingImplFunction, SessionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    finally:
        world.close()
        if args.trace is not None:
            try:
                trace.write_jsonl(args.trace)
            except OSError as exc:
                print(f"error: cannot write trace {args.trace}: {exc}", file=sys.stderr)
    if session.status == "aborted":
        err = session.error
        reason = err.reason if isinstance(err, SessionAborted) else str(err)
        print(f"session aborted: {reason}", file=sys.stderr)
        return EXIT_FAIL
    for role, value in session.result_map().items():
        print(f"{role}: {format_value(value)}")
    print(f"recoveries: {session.recoveries}")
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.iters < 0:
        print("error: --iters must be non-negative", file=sys.stderr)
        return EXIT_USAGE
    cfg = BenchConfig(name=args.name, iters=args.iters, variant=args.variant, seed=args.seed)
    try:
        report = run_bench(cfg)
    except SessionAborted as exc:
        print(f"session aborted: {exc.reason}", file=sys.stderr)
        return EXIT_FAIL
    for line in report.lines():
        print(line)
    for role, value in report.result.items():
        print(f"{role}: {format_value(value)}")
    return EXIT_OK


# ------------------------------------------------------------ entry point


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="choreo", description="Choreographic programming toolkit")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="parse and statically check a choreography")
    c.add_argument("file")
    c.add_argument("--interfaces", action="store_true",
                   help="list the local functions each role's implementation must provide")
    c.set_defaults(func=cmd_check)

    pr = sub.add_parser("project", help="print endpoint programs")
    pr.add_argument("file")
    pr.add_argument("--role", help="only this role (default: all)")
    pr.set_defaults(func=cmd_project)

    r = sub.add_parser("run", help="run a choreography on the actor runtime")
    r.add_argument("file")
    r.add_argument("--impl", action="append", metavar="FILE.chim",
                   help="implementation file (repeatable)")
    r.add_argument("--args", nargs="*", metavar="VALUE", help="arguments to run/N, as literals")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--transport", choices=("mem", "tcp"), default="mem")
    r.add_argument("--trace", metavar="PATH", help="write the JSON-lines trace here")
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("bench", help="run a generated benchmark")
    b.add_argument("name", choices=BENCHMARKS)
    b.add_argument("--iters", type=int, default=1000)
    b.add_argument("--variant", choices=VARIANTS, default="chk")
    b.add_argument("--seed", type=int, default=0)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors, 0 on --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except _Exit as exc:
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
