"""Problem ingestion, instance generation, reporting, and the CLI.

Problem files are plain text: first a line "m n", then m rows of n integers,
then one line with the m entries of b.  '#' starts a comment and blank lines
are ignored; integers may be arbitrarily large.  Reports are JSON with every
rational serialized as a "p/q" decimal string so exactness survives the
interface, and are byte-stable for a fixed input, configuration and seed.

Exit codes: 0 feasible, 1 infeasible, 2 input error, 3 internal assertion
failure.  `check` exits 0 when a report verifies against its problem file
and 1 when it does not.
"""

from __future__ import annotations

import argparse
import json
import math
import random
import sys
import time
from dataclasses import dataclass
from fractions import Fraction

from .certificates import replay_audit
from .driver import (
    AuditLog,
    FeasibleVerdict,
    Problem,
    SolveResult,
    solve_feasibility,
)
from .geometry import Inconsistent, SolverError, row_reduce

DEFAULT_BIT_CAP = 1 << 16


@dataclass
class Config:
    mode: str = "exact"
    bitsize_cap: int = DEFAULT_BIT_CAP
    seed: int = 0
    strictness: str = "abort"
    output: str = "json"
    emit_audit: bool = True


class ParseError(Exception):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def _data_lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if body:
            yield lineno, body


def _ints(body: str, lineno: int) -> list[int]:
    out = []
    for pos, tok in enumerate(body.split(), start=1):
        try:
            out.append(int(tok))
        except ValueError:
            raise ParseError(f"token {pos}: {tok!r} is not an integer", lineno)
    return out


def parse_problem(text: str) -> Problem:
    lines = list(_data_lines(text))
    if not lines:
        raise ParseError("empty problem file")
    lineno, header = lines[0]
    dims = _ints(header, lineno)
    if len(dims) != 2:
        raise ParseError("header must be exactly 'm n'", lineno)
    m, n = dims
    if m < 1 or n < 1:
        raise ParseError("m and n must be positive", lineno)
    if len(lines) != 1 + m + 1:
        raise ParseError(
            f"expected {m} matrix rows and one right-hand-side line,"
            f" found {len(lines) - 1} data lines after the header"
        )
    a = []
    for r in range(m):
        lineno, body = lines[1 + r]
        row = _ints(body, lineno)
        if len(row) != n:
            raise ParseError(f"row has {len(row)} entries, expected {n}", lineno)
        a.append(row)
    lineno, body = lines[1 + m]
    b = _ints(body, lineno)
    if len(b) != m:
        raise ParseError(f"right-hand side has {len(b)} entries, expected {m}", lineno)
    return Problem(a=a, b=b)


def format_problem(problem: Problem) -> str:
    lines = [f"{problem.m} {problem.n}"]
    for row in problem.a:
        lines.append(" ".join(str(x) for x in row))
    lines.append(" ".join(str(x) for x in problem.b))
    return "\n".join(lines) + "\n"


def gen_random(
    seed: int, m: int, n: int, coeff_bound: int = 5, planted: bool = False
) -> Problem:
    """Deterministic random instance with a full-row-rank matrix.

    Entries are uniform in [-coeff_bound, coeff_bound]; rank-deficient draws
    are discarded and redrawn.  With `planted` the right-hand side is A*x0
    for a random nonnegative integer x0, so the instance is feasible by
    construction.
    """
    if m > n:
        raise ValueError("need m <= n")
    if coeff_bound < 1:
        raise ValueError("coeff_bound must be >= 1")
    rng = random.Random(seed)
    for _ in range(1000):
        a = [[rng.randint(-coeff_bound, coeff_bound) for _ in range(n)] for _ in range(m)]
        red = row_reduce(a, [0] * m)
        if isinstance(red, Inconsistent) or len(red.rows) != m:
            continue
        if planted:
            x0 = [rng.randint(0, coeff_bound) for _ in range(n)]
            b = [sum(a[r][j] * x0[j] for j in range(n)) for r in range(m)]
        else:
            b = [rng.randint(-coeff_bound, coeff_bound) for _ in range(m)]
        return Problem(a=a, b=b)
    raise SolverError("could not draw a full-row-rank matrix")


def _frs(x: Fraction) -> str:
    return str(x)


def _audit_json(audit: AuditLog) -> list:
    out = []
    for e in audit.entries:
        out.append(
            {
                "iter": e.index,
                "active": e.active,
                "u_before": [_frs(x) for x in e.u_before],
                "kind": e.kind,
                "v": [_frs(x) for x in e.v],
                "w": [_frs(x) for x in e.w],
                "u_after": [_frs(x) for x in e.u_after],
                "fixed": e.fixed,
            }
        )
    if audit.terminal is not None:
        t = {"reason": audit.terminal.reason, "active": audit.terminal.active}
        if audit.terminal.y is not None:
            t["y"] = [_frs(x) for x in audit.terminal.y]
        if audit.terminal.x_reduced is not None:
            t["x_reduced"] = [_frs(x) for x in audit.terminal.x_reduced]
        out.append({"terminal": t})
    return out


def report_dict(result: SolveResult, config: Config) -> dict:
    stats = result.stats
    ln2 = math.log(2)
    # potential values are tracked in natural log; reported in bits
    report = {
        "verdict": "feasible" if isinstance(result.verdict, FeasibleVerdict) else "infeasible",
        "delta_sq": str(result.audit.delta_sq),
        "stats": {
            "outer_iters": stats.outer_iters,
            "outer_iter_bound": stats.outer_iter_bound,
            "bubble_iters_total": stats.bubble_iters_total,
            "per_phase": [
                {
                    "phase": p.phase,
                    "iterations": p.iterations,
                    "potential_drop": p.potential_drop / ln2,
                }
                for p in stats.phases
            ],
            "potential_trace": [v / ln2 + 0.0 for v in stats.potential_trace],
            "max_bitsize": stats.max_bitsize,
            "rounding_fallbacks": stats.rounding_fallbacks,
            "warnings": list(stats.warnings),
        },
    }
    if isinstance(result.verdict, FeasibleVerdict):
        report["x"] = [_frs(x) for x in result.verdict.x]
    if config.emit_audit:
        report["audit"] = _audit_json(result.audit)
    if config.mode == "float-shadow":
        # logging-only float echoes; nothing on the solving path reads these
        shadow: dict = {"delta_hat": float(result.audit.delta_hat)}
        if isinstance(result.verdict, FeasibleVerdict):
            shadow["x"] = [float(v) for v in result.verdict.x]
        shadow["u_trace"] = [
            [float(v) for v in e.u_after] for e in result.audit.entries
        ]
        report["shadow"] = shadow
    return report


def emit_report(result: SolveResult, config: Config) -> str:
    payload = report_dict(result, config)
    if config.output == "text":
        return _text_report(payload)
    return json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n"


def _text_report(payload: dict) -> str:
    lines = [f"verdict: {payload['verdict']}"]
    if "x" in payload:
        lines.append("x: " + " ".join(payload["x"]))
    s = payload["stats"]
    lines.append(
        f"outer iterations: {s['outer_iters']}, inner iterations:"
        f" {s['bubble_iters_total']}, max bitsize: {s['max_bitsize']}"
    )
    lines.append(f"delta_sq: {payload['delta_sq']}")
    if payload.get("audit"):
        lines.append(f"audit entries: {len(payload['audit'])}")
    for w in s.get("warnings", []):
        lines.append(f"warning: {w}")
    return "\n".join(lines) + "\n"


def _solve_command(args) -> int:
    config = Config(
        bitsize_cap=args.bit_cap,
        strictness=args.strictness,
        output=args.format,
        emit_audit=not args.no_audit,
        mode=args.mode,
    )
    try:
        with open(args.file, encoding="utf-8") as fh:
            problem = parse_problem(fh.read())
    except (OSError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        result = solve_feasibility(
            problem, strictness=config.strictness, bit_cap=config.bitsize_cap
        )
    except SolverError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 3
    sys.stdout.write(emit_report(result, config))
    return 0 if isinstance(result.verdict, FeasibleVerdict) else 1


def _check_command(args) -> int:
    try:
        with open(args.file, encoding="utf-8") as fh:
            problem = parse_problem(fh.read())
        with open(args.report, encoding="utf-8") as fh:
            report = json.load(fh)
    except (OSError, ParseError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    ok = replay_audit(problem.a, problem.b, report)
    print("certificate verified" if ok else "certificate INVALID")
    return 0 if ok else 1


def _random_command(args) -> int:
    try:
        problem = gen_random(
            args.seed, args.m, args.n, coeff_bound=args.coeff_bound, planted=args.planted
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    sys.stdout.write(format_problem(problem))
    return 0


def bench_suite(name: str, count: int, base_seed: int = 0):
    """Deterministic (m, n, seed, planted) mix for the named suite."""
    if name != "small":
        raise ValueError(f"unknown suite {name!r}")
    shapes = [(m, n) for n in range(2, 9) for m in range(1, 5) if m <= n]
    out = []
    for i in range(count):
        m, n = shapes[i % len(shapes)]
        out.append((m, n, base_seed + i, i % 2 == 0))
    return out


def _bench_command(args) -> int:
    try:
        cases = bench_suite(args.suite, args.count, args.seed)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    t0 = time.monotonic()
    feasible = 0
    infeasible = 0
    max_bits = 0
    check_failures = 0
    config = Config(strictness=args.strictness, emit_audit=True)
    for m, n, seed, planted in cases:
        problem = gen_random(seed, m, n, planted=planted)
        try:
            result = solve_feasibility(problem, strictness=config.strictness)
        except SolverError as exc:
            print(f"internal error on seed {seed}: {exc}", file=sys.stderr)
            return 3
        if isinstance(result.verdict, FeasibleVerdict):
            feasible += 1
        else:
            infeasible += 1
        if not replay_audit(problem.a, problem.b, report_dict(result, config)):
            check_failures += 1
        max_bits = max(max_bits, result.stats.max_bitsize)
    summary = {
        "suite": args.suite,
        "count": len(cases),
        "feasible": feasible,
        "infeasible": infeasible,
        "checker_failures": check_failures,
        "max_bitsize": max_bits,
        "elapsed_s": round(time.monotonic() - t0, 3),
    }
    print(json.dumps(summary, sort_keys=True))
    return 0 if check_failures == 0 else 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bubblelp",
        description="Exact LP-feasibility solver for {Ax = b, x >= 0} over the integers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="solve a problem file")
    solve.add_argument("file")
    solve.add_argument("--format", choices=("json", "text"), default="json")
    solve.add_argument("--strictness", choices=("abort", "warn"), default="warn")
    solve.add_argument("--bit-cap", type=int, default=DEFAULT_BIT_CAP)
    solve.add_argument("--mode", choices=("exact", "float-shadow"), default="exact")
    solve.add_argument("--no-audit", action="store_true")

    check = sub.add_parser("check", help="verify a report against its problem")
    check.add_argument("file")
    check.add_argument("report")

    rand = sub.add_parser("random", help="emit a deterministic random instance")
    rand.add_argument("--seed", type=int, required=True)
    rand.add_argument("--m", type=int, required=True)
    rand.add_argument("--n", type=int, required=True)
    rand.add_argument("--coeff-bound", type=int, default=5)
    rand.add_argument("--planted", action="store_true")

    bench = sub.add_parser("bench", help="run a deterministic benchmark suite")
    bench.add_argument("--suite", default="small")
    bench.add_argument("--count", type=int, default=100)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--strictness", choices=("abort", "warn"), default="warn")

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "solve":
        return _solve_command(args)
    if args.command == "check":
        return _check_command(args)
    if args.command == "random":
        return _random_command(args)
    if args.command == "bench":
        return _bench_command(args)
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
