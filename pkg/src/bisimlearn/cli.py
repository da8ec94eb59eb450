"""Command-line entry point.

Exit codes: 0 success (learned, formula holds, suite as expected);
1 usage or parse error; 2 inconclusive; 3 solver not found;
4 formula fails or suite mismatch; 5 oracle cross-check disagrees.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional

from .benchmarks import CSV_COLUMNS, get_suite, results_rows, run_suite
from .cegis import CegisConfig, LearnedBisimulation
from .ltl import FormulaSyntaxError
from .oracle import OK, exhaustive_condition_check, finite_restriction, validate_partition
from .pipeline import RunReport, run
from .quotient import AbstractSystem, classify_abstract, export_dot, export_explicit
from .smt import SolverConfig, SolverNotFound
from .sysfile import SystemSyntaxError, load_system
from .system import labels_of, simulate
from .templates import dump_text

EXIT_OK, EXIT_USAGE, EXIT_INCONCLUSIVE, EXIT_NO_SOLVER, EXIT_FAILS, EXIT_ORACLE = 0, 1, 2, 3, 4, 5

CACHE_ENV = "BISIMLEARN_CACHE"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _engine_flags(p: argparse.ArgumentParser) -> None:
    d = CegisConfig()
    p.add_argument("--solver", help="SMT solver executable (default: $BISIMLEARN_SOLVER or z3)")
    p.add_argument("--seed", type=int, default=0, help="solver random seed")
    p.add_argument("--radius", type=int, default=d.radius, help="initial sample box radius")
    p.add_argument("--stride", type=int, default=d.stride, help="initial sample grid stride")
    p.add_argument("--max-enlarge", type=int, default=d.max_enlargements, help="template enlargement budget")
    p.add_argument("--max-iters", type=int, default=d.max_iterations, help="CEGIS iterations per template")
    p.add_argument("--param-bound", type=int, default=d.param_bound, help="bound on template coefficients")
    p.add_argument("--timeout-ms", type=int, default=SolverConfig().timeout_ms, help="per-query solver timeout")
    p.add_argument("--oracle", action="store_true", help="cross-check the result with the explicit-state oracle")
    p.add_argument("--oracle-radius", type=int, default=20, help="box radius for the oracle cross-check")
    p.add_argument("--cache", type=Path, help=f"learned-artifact cache directory (default: ${CACHE_ENV} if set)")
    p.add_argument("--no-cache", action="store_true", help="always learn from scratch")


def config_from_args(args) -> CegisConfig:
    solver = SolverConfig(timeout_ms=args.timeout_ms, seed=args.seed)
    if args.solver:
        solver = replace(solver, executable=args.solver)
    return CegisConfig(
        radius=args.radius,
        stride=args.stride,
        max_iterations=args.max_iters,
        max_enlargements=args.max_enlarge,
        param_bound=args.param_bound,
        solver=solver,
    )


def _cache_dir(args) -> Optional[Path]:
    if args.no_cache:
        return None
    if args.cache is not None:
        return args.cache
    env = os.environ.get(CACHE_ENV)
    return Path(env) if env else None


def _oracle_check(m, learned: LearnedBisimulation, q: AbstractSystem, radius: int) -> dict:
    cond = exhaustive_condition_check(m, learned.template, learned.params, radius)
    fr = finite_restriction(m, radius)
    part = validate_partition(fr, classify_abstract(q, learned))
    return {
        "radius": radius,
        "conditions": "ok" if cond == OK else repr(cond),
        "partition": "ok" if part == OK else repr(part),
        "states": len(fr.states),
    }


def _print_report(r: RunReport, out) -> None:
    if r.outcome == "learned":
        print(
            f"{r.system}: learned {r.classes} classes ({r.template_classes} in the template) "
            f"after {r.iterations} iterations, {r.enlargements} enlargements, {r.wall_seconds:.2f} s",
            file=out,
        )
    else:
        print(f"{r.system}: inconclusive ({r.reason}) after {r.iterations} iterations", file=out)
    for v in r.verdicts:
        print(f"  {v.formula}: {'Holds' if v.holds else 'Fails'}", file=out)
        if v.lasso:
            print(f"    counterexample: {v.lasso}", file=out)


def cmd_learn(args) -> int:
    m = load_system(args.system)
    cfg = config_from_args(args)
    report, res, q = run(m, cfg, args.formula or (), _cache_dir(args))
    doc = report.to_json()
    code = EXIT_OK if report.outcome == "learned" else EXIT_INCONCLUSIVE
    if q is not None and args.oracle:
        doc["oracle"] = _oracle_check(m, res, q, args.oracle_radius)
        if "ok" != doc["oracle"]["conditions"] or "ok" != doc["oracle"]["partition"]:
            code = EXIT_ORACLE
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.system).name.removesuffix(".sys")
    if q is not None:
        (out / f"{stem}.bdt.txt").write_text(dump_text(res.template, res.params))
        (out / f"{stem}.quotient.dot").write_text(export_dot(q))
        (out / f"{stem}.quotient.tbl").write_text(export_explicit(q))
    (out / f"{stem}.report.json").write_text(json.dumps(doc, indent=2) + "\n")
    _print_report(report, sys.stdout)
    if code == EXIT_ORACLE:
        print(f"  oracle cross-check failed: {doc['oracle']}", file=sys.stderr)
    return code


def cmd_check(args) -> int:
    m = load_system(args.system)
    cfg = config_from_args(args)
    report, res, q = run(m, cfg, args.formula, _cache_dir(args))
    if report.outcome != "learned":
        print(f"inconclusive: {report.reason}")
        return EXIT_INCONCLUSIVE
    if args.oracle:
        o = _oracle_check(m, res, q, args.oracle_radius)
        if o["conditions"] != "ok" or o["partition"] != "ok":
            print(f"oracle cross-check failed: {o}", file=sys.stderr)
            return EXIT_ORACLE
    code = EXIT_OK
    for v in report.verdicts:
        if v.holds:
            print(f"{v.formula}: Holds")
        else:
            print(f"{v.formula}: Fails")
            print(f"  counterexample: {v.lasso}")
            code = EXIT_FAILS
    return code


def _state(text: str) -> list[int]:
    try:
        return [int(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a state: {text!r}") from None


def cmd_simulate(args) -> int:
    m = load_system(args.system)
    s = [x for part in args.state for x in part]
    if len(s) != m.dimension:
        raise UsageError(f"state has {len(s)} entries, {m.name} has variables {', '.join(m.variables)}")
    for i, x in enumerate(simulate(m, s, args.steps)):
        lab = ",".join(sorted(labels_of(m, x)))
        print(f"{i:4d}  ({', '.join(map(str, x))})  {{{lab}}}")
    return EXIT_OK


def cmd_bench(args) -> int:
    try:
        cases = get_suite(args.suite)
    except KeyError as exc:
        raise UsageError(exc.args[0]) from None
    cfg = config_from_args(args)
    code = EXIT_OK
    results = run_suite(cases, cfg, args.repeat, args.workers, strict=False)
    problems = [p for r in results for p in r.mismatches()]
    rows = results_rows(results)
    out = open(args.csv, "w", newline="") if args.csv else sys.stdout
    try:
        w = csv.DictWriter(out, fieldnames=CSV_COLUMNS)
        w.writeheader()
        w.writerows(rows)
    finally:
        if args.csv:
            out.close()
    if problems:
        for p in problems:
            print(f"MISMATCH {p}", file=sys.stderr)
        code = EXIT_FAILS
    return code


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bisimlearn", description="Learn stutter-insensitive bisimulations and check LTL without next.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="log progress (twice for solver detail)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    q = sub.add_parser("learn", help="learn a bisimulation and write the classifier and quotient")
    q.add_argument("system", help="system file")
    q.add_argument("--out", default=".", help="directory for output files")
    q.add_argument("--formula", "-f", action="append", help="also check this formula (repeatable)")
    _engine_flags(q)
    q.set_defaults(func=cmd_learn)

    q = sub.add_parser("check", help="check LTL formulas (without X) on the learned quotient")
    q.add_argument("system", help="system file")
    q.add_argument("formula", nargs="+", help="formula over the system's propositions, e.g. 'G F sync'")
    _engine_flags(q)
    q.set_defaults(func=cmd_check)

    q = sub.add_parser("simulate", help="print a trajectory")
    q.add_argument("system", help="system file")
    q.add_argument("state", nargs="+", type=_state, help="initial state, e.g. '2 3' or 2,3")
    q.add_argument("--steps", type=int, default=20)
    q.set_defaults(func=cmd_simulate)

    q = sub.add_parser("bench", help="run a benchmark suite and print CSV")
    q.add_argument("suite", help="suite name (ci, clocks, clocks-small, termination, termination-nia, negative, all) or a case")
    q.add_argument("--repeat", type=int, default=1, help="repetitions per case, with consecutive seeds")
    q.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    q.add_argument("--csv", help="write the table here instead of stdout")
    _engine_flags(q)
    q.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=[logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)],
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (SystemSyntaxError, FormulaSyntaxError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SolverNotFound as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_SOLVER


if __name__ == "__main__":
    sys.exit(main())
