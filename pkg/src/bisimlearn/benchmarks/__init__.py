"""Bundled benchmark systems and the suite runner.

Layout: every case is a ``.sys`` file in ``benchmarks/systems``.  Clock
protocol files are generated by :mod:`.clocks` (``<protocol>-<sf|usf>-<d>``);
termination programs come in pairs, ``<name>-term`` restricted to inputs on
which the loop exits and ``<name>-nonterm`` starting anywhere.  ``fig8`` is
the countdown with observable parity, which has no finite bisimulation.

Each expected verdict records where it comes from: ``published`` for
verdicts reported for the original benchmark, ``derived`` for ones that
follow from our own model reconstruction and were cross-checked with the
explicit-state oracle.
"""

from __future__ import annotations

import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from ..cegis import CegisConfig
from ..pipeline import RunReport, run
from ..sysfile import load_system
from ..system import TransitionSystem


@dataclass(frozen=True)
class Expectation:
    formula: str
    holds: bool
    source: str = "published"  # or "derived"


@dataclass(frozen=True)
class BenchmarkCase:
    name: str
    file: str
    expected: tuple[Expectation, ...] = ()
    outcome: str = "learned"  # expected run outcome
    min_classes: Optional[int] = None  # bounds on the minimised quotient
    max_classes: Optional[int] = None
    nonlinear: bool = False
    scale: str = "small"  # "small" (10/100 and termination), "large" (1k)

    def system(self) -> TransitionSystem:
        return load_system(system_path(self.file))


class VerdictMismatch(AssertionError):
    pass


def system_path(file: str) -> Path:
    return Path(str(resources.files(__package__) / "systems" / file))


def _clock_cases() -> list[BenchmarkCase]:
    out = []
    for proto in ("tte", "con"):
        for safe in (True, False):
            for tag in ("10", "100", "1k"):
                name = f"{proto}-{'sf' if safe else 'usf'}-{tag}"
                if safe:
                    exp = (Expectation("G safe", True), Expectation("G F sync", True))
                else:
                    exp = (Expectation("G safe", False), Expectation("G F sync", False, "derived"))
                out.append(
                    BenchmarkCase(
                        name,
                        f"{name}.sys",
                        exp,
                        min_classes=3,
                        max_classes=6,
                        scale="large" if tag == "1k" else "small",
                    )
                )
    return out


LINEAR_TERMINATION = ("term-loop-1", "term-loop-2", "audio-compr", "euclid", "greater", "smaller")
NONLINEAR_TERMINATION = ("conic", "cubic", "nlr-cond")
TERM_ONLY = ("disjunction", "parallel")  # every input terminates
NONLINEAR_TERM_ONLY = ("quadratic",)


def _termination_cases() -> list[BenchmarkCase]:
    out = []
    for base in LINEAR_TERMINATION + NONLINEAR_TERMINATION:
        nl = base in NONLINEAR_TERMINATION
        bounds = dict(min_classes=3, max_classes=3) if base == "euclid" else {}
        out.append(
            BenchmarkCase(f"{base}-term", f"{base}-term.sys", (Expectation("F terminated", True),), nonlinear=nl, **bounds)
        )
        out.append(
            BenchmarkCase(
                f"{base}-nonterm", f"{base}-nonterm.sys", (Expectation("F terminated", False),), nonlinear=nl, **bounds
            )
        )
    for base in TERM_ONLY + NONLINEAR_TERM_ONLY:
        out.append(
            BenchmarkCase(
                f"{base}-term",
                f"{base}-term.sys",
                (Expectation("F terminated", True),),
                nonlinear=base in NONLINEAR_TERM_ONLY,
            )
        )
    return out


FIG8 = BenchmarkCase("fig8", "fig8.sys", outcome="inconclusive")

CASES: dict[str, BenchmarkCase] = {c.name: c for c in _clock_cases() + _termination_cases() + [FIG8]}


def _pick(pred) -> tuple[BenchmarkCase, ...]:
    return tuple(c for c in CASES.values() if pred(c))


SUITES: dict[str, tuple[BenchmarkCase, ...]] = {
    "clocks": _pick(lambda c: c.name.startswith(("tte", "con"))),
    "clocks-small": _pick(lambda c: c.name.startswith(("tte", "con")) and c.scale == "small"),
    "termination": _pick(lambda c: c.name.endswith("term") and not c.nonlinear),
    "termination-nia": _pick(lambda c: c.name.endswith("term") and c.nonlinear),
    "negative": (FIG8,),
    "ci": _pick(lambda c: c.scale == "small" and not c.nonlinear and c.outcome == "learned"),
    "all": tuple(CASES.values()),
}


def get_suite(name: str) -> tuple[BenchmarkCase, ...]:
    if name in SUITES:
        return SUITES[name]
    if name in CASES:
        return (CASES[name],)
    raise KeyError(f"unknown suite or case {name!r}; suites: {', '.join(sorted(SUITES))}")


@dataclass(frozen=True)
class CaseResult:
    case: BenchmarkCase
    reports: tuple[RunReport, ...]

    @property
    def outcome(self) -> str:
        outs = {r.outcome for r in self.reports}
        return outs.pop() if len(outs) == 1 else "mixed"

    @property
    def times(self) -> list[float]:
        return [r.wall_seconds for r in self.reports]

    @property
    def mean_s(self) -> float:
        return statistics.fmean(self.times)

    @property
    def std_s(self) -> float:
        return statistics.stdev(self.times) if len(self.times) > 1 else 0.0

    @property
    def classes(self) -> Optional[int]:
        return self.reports[0].classes

    def verdict_text(self) -> str:
        r = self.reports[0]
        return ";".join(f"{v.formula}={'holds' if v.holds else 'fails'}" for v in r.verdicts)

    def mismatches(self) -> list[str]:
        out = []
        for r in self.reports:
            if r.outcome != self.case.outcome:
                out.append(f"{self.case.name}: outcome {r.outcome} ({r.reason}), expected {self.case.outcome}")
                continue
            for e in self.case.expected:
                v = r.verdict(e.formula)
                if v.holds != e.holds:
                    out.append(f"{self.case.name}: {e.formula} {'holds' if v.holds else 'fails'}, expected otherwise")
            if r.classes is not None:
                lo, hi = self.case.min_classes, self.case.max_classes
                if (lo is not None and r.classes < lo) or (hi is not None and r.classes > hi):
                    out.append(f"{self.case.name}: {r.classes} quotient classes outside [{lo}, {hi}]")
        return out


def run_case(case: BenchmarkCase, cfg: CegisConfig, repetitions: int = 1) -> CaseResult:
    m = case.system()
    formulas = [e.formula for e in case.expected]
    reports = []
    for i in range(repetitions):
        seed = (cfg.solver.seed or 0) + i
        rcfg = replace(cfg, solver=cfg.solver.with_seed(seed))
        t0 = time.perf_counter()
        report, _, _ = run(m, rcfg, formulas)
        reports.append(replace(report, wall_seconds=round(time.perf_counter() - t0, 4)))
    return CaseResult(case, tuple(reports))


def _run_case_args(args):
    return run_case(*args)


def run_suite(
    cases: Sequence[BenchmarkCase],
    cfg: Optional[CegisConfig] = None,
    repetitions: int = 1,
    workers: int = 1,
    strict: bool = True,
) -> list[CaseResult]:
    """Run every case ``repetitions`` times with consecutive solver seeds.

    With ``strict``, any outcome, verdict or class-count mismatch raises
    :class:`VerdictMismatch` after all cases ran.
    """
    cfg = cfg or CegisConfig()
    jobs = [(c, cfg, repetitions) for c in cases]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_case_args, jobs))
    else:
        results = [run_case(*j) for j in jobs]
    if strict:
        problems = [p for r in results for p in r.mismatches()]
        if problems:
            raise VerdictMismatch("; ".join(problems))
    return results


CSV_COLUMNS = ("name", "outcome", "classes", "mean_s", "std_s", "verdicts")


def results_rows(results: Sequence[CaseResult]) -> list[dict]:
    return [
        {
            "name": r.case.name,
            "outcome": r.outcome,
            "classes": "" if r.classes is None else r.classes,
            "mean_s": f"{r.mean_s:.3f}",
            "std_s": f"{r.std_s:.3f}",
            "verdicts": r.verdict_text(),
        }
        for r in results
    ]

