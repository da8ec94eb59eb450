"""Learn, build the quotient, check formulas: the steps shared by the CLI and the suite runner."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

from .cegis import CegisConfig, Dataset, Failed, LearnedBisimulation, RunStats, bisimulation_learning
from .ltl import parse_ltl
from .quotient import AbstractSystem, Fails, build_quotient, check_ltl
from .sysfile import print_system
from .system import TransitionSystem
from .templates import ParameterAssignment, template_from_json, template_to_json


@dataclass(frozen=True)
class Verdict:
    formula: str
    holds: bool
    lasso: Optional[str] = None  # rendered counterexample when the formula fails


@dataclass(frozen=True)
class RunReport:
    system: str
    outcome: str  # "learned" or "inconclusive"
    classes: Optional[int]
    template_classes: int
    iterations: int
    enlargements: int
    solver_seconds: float
    wall_seconds: float
    verdicts: tuple[Verdict, ...] = ()
    reason: Optional[str] = None
    cached: bool = False
    stats: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        doc = asdict(self)
        doc["verdicts"] = [asdict(v) for v in self.verdicts]
        return doc

    def verdict(self, formula: str) -> Verdict:
        for v in self.verdicts:
            if v.formula == formula:
                return v
        raise KeyError(formula)


def config_to_json(cfg: CegisConfig) -> dict:
    """The parts of the configuration that affect what is learned."""
    doc = asdict(cfg)
    solver = doc.pop("solver")
    doc["seed"] = solver["seed"]
    doc["timeout_ms"] = solver["timeout_ms"]
    return doc


def cache_key(m: TransitionSystem, cfg: CegisConfig) -> str:
    sys_hash = hashlib.sha256(print_system(m).encode()).hexdigest()[:16]
    cfg_hash = hashlib.sha256(json.dumps(config_to_json(cfg), sort_keys=True).encode()).hexdigest()[:16]
    return f"{sys_hash}-{cfg_hash}"


def save_learned(path: Path, learned: LearnedBisimulation) -> None:
    doc = {
        "template": template_to_json(learned.template),
        "params": learned.params.to_json(),
        "stats": learned.stats.to_json(),
    }
    path.write_text(json.dumps(doc))


def load_learned(path: Path) -> LearnedBisimulation:
    doc = json.loads(path.read_text())
    st = doc["stats"]
    stats = RunStats(
        iterations=st["iterations"],
        enlargements=st["enlargements"],
        reseeds=st["reseeds"],
        widened=st["widened"],
        wall_seconds=st["wall_seconds"],
        counterexamples=[tuple(s) for s in st["counterexamples"]],
        events=st["events"],
    )
    stats.learner.queries, stats.learner.seconds = st["learner_queries"], st["learner_seconds"]
    stats.verifier.queries, stats.verifier.seconds = st["verifier_queries"], st["verifier_seconds"]
    return LearnedBisimulation(
        template_from_json(doc["template"]),
        ParameterAssignment.from_json(doc["params"]),
        Dataset(),
        stats,
    )


def learn_cached(
    m: TransitionSystem,
    cfg: CegisConfig,
    cache_dir: Optional[Path] = None,
) -> tuple[Union[LearnedBisimulation, Failed], bool]:
    """Learn, reusing a stored result for the same system and configuration.

    Only successful runs are cached.  Returns the result and whether it came
    from the cache.
    """
    path = None
    if cache_dir is not None:
        path = Path(cache_dir) / f"{cache_key(m, cfg)}.learned.json"
        if path.exists():
            return load_learned(path), True
    res = bisimulation_learning(m, cfg)
    if path is not None and isinstance(res, LearnedBisimulation):
        path.parent.mkdir(parents=True, exist_ok=True)
        save_learned(path, res)
    return res, False


def check_formulas(q: AbstractSystem, formulas: Sequence[str]) -> tuple[Verdict, ...]:
    out = []
    for text in formulas:
        v = check_ltl(q, parse_ltl(text))
        if isinstance(v, Fails):
            out.append(Verdict(text, False, v.trace.render(q)))
        else:
            out.append(Verdict(text, True))
    return tuple(out)


def run(
    m: TransitionSystem,
    cfg: CegisConfig,
    formulas: Sequence[str] = (),
    cache_dir: Optional[Path] = None,
) -> tuple[RunReport, Union[LearnedBisimulation, Failed], Optional[AbstractSystem]]:
    """Learn (or reuse), build the minimised quotient and check ``formulas``."""
    for text in formulas:
        parse_ltl(text)  # reject bad formulas before spending solver time
    res, cached = learn_cached(m, cfg, cache_dir)
    st = res.stats
    common = dict(
        system=m.name,
        iterations=st.iterations,
        enlargements=st.enlargements,
        solver_seconds=round(st.solver_seconds, 4),
        wall_seconds=round(st.wall_seconds, 4),
        cached=cached,
        stats={k: v for k, v in st.to_json().items() if k != "events"},
    )
    if isinstance(res, Failed):
        n = len(res.template.classes) if res.template is not None else 0
        return RunReport(outcome="inconclusive", classes=None, template_classes=n, reason=res.reason, **common), res, None
    q = build_quotient(m, res, cfg.solver)
    report = RunReport(
        outcome="learned",
        classes=len(q.classes),
        template_classes=len(res.template.classes),
        verdicts=check_formulas(q, formulas),
        **common,
    )
    return report, res, q
