"""Counterexample-guided learning of stutter-insensitive bisimulations.

The learner fits template parameters to a finite set of sampled transitions;
the verifier searches the whole state space for a transition that breaks the
conditions.  Conditions, for every pair of classes ``c != d``:

  (phi1)  f(s) = c and g(c) = d  =>  f(s') = d
                                     or (f(s') = c and h_c(s) > h_c(s') and h_c(s) >= 0)
  (phi2)  f(s) = c and f(s') = d =>  g(c) = d

where ``s' = T(s)``.  Both are built once with states and parameters
symbolic; the learner grounds the state, the verifier grounds the parameters.
"""

from __future__ import annotations

import itertools
import logging
import os
import time
from dataclasses import dataclass, field, replace
from typing import Optional, Union

from . import terms as T
from .smt import Sat, SolverConfig, SolverError, SolverStats, Unknown, Unsat, check_sat
from .symbolic import pred_term, state_symbols, successor_terms
from .system import StateVector, TransitionSystem, step
from .templates import (
    BdtTemplate,
    ParameterAssignment,
    build_label_preserving_template,
    class_term,
    enlarge,
    eta_names,
    gamma_name,
    leaf_conditions,
    rank_term,
)

log = logging.getLogger(__name__)

STATE, SUCC = "s", "t"


class Inconclusive(Exception):
    """A solver answered ``unknown``; nothing can be concluded."""


@dataclass(frozen=True)
class Sample:
    state: StateVector
    successor: StateVector


class Dataset:
    """Ordered, duplicate-free samples keyed by state."""

    def __init__(self, samples=()):
        self._samples: list[Sample] = []
        self._index: set[StateVector] = set()
        for smp in samples:
            self.add(smp)

    def add(self, smp: Sample) -> bool:
        if smp.state in self._index:
            return False
        self._index.add(smp.state)
        self._samples.append(smp)
        return True

    def __contains__(self, state) -> bool:
        return tuple(state) in self._index

    def __iter__(self):
        return iter(self._samples)

    def __len__(self):
        return len(self._samples)

    def states(self) -> list[StateVector]:
        return [smp.state for smp in self._samples]


@dataclass(frozen=True)
class CegisConfig:
    radius: int = 10
    stride: int = 5
    max_iterations: int = 200
    max_enlargements: int = 4
    param_bound: int = 2**16
    small_bound: int = 8  # coefficient bound tried first; 0 disables
    probe_rlimit: int = 4_000_000  # work limit for the small-bound attempt
    initial_depth: int = 0
    encoding: str = "compact"  # or "pairwise"
    learner_encoding: str = "indicator"  # or "encoding", reusing the verifier's
    widen_bound: bool = True
    # z3's older simplex core is several times faster on the learner's
    # large ite-heavy queries; only sent when the solver is z3
    learner_options: tuple[tuple[str, str], ...] = (("smt.arith.solver", "2"),)
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if self.radius < 0 or self.stride <= 0:
            raise ValueError("radius must be >= 0 and stride > 0")
        if self.max_iterations <= 0 or self.max_enlargements < 0 or self.param_bound <= 0:
            raise ValueError("iteration/enlargement budgets and parameter bound must be positive")
        if self.encoding not in ("compact", "pairwise"):
            raise ValueError(f"unknown encoding {self.encoding!r}")
        if self.learner_encoding not in ("indicator", "encoding"):
            raise ValueError(f"unknown learner encoding {self.learner_encoding!r}")


@dataclass
class RunStats:
    iterations: int = 0
    enlargements: int = 0
    learner: SolverStats = field(default_factory=SolverStats)
    verifier: SolverStats = field(default_factory=SolverStats)
    counterexamples: list = field(default_factory=list)
    reseeds: int = 0
    widened: bool = False
    events: list = field(default_factory=list)
    wall_seconds: float = 0.0

    @property
    def solver_seconds(self) -> float:
        return self.learner.seconds + self.verifier.seconds

    def to_json(self) -> dict:
        return {
            "iterations": self.iterations,
            "enlargements": self.enlargements,
            "learner_queries": self.learner.queries,
            "learner_seconds": round(self.learner.seconds, 4),
            "verifier_queries": self.verifier.queries,
            "verifier_seconds": round(self.verifier.seconds, 4),
            "solver_seconds": round(self.solver_seconds, 4),
            "wall_seconds": round(self.wall_seconds, 4),
            "counterexamples": [list(s) for s in self.counterexamples],
            "reseeds": self.reseeds,
            "widened": self.widened,
            "events": self.events,
        }


@dataclass
class LearnedBisimulation:
    template: BdtTemplate
    params: ParameterAssignment
    dataset: Dataset
    stats: RunStats


@dataclass
class Failed:
    """Outcome of a run that stopped without a verified bisimulation."""

    reason: str
    stats: RunStats
    template: Optional[BdtTemplate] = None


@dataclass(frozen=True)
class Valid:
    pass


@dataclass(frozen=True)
class Counterexample:
    state: StateVector


class Infeasible:
    """The learner proved that no parameters fit the samples."""

    def __repr__(self):
        return "Infeasible"


INFEASIBLE = Infeasible()


# -- samples -------------------------------------------------------------------------


def initial_samples(m: TransitionSystem, cfg: CegisConfig) -> Dataset:
    axis = range(-cfg.radius, cfg.radius + 1, cfg.stride)
    return Dataset(Sample(s, step(m, s)) for s in itertools.product(axis, repeat=m.dimension))


# -- encodings ------------------------------------------------------------------------


def _symbols(n):
    return state_symbols(n, STATE), state_symbols(n, SUCC)


def encode_phi1(t: BdtTemplate, state_syms, succ_syms) -> T.Term:
    n = t.dimension
    at_s = leaf_conditions(t, state_syms)
    at_sp = leaf_conditions(t, succ_syms)
    parts = []
    for c in t.classes:
        hs = rank_term(c, n, state_syms)
        hsp = rank_term(c, n, succ_syms)
        stutter = T.and_(at_sp[c], T.gt(hs, hsp), T.ge(hs, 0))
        g = T.IntVar(gamma_name(c))
        for d in t.classes:
            if d == c:
                continue
            parts.append(T.implies(T.and_(at_s[c], T.eq(g, d)), T.or_(at_sp[d], stutter)))
    return T.and_(*parts)


def encode_phi2(t: BdtTemplate, state_syms, succ_syms) -> T.Term:
    at_s = leaf_conditions(t, state_syms)
    at_sp = leaf_conditions(t, succ_syms)
    parts = []
    for c in t.classes:
        g = T.IntVar(gamma_name(c))
        for d in t.classes:
            if d == c:
                continue
            parts.append(T.implies(T.and_(at_s[c], at_sp[d]), T.eq(g, d)))
    return T.and_(*parts)


def _lookup(k: T.Term, table: dict) -> T.Term:
    items = sorted(table.items())
    acc = items[-1][1]
    for c, v in reversed(items[:-1]):
        acc = T.ite(T.eq(k, c), v, acc)
    return acc


def encode_compact(t: BdtTemplate, state_syms, succ_syms) -> T.Term:
    """Same conditions with the class of each state as an integer term.

    Size is linear in the number of classes instead of quadratic.  Agrees
    with ``phi1 and phi2`` whenever every ``g(c)`` is a class id.
    """
    n = t.dimension
    k = class_term(t, state_syms)
    kp = class_term(t, succ_syms)
    cls = t.classes
    g = _lookup(k, {c: T.IntVar(gamma_name(c)) for c in cls})
    hs = _lookup(k, {c: rank_term(c, n, state_syms) for c in cls})
    hsp = _lookup(k, {c: rank_term(c, n, succ_syms) for c in cls})
    phi1 = T.implies(
        T.ne(g, k),
        T.or_(T.eq(kp, g), T.and_(T.eq(kp, k), T.gt(hs, hsp), T.ge(hs, 0))),
    )
    phi2 = T.implies(T.ne(kp, k), T.eq(g, kp))
    return T.and_(phi1, phi2)


def encode_conditions(t: BdtTemplate, state_syms, succ_syms, encoding: str = "compact") -> T.Term:
    if encoding == "pairwise":
        return T.and_(encode_phi1(t, state_syms, succ_syms), encode_phi2(t, state_syms, succ_syms))
    return encode_compact(t, state_syms, succ_syms)


_ENC_CACHE: dict = {}


def _conditions(t: BdtTemplate, encoding: str) -> T.Term:
    key = (id(t), encoding)
    hit = _ENC_CACHE.get(key)
    if hit is not None and hit[0] is t:
        return hit[1]
    s, sp = _symbols(t.dimension)
    phi = encode_conditions(t, s, sp, encoding)
    if len(_ENC_CACHE) > 64:
        _ENC_CACHE.clear()
    _ENC_CACHE[key] = (t, phi)
    return phi


def ground_sample(phi: T.Term, smp: Sample) -> T.Term:
    b = {f"{STATE}_{i}": v for i, v in enumerate(smp.state)}
    b.update({f"{SUCC}_{i}": v for i, v in enumerate(smp.successor)})
    return T.substitute(phi, b)


def ground_indicator(t: BdtTemplate, smp: Sample, j: int) -> tuple[T.Term, str]:
    """Conditions at one sample with the successor's class as a fresh variable.

    Equivalent to the grounded compact encoding, but each leaf's path
    condition guards its own constraint instead of feeding ite lookups.
    Returns the constraint and the name of the auxiliary variable.
    """
    n = t.dimension
    s = [T.Int(v) for v in smp.state]
    sp = [T.Int(v) for v in smp.successor]
    at_s, at_sp = leaf_conditions(t, s), leaf_conditions(t, sp)
    name = f"ks{j}"
    kp = T.IntVar(name)
    parts = [T.implies(at_sp[d], T.eq(kp, d)) for d in t.classes]
    for c in t.classes:
        g = T.IntVar(gamma_name(c))
        hs, hsp = rank_term(c, n, s), rank_term(c, n, sp)
        stutter = T.and_(T.eq(kp, c), T.gt(hs, hsp), T.ge(hs, 0))
        body = T.and_(
            T.implies(T.ne(g, c), T.or_(T.eq(kp, g), stutter)),
            T.implies(T.ne(kp, c), T.eq(g, kp)),
        )
        parts.append(T.implies(at_s[c], body))
    return T.and_(*parts), name


def parameter_declarations(t: BdtTemplate) -> dict[str, str]:
    decl = {name: T.INT for name in t.theta_names()}
    for c in t.classes:
        decl[gamma_name(c)] = T.INT
        ws, b = eta_names(c, t.dimension)
        for w in ws:
            decl[w] = T.INT
        decl[b] = T.INT
    return decl


def conditions_hold(t: BdtTemplate, p: ParameterAssignment, s, sp, encoding="compact") -> bool:
    """Ground evaluation of the conditions at one transition."""
    v = p.valuation(t)
    v.update({f"{STATE}_{i}": x for i, x in enumerate(s)})
    v.update({f"{SUCC}_{i}": x for i, x in enumerate(sp)})
    return T.evaluate_term(_conditions(t, encoding), v)


# -- learner and verifier ------------------------------------------------------------------------


def learn(
    t: BdtTemplate,
    d: Dataset,
    cfg: CegisConfig,
    bound: Optional[int] = None,
    stats: Optional[SolverStats] = None,
) -> Union[ParameterAssignment, Infeasible]:
    """Find parameters satisfying the conditions on every sample.

    Small coefficients are tried first: they give simpler candidates that
    generalise better.  Offsets keep the full bound in that attempt, since
    thresholds and ranking constants scale with the system's constants.
    Only an answer at the full bound decides infeasibility.
    """
    if len(d) == 0:
        raise ValueError("learning needs at least one sample")
    bound = cfg.param_bound if bound is None else bound
    if cfg.learner_options and _is_z3(cfg.solver.executable):
        cfg = replace(cfg, solver=replace(cfg.solver, options=cfg.solver.options + cfg.learner_options))
    if 0 < cfg.small_bound < bound:
        probe = replace(cfg, solver=replace(cfg.solver, rlimit=cfg.probe_rlimit))
        res = _learn_at(t, d, probe, bound, stats, cfg.small_bound)
        if isinstance(res, Sat):
            return _decode(t, res)
    return _decode(t, _learn_at(t, d, cfg, bound, stats))


def _is_z3(executable: str) -> bool:
    return os.path.basename(executable).lower().startswith("z3")


def _decode(t, res):
    if isinstance(res, Unsat):
        return INFEASIBLE
    if isinstance(res, Unknown):
        raise Inconclusive(f"learner: {res.reason}")
    return ParameterAssignment.from_valuation(t, res.model)


def _offsets(t: BdtTemplate) -> set[str]:
    out = {a.offset for a in t.affine_nodes()}
    out.update(eta_names(c, t.dimension)[1] for c in t.classes)
    return out


def _learn_at(t, d, cfg, bound, stats, weight_bound=None):
    decl = parameter_declarations(t)
    if cfg.learner_encoding == "indicator":
        parts = []
        for j, smp in enumerate(d):
            term, aux = ground_indicator(t, smp, j)
            parts.append(term)
            decl[aux] = T.INT
    else:
        phi = _conditions(t, cfg.encoding)
        parts = [ground_sample(phi, smp) for smp in d]
    ncls = len(t.classes)
    for c in t.classes:
        g = T.IntVar(gamma_name(c))
        parts.append(T.ge(g, 0))
        parts.append(T.lt(g, ncls))
    offsets = _offsets(t)
    gammas = {gamma_name(c) for c in t.classes}
    for name in parameter_declarations(t):
        if name in gammas:
            continue
        b = bound if weight_bound is None or name in offsets else min(bound, weight_bound)
        v = T.IntVar(name)
        parts.append(T.le(v, b))
        parts.append(T.ge(v, -b))
    return check_sat(cfg.solver, decl, T.and_(*parts), stats)


def verify(
    m: TransitionSystem,
    t: BdtTemplate,
    p: ParameterAssignment,
    cfg: CegisConfig,
    stats: Optional[SolverStats] = None,
    solver: Optional[SolverConfig] = None,
) -> Union[Valid, Counterexample]:
    """Search all of Z^n for a transition violating the conditions."""
    p.check(t)
    n = m.dimension
    s, sp = _symbols(n)
    phi = T.substitute(_conditions(t, cfg.encoding), p.valuation(t))
    succ = successor_terms(m, s)
    query = T.and_(T.not_(phi), *(T.eq(a, b) for a, b in zip(sp, succ)))
    decl = {x.value: T.INT for x in (*s, *sp)}
    res = check_sat(solver or cfg.solver, decl, query, stats)
    if isinstance(res, Unsat):
        return Valid()
    if isinstance(res, Unknown):
        raise Inconclusive(f"verifier: {res.reason}")
    state = tuple(res.model[x.value] for x in s)
    if conditions_hold(t, p, state, step(m, state), cfg.encoding):
        raise SolverError(f"verifier counterexample {state} satisfies the conditions concretely")
    return Counterexample(state)


# -- the loop -------------------------------------------------------------------------------------


def bisimulation_learning(
    m: TransitionSystem,
    cfg: Optional[CegisConfig] = None,
    template: Optional[BdtTemplate] = None,
) -> Union[LearnedBisimulation, Failed]:
    """Alternate learner and verifier until the verifier finds no counterexample.

    On learner infeasibility the parameter bound is widened once, after that
    the template is enlarged; so is a template that used up its iteration
    budget.  Each enlarged template starts again from the unwidened bound.
    Stops with :class:`Failed` when the budgets run out or a solver answers
    ``unknown``.
    """
    cfg = cfg or CegisConfig()
    stats = RunStats()
    t0 = time.perf_counter()
    try:
        if template is None:
            template = build_label_preserving_template(
                m.propositions, cfg.initial_depth, m.dimension, m.variables, cfg.solver
            )
        data = initial_samples(m, cfg)
        bound = cfg.param_bound
        seed = cfg.solver.seed
        while True:
            outcome = _fit(m, template, data, cfg, stats, bound, seed)
            if isinstance(outcome, LearnedBisimulation) or isinstance(outcome, Failed):
                return outcome
            if outcome == "widen":
                bound = cfg.param_bound**2
                stats.widened = True
                stats.events.append({"event": "widen", "bound": bound})
                continue
            if stats.enlargements >= cfg.max_enlargements:
                reason = "iteration budget exhausted" if outcome == "stalled" else "budget exhausted"
                return Failed(reason, stats, template)
            template = enlarge(template)
            # a widened bound mostly buys huge offsets chasing huge
            # counterexamples, which slows every later query
            bound = cfg.param_bound
            stats.enlargements += 1
            stats.events.append({"event": "enlarge", "classes": len(template.classes)})
            log.info("enlarged template to %d classes", len(template.classes))
    except Inconclusive as exc:
        return Failed(f"inconclusive: {exc}", stats, template)
    finally:
        stats.wall_seconds = time.perf_counter() - t0


def _fit(m, template, data, cfg, stats, bound, seed):
    """Run CEGIS on one template; returns a result, "widen", "enlarge" or "stalled"."""
    iterations = 0
    while iterations < cfg.max_iterations:
        iterations += 1
        stats.iterations += 1
        cand = learn(template, data, cfg, bound, stats.learner)
        if cand is INFEASIBLE:
            stats.events.append({"event": "infeasible", "samples": len(data)})
            if cfg.widen_bound and bound == cfg.param_bound:
                return "widen"
            return "enlarge"
        res = verify(m, template, cand, cfg, stats.verifier)
        if isinstance(res, Valid):
            stats.events.append({"event": "valid", "samples": len(data)})
            return LearnedBisimulation(template, cand, data, stats)
        cex = res.state
        if cex in data:
            # the learner model satisfies every sample, so this only happens if
            # the solver misbehaves; one reseed, then give up
            stats.reseeds += 1
            stats.events.append({"event": "reseed", "state": list(cex)})
            seed = (seed or 0) + 1
            res = verify(m, template, cand, cfg, stats.verifier, cfg.solver.with_seed(seed))
            if isinstance(res, Valid):
                return LearnedBisimulation(template, cand, data, stats)
            if res.state in data:
                return Failed("inconclusive: counterexample repeated", stats, template)
            cex = res.state
        data.add(Sample(cex, step(m, cex)))
        stats.counterexamples.append(cex)
        stats.events.append({"event": "counterexample", "state": list(cex)})
    # a template that is infeasible for every bound can still fit each finite
    # sample set, so a long run of counterexamples is treated like infeasibility
    stats.events.append({"event": "stalled", "samples": len(data)})
    return "stalled"
