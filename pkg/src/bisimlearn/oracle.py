"""Explicit-state ground truth for tests and cross-checks.

Nothing here touches the SMT solver: finite restrictions are enumerated, the
stutter conditions are evaluated term by term, and LTL is evaluated straight
from its trace semantics.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Hashable, Iterable, Mapping, Optional, Sequence, Union

from . import terms as T
from .cegis import encode_phi1, encode_phi2
from .ltl import Formula, LAnd, LNot, LTrue, Prop, Until
from .symbolic import state_symbols
from .system import StateVector, TransitionSystem, labels_of, step
from .templates import BdtTemplate, ParameterAssignment


@dataclass(frozen=True)
class FiniteRestriction:
    """States of a box plus their step closure, with escaped runs removed.

    A state is escaped when its run leaves the explored region; such states
    are not part of ``states`` so the successor map is closed.
    """

    states: tuple
    successor: Mapping
    labels: Mapping
    escaped: frozenset = frozenset()

    def __post_init__(self):
        members = set(self.states)
        for s in self.states:
            if self.successor[s] not in members:
                raise ValueError(f"successor of {s} outside the restriction")


@dataclass(frozen=True)
class Ok:
    pass


@dataclass(frozen=True)
class Violation:
    kind: str  # "labels", "transfer" or "condition"
    state: tuple
    other: Optional[tuple] = None
    successor: Optional[tuple] = None


OK = Ok()
Result = Union[Ok, Violation]


def box_states(n: int, radius: int):
    return itertools.product(range(-radius, radius + 1), repeat=n)


def finite_restriction(
    m: TransitionSystem,
    radius: int,
    walk_budget: int = 1000,
    outer: Optional[int] = None,
) -> FiniteRestriction:
    """Box ``[-radius, radius]^n`` closed under ``step``.

    Runs are followed while they stay inside the outer box (default four
    times the radius) and for at most ``walk_budget`` fresh states; a state
    whose run is cut off is escaped, as is everything leading into it.
    """
    outer = 4 * max(radius, 1) if outer is None else outer
    succ: dict = {}
    for s0 in box_states(m.dimension, radius):
        s = s0
        k = 0
        while s not in succ and k < walk_budget:
            t = step(m, s)
            succ[s] = t
            if any(abs(x) > outer for x in t):
                break
            s = t
            k += 1
    return from_successor_map(succ, lambda s: labels_of(m, s))


def from_successor_map(succ: Mapping, label_fn: Callable) -> FiniteRestriction:
    """Restriction from a partial successor map; unresolved runs are dropped."""
    preds: dict = {}
    for s, t in succ.items():
        preds.setdefault(t, []).append(s)
    bad = [s for s, t in succ.items() if t not in succ]
    escaped = set(bad)
    while bad:
        x = bad.pop()
        for p in preds.get(x, ()):
            if p not in escaped:
                escaped.add(p)
                bad.append(p)
    states = tuple(s for s in succ if s not in escaped)
    return FiniteRestriction(
        states,
        {s: succ[s] for s in states},
        {s: frozenset(label_fn(s)) for s in states},
        frozenset(escaped),
    )


def explicit_system(successor: Mapping, labels: Mapping) -> FiniteRestriction:
    return FiniteRestriction(tuple(successor), dict(successor), {s: frozenset(v) for s, v in labels.items()})


# -- stutter structure ------------------------------------------------------------------


def exit_map(fr: FiniteRestriction, block: Mapping) -> dict:
    """For each state the block its run moves to on leaving its own block.

    ``None`` means the run stays in the block forever (divergence).
    """
    res: dict = {}
    succ = fr.successor
    for s0 in fr.states:
        path = []
        on_path = set()
        s = s0
        while True:
            if s in res:
                val = res[s]
                break
            if s in on_path:
                val = None
                break
            n = succ[s]
            if block[n] != block[s]:
                val = block[n]
                res[s] = val
                break
            on_path.add(s)
            path.append(s)
            s = n
        for p in path:
            res[p] = val
    return res


def validate_partition(fr: FiniteRestriction, class_of: Callable[[tuple], Hashable]) -> Result:
    """Check label preservation and the stutter transfer condition.

    Whenever some state of a class steps directly into class ``d``, every
    state of that class must reach ``d`` through a run that stays inside the
    class until then.
    """
    block = {s: class_of(s) for s in fr.states}
    rep: dict = {}
    for s in fr.states:
        r = rep.setdefault(block[s], s)
        if fr.labels[r] != fr.labels[s]:
            return Violation("labels", r, s)
    ex = exit_map(fr, block)
    direct: dict = {}
    for s in fr.states:
        t = fr.successor[s]
        if block[t] != block[s]:
            direct.setdefault(block[s], s)
    for t in fr.states:
        s = direct.get(block[t])
        if s is None:
            continue
        if ex[t] != block[fr.successor[s]]:
            return Violation("transfer", s, t, fr.successor[s])
    return OK


def divergent_states(fr: FiniteRestriction, class_of) -> set:
    block = {s: class_of(s) for s in fr.states}
    ex = exit_map(fr, block)
    return {s for s in fr.states if ex[s] is None}


def divergence_sensitive(fr: FiniteRestriction, class_of) -> bool:
    """Every class is either wholly divergent or has no divergent state."""
    div = divergent_states(fr, class_of)
    kinds: dict = {}
    for s in fr.states:
        kinds.setdefault(class_of(s), set()).add(s in div)
    return all(len(k) == 1 for k in kinds.values())


def coarsest_stutter_partition(fr: FiniteRestriction) -> dict:
    """State -> block index of the coarsest stutter bisimulation.

    Starts from equal labels and splits by (block, exit block) signatures
    until nothing changes.
    """
    keys = {s: tuple(sorted(fr.labels[s])) for s in fr.states}
    index = {k: i for i, k in enumerate(sorted(set(keys.values())))}
    block = {s: index[keys[s]] for s in fr.states}
    count = len(index)
    while True:
        ex = exit_map(fr, block)
        sig = {s: (block[s], ex[s]) for s in fr.states}
        index = {}
        for s in fr.states:
            index.setdefault(sig[s], len(index))
        new = {s: index[sig[s]] for s in fr.states}
        if len(index) == count:
            return new
        block, count = new, len(index)


def class_count(partition: Mapping) -> int:
    return len(set(partition.values()))


# -- conditions by enumeration ---------------------------------------------------------------


def ground_conditions(t: BdtTemplate, p: ParameterAssignment):
    """Compiled ``phi1 and phi2`` as a function of (state, successor)."""
    n = t.dimension
    s, sp = state_symbols(n, "s"), state_symbols(n, "t")
    phi = T.and_(encode_phi1(t, s, sp), encode_phi2(t, s, sp))
    ground = T.substitute(phi, p.valuation(t))
    f = T.compile_term(ground, [x.value for x in (*s, *sp)])
    return lambda a, b: f(*a, *b)


def exhaustive_condition_check(
    m: TransitionSystem,
    t: BdtTemplate,
    p: ParameterAssignment,
    box: Union[int, Iterable[Sequence[int]]],
    evaluator: str = "compiled",
) -> Result:
    """Evaluate the stutter conditions at every state of ``box``.

    ``box`` is a radius or an explicit iterable of states.  The ``term``
    evaluator walks the term tree, ``compiled`` runs generated code.
    """
    states = box_states(m.dimension, box) if isinstance(box, int) else box
    if evaluator == "term":
        n = t.dimension
        s, sp = state_symbols(n, "s"), state_symbols(n, "t")
        phi = T.and_(encode_phi1(t, s, sp), encode_phi2(t, s, sp))
        v = p.valuation(t)

        def holds(a, b):
            w = dict(v)
            w.update({f"s_{i}": x for i, x in enumerate(a)})
            w.update({f"t_{i}": x for i, x in enumerate(b)})
            return T.evaluate_term(phi, w)

    else:
        holds = ground_conditions(t, p)
    for st in states:
        st = tuple(st)
        nxt = step(m, st)
        if not holds(st, nxt):
            return Violation("condition", st, successor=nxt)
    return OK


# -- LTL by trace semantics -------------------------------------------------------------------


def ltl_holds_on_word(f: Formula, prefix: Sequence[frozenset], loop: Sequence[frozenset]) -> bool:
    """Direct recursive semantics on ``prefix . loop^omega``.

    Positions past the prefix are identified modulo the loop length, so an
    until only needs to look ahead ``len(prefix) + len(loop)`` positions.
    """
    if not loop:
        raise ValueError("loop must be nonempty")
    k, l = len(prefix), len(loop)
    horizon = k + l

    def letter(i):
        return prefix[i] if i < k else loop[(i - k) % l]

    def canon(i):
        return i if i < k else k + (i - k) % l

    memo: dict = {}

    def sat(g, i) -> bool:
        i = canon(i)
        key = (g, i)
        if key in memo:
            return memo[key]
        if isinstance(g, LTrue):
            r = True
        elif isinstance(g, Prop):
            r = g.name in letter(i)
        elif isinstance(g, LNot):
            r = not sat(g.arg, i)
        elif isinstance(g, LAnd):
            r = sat(g.left, i) and sat(g.right, i)
        elif isinstance(g, Until):
            r = False
            for j in range(i, i + horizon + 1):
                if sat(g.right, j):
                    r = True
                    break
                if not sat(g.left, j):
                    break
        else:
            raise TypeError(g)
        memo[key] = r
        return r

    return sat(f, 0)


def concrete_lasso(fr: FiniteRestriction, s) -> tuple[list, list]:
    """The run from ``s`` as (prefix states, loop states)."""
    seen: dict = {}
    path = []
    while s not in seen:
        seen[s] = len(path)
        path.append(s)
        s = fr.successor[s]
    k = seen[s]
    return path[:k], path[k:]


def ltl_holds_concrete(fr: FiniteRestriction, f: Formula, initial: Iterable) -> bool:
    for s in initial:
        pre, loop = concrete_lasso(fr, s)
        if not ltl_holds_on_word(f, [fr.labels[x] for x in pre], [fr.labels[x] for x in loop]):
            return False
    return True
