"""Finite abstract systems built from learned classifiers, and LTL checking on them."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional, Sequence, Union

from . import terms as T
from .cegis import LearnedBisimulation
from .ltl import Formula, evaluate_lasso, propositions
from .smt import Sat, SolverConfig, SolverError, Unknown, Unsat, check_sat
from .symbolic import pred_term, state_symbols
from .system import TransitionSystem, labels_of
from .templates import compile_classifier, leaf_conditions


class QuotientError(RuntimeError):
    pass


@dataclass(frozen=True)
class AbstractSystem:
    """Deterministic finite system over class ids.

    ``blocks`` maps each abstract class to the template classes merged into
    it; an unmerged quotient has singleton blocks.
    """

    classes: tuple[int, ...]
    successor: Mapping[int, int]
    labels: Mapping[int, frozenset]
    initial: frozenset
    blocks: Mapping[int, frozenset] = field(default_factory=dict)
    names: Mapping[int, str] = field(default_factory=dict)
    propositions: tuple[str, ...] = ()

    def __post_init__(self):
        cs = set(self.classes)
        if len(cs) != len(self.classes):
            raise QuotientError("duplicate class ids")
        for c in self.classes:
            if self.successor.get(c) not in cs:
                raise QuotientError(f"class {c} has no successor inside the system")
            if c not in self.labels:
                raise QuotientError(f"class {c} has no labels")
        if not self.initial <= cs:
            raise QuotientError("initial classes outside the system")
        if not self.blocks:
            object.__setattr__(self, "blocks", {c: frozenset([c]) for c in self.classes})
        if not self.names:
            object.__setattr__(self, "names", {c: f"c{c}" for c in self.classes})

    def block_of(self, template_class: int) -> int:
        for c, b in self.blocks.items():
            if template_class in b:
                return c
        raise KeyError(template_class)

    def is_deterministic(self) -> bool:
        return all(self.successor.get(c) in self.classes for c in self.classes)

    def divergent(self) -> frozenset:
        return frozenset(c for c in self.classes if self.successor[c] == c)

    def reachable(self, start: Optional[Iterable[int]] = None) -> frozenset:
        todo = list(self.initial if start is None else start)
        seen = set(todo)
        while todo:
            d = self.successor[todo.pop()]
            if d not in seen:
                seen.add(d)
                todo.append(d)
        return frozenset(seen)

    def lasso(self, c: int) -> "LassoTrace":
        path: list[int] = []
        index: dict[int, int] = {}
        while c not in index:
            index[c] = len(path)
            path.append(c)
            c = self.successor[c]
        k = index[c]
        return LassoTrace(tuple(path[:k]), tuple(path[k:]))

    def with_initial(self, initial: Iterable[int]) -> "AbstractSystem":
        return replace(self, initial=frozenset(initial))


@dataclass(frozen=True)
class LassoTrace:
    prefix: tuple[int, ...]
    loop: tuple[int, ...]

    def __post_init__(self):
        if not self.loop:
            raise ValueError("a lasso needs a nonempty loop")

    def is_run_of(self, a: AbstractSystem) -> bool:
        seq = self.prefix + self.loop
        ok = all(a.successor[x] == y for x, y in zip(seq, seq[1:]))
        return ok and a.successor[self.loop[-1]] == self.loop[0]

    def render(self, a: AbstractSystem) -> str:
        def fmt(c):
            return f"{a.names[c]}{{{','.join(sorted(a.labels[c]))}}}"

        head = " -> ".join(fmt(c) for c in self.prefix)
        loop = " -> ".join(fmt(c) for c in self.loop)
        return (head + " -> " if head else "") + f"( {loop} )^omega"


@dataclass(frozen=True)
class Holds:
    pass


@dataclass(frozen=True)
class Fails:
    trace: LassoTrace


Verdict = Union[Holds, Fails]


# -- construction ------------------------------------------------------------------------


def _decide(cfg, query) -> Optional[dict]:
    res = check_sat(cfg, None, query)
    if isinstance(res, Unknown):
        raise QuotientError(f"cannot decide class emptiness: {res.reason}")
    return res.model if isinstance(res, Sat) else None


def instantiated_conditions(learned: LearnedBisimulation, syms) -> dict[int, T.Term]:
    """Class membership conditions with the learned parameters plugged in."""
    t, p = learned.template, learned.params
    v = p.valuation(t)
    return {c: T.substitute(pc, v) for c, pc in leaf_conditions(t, syms).items()}


def build_quotient(
    m: TransitionSystem,
    learned: LearnedBisimulation,
    solver: Optional[SolverConfig] = None,
    minimise: bool = True,
) -> AbstractSystem:
    """Nonempty classes, their labels, initiality and successors.

    Emptiness and initiality are SMT queries on the instantiated path
    conditions.  With ``minimise``, classes that are stutter equivalent in
    the finite abstract system are merged afterwards.
    """
    cfg = solver or SolverConfig()
    t, p = learned.template, learned.params
    syms = state_symbols(m.dimension)
    conds = instantiated_conditions(learned, syms)
    init = pred_term(m.initial, syms)
    classes, labels, initial = [], {}, set()
    for c in sorted(conds):
        witness = _decide(cfg, conds[c])
        if witness is None:
            continue
        s = tuple(witness.get(x.value, 0) for x in syms)
        lab = labels_of(m, s)
        if lab != t.cell_of(c):
            raise QuotientError(f"class {c} witness {s} has labels {set(lab)}, cell says {set(t.cell_of(c))}")
        classes.append(c)
        labels[c] = lab
        if _decide(cfg, T.and_(init, conds[c])) is not None:
            initial.add(c)
    succ = {}
    for c in classes:
        d = p.gamma[c]
        if d not in labels:
            raise QuotientError(f"nonempty class {c} has empty abstract successor {d}")
        succ[c] = d
    a = AbstractSystem(tuple(classes), succ, labels, frozenset(initial), propositions=m.proposition_names)
    return minimise_quotient(a) if minimise else a


def _exit(a: AbstractSystem, block: Mapping[int, int], c: int):
    """Block reached when leaving ``c``'s block, or None if the run never leaves."""
    b = block[c]
    seen = set()
    while block[c] == b:
        if c in seen:
            return None
        seen.add(c)
        c = a.successor[c]
    return block[c]


def minimise_quotient(a: AbstractSystem) -> AbstractSystem:
    """Coarsest stutter-bisimulation quotient of a finite deterministic system."""
    keys = {c: tuple(sorted(a.labels[c])) for c in a.classes}
    ids = {k: i for i, k in enumerate(sorted(set(keys.values())))}
    block = {c: ids[keys[c]] for c in a.classes}
    while True:
        sig = {c: (block[c], _exit(a, block, c)) for c in a.classes}
        ids = {k: i for i, k in enumerate(sorted(set(sig.values()), key=repr))}
        new = {c: ids[sig[c]] for c in a.classes}
        if len(set(new.values())) == len(set(block.values())):
            break
        block = new
    members: dict[int, list[int]] = {}
    for c in a.classes:
        members.setdefault(block[c], []).append(c)
    rep = {b: min(cs) for b, cs in members.items()}
    classes = tuple(sorted(rep.values()))
    succ, labels, blocks, initial = {}, {}, {}, set()
    for b, cs in members.items():
        r = rep[b]
        ex = _exit(a, block, r)
        succ[r] = r if ex is None else rep[ex]
        labels[r] = a.labels[r]
        blocks[r] = frozenset().union(*(a.blocks[c] for c in cs))
        if any(c in a.initial for c in cs):
            initial.add(r)
    return AbstractSystem(classes, succ, labels, frozenset(initial), blocks, propositions=a.propositions)


def classify_abstract(a: AbstractSystem, learned: LearnedBisimulation):
    """Concrete state -> abstract class, via the compiled classifier."""
    f = compile_classifier(learned.template, learned.params)
    index = {tc: c for c, b in a.blocks.items() for tc in b}
    return lambda s: index[f(s)]


def class_contains(
    a: AbstractSystem,
    learned: LearnedBisimulation,
    c: int,
    state: Sequence[int],
    solver: Optional[SolverConfig] = None,
) -> bool:
    """SMT membership query: is ``state`` in abstract class ``c``?"""
    syms = state_symbols(len(state))
    conds = instantiated_conditions(learned, syms)
    q = T.and_(T.or_(*(conds[k] for k in a.blocks[c])), *(T.eq(x, v) for x, v in zip(syms, state)))
    return _decide(solver or SolverConfig(), q) is not None


def class_equals_region(
    m: TransitionSystem,
    a: AbstractSystem,
    learned: LearnedBisimulation,
    c: int,
    region,
    solver: Optional[SolverConfig] = None,
) -> bool:
    """SMT check that abstract class ``c`` is exactly the predicate ``region``."""
    syms = state_symbols(m.dimension)
    conds = instantiated_conditions(learned, syms)
    inside = T.or_(*(conds[k] for k in a.blocks[c]))
    r = pred_term(region, syms)
    diff = T.or_(T.and_(inside, T.not_(r)), T.and_(T.not_(inside), r))
    return _decide(solver or SolverConfig(), diff) is None


# -- checking --------------------------------------------------------------------------


def check_ltl(a: AbstractSystem, f: Formula) -> Verdict:
    """``f`` holds iff it holds on the unique run from every initial class."""
    missing = propositions(f) - set().union(a.propositions, *a.labels.values())
    if missing:
        raise ValueError(f"unknown propositions: {sorted(missing)}")
    for c in sorted(a.initial):
        tr = a.lasso(c)
        pre = [a.labels[x] for x in tr.prefix]
        loop = [a.labels[x] for x in tr.loop]
        if not evaluate_lasso(f, pre, loop):
            return Fails(tr)
    return Holds()


# -- export -----------------------------------------------------------------------------


def export_dot(a: AbstractSystem) -> str:
    lines = ["digraph quotient {", "  rankdir=LR;", '  node [shape=circle, fontname="monospace"];']
    for c in a.classes:
        lab = ",".join(sorted(a.labels[c]))
        shape = ", peripheries=2" if c in a.initial else ""
        lines.append(f'  c{c} [label="{a.names[c]}\\n{{{lab}}}"{shape}];')
    for c in a.classes:
        lines.append(f"  c{c} -> c{a.successor[c]};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_explicit(a: AbstractSystem) -> str:
    """One line per class: ``id successor initial labels``.

    ``initial`` is 1 or 0; labels are comma separated or ``-`` when empty.
    """
    lines = ["# class successor initial labels"]
    for c in a.classes:
        lab = ",".join(sorted(a.labels[c])) or "-"
        lines.append(f"{c} {a.successor[c]} {int(c in a.initial)} {lab}")
    return "\n".join(lines) + "\n"


def parse_explicit(text: str) -> AbstractSystem:
    classes, succ, labels, initial = [], {}, {}, set()
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ValueError(f"bad quotient line: {raw!r}")
        c, d, ini = int(parts[0]), int(parts[1]), parts[2]
        classes.append(c)
        succ[c] = d
        labels[c] = frozenset() if parts[3] == "-" else frozenset(parts[3].split(","))
        if ini == "1":
            initial.add(c)
    return AbstractSystem(tuple(classes), succ, labels, frozenset(initial))
