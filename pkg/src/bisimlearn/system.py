"""Deterministic labelled transition systems over integer state vectors.

A system is a list of guarded commands evaluated first-match, with a
mandatory trailing catch-all, so every state has exactly one successor.
Atomic propositions are boolean predicates over the state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

StateVector = tuple[int, ...]


# -- integer expressions ------------------------------------------------------


@dataclass(frozen=True)
class Const:
    value: int


@dataclass(frozen=True)
class Var:
    index: int


@dataclass(frozen=True)
class Add:
    left: "IntExpr"
    right: "IntExpr"


@dataclass(frozen=True)
class Sub:
    left: "IntExpr"
    right: "IntExpr"


@dataclass(frozen=True)
class Mul:
    left: "IntExpr"
    right: "IntExpr"


@dataclass(frozen=True)
class Neg:
    arg: "IntExpr"


@dataclass(frozen=True)
class Mod:
    """Remainder modulo a positive constant, always in ``[0, divisor)``."""

    arg: "IntExpr"
    divisor: int

    def __post_init__(self):
        if self.divisor <= 0:
            raise ValueError("mod divisor must be a positive constant")


IntExpr = Union[Const, Var, Add, Sub, Mul, Neg, Mod]


# -- predicates ---------------------------------------------------------------

CMP_OPS = (">=", ">", "=", "!=", "<=", "<")


@dataclass(frozen=True)
class Cmp:
    """Atom ``left op right``, i.e. ``left - right op 0``."""

    op: str
    left: IntExpr
    right: IntExpr

    def __post_init__(self):
        if self.op not in CMP_OPS:
            raise ValueError(f"unknown comparison {self.op!r}")


@dataclass(frozen=True)
class BoolConst:
    value: bool


@dataclass(frozen=True)
class And:
    args: tuple["Predicate", ...]


@dataclass(frozen=True)
class Or:
    args: tuple["Predicate", ...]


@dataclass(frozen=True)
class Not:
    arg: "Predicate"


Predicate = Union[Cmp, BoolConst, And, Or, Not]

TRUE = BoolConst(True)
FALSE = BoolConst(False)


def evaluate_expr(e: IntExpr, s: Sequence[int]) -> int:
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return s[e.index]
    if isinstance(e, Add):
        return evaluate_expr(e.left, s) + evaluate_expr(e.right, s)
    if isinstance(e, Sub):
        return evaluate_expr(e.left, s) - evaluate_expr(e.right, s)
    if isinstance(e, Mul):
        return evaluate_expr(e.left, s) * evaluate_expr(e.right, s)
    if isinstance(e, Neg):
        return -evaluate_expr(e.arg, s)
    if isinstance(e, Mod):
        return evaluate_expr(e.arg, s) % e.divisor
    raise TypeError(f"not an integer expression: {e!r}")


_CMP = {
    ">=": lambda a, b: a >= b,
    ">": lambda a, b: a > b,
    "=": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<=": lambda a, b: a <= b,
    "<": lambda a, b: a < b,
}


def evaluate_pred(p: Predicate, s: Sequence[int]) -> bool:
    if isinstance(p, Cmp):
        return _CMP[p.op](evaluate_expr(p.left, s), evaluate_expr(p.right, s))
    if isinstance(p, BoolConst):
        return p.value
    if isinstance(p, And):
        return all(evaluate_pred(a, s) for a in p.args)
    if isinstance(p, Or):
        return any(evaluate_pred(a, s) for a in p.args)
    if isinstance(p, Not):
        return not evaluate_pred(p.arg, s)
    raise TypeError(f"not a predicate: {p!r}")


def expr_vars(e: IntExpr) -> set[int]:
    if isinstance(e, Var):
        return {e.index}
    if isinstance(e, Const):
        return set()
    if isinstance(e, (Neg, Mod)):
        return expr_vars(e.arg)
    return expr_vars(e.left) | expr_vars(e.right)


def pred_vars(p: Predicate) -> set[int]:
    if isinstance(p, Cmp):
        return expr_vars(p.left) | expr_vars(p.right)
    if isinstance(p, BoolConst):
        return set()
    if isinstance(p, Not):
        return pred_vars(p.arg)
    out: set[int] = set()
    for a in p.args:
        out |= pred_vars(a)
    return out


def is_nonlinear(e) -> bool:
    """True if ``e`` multiplies two non-constant subexpressions."""
    if isinstance(e, (Const, Var, BoolConst)):
        return False
    if isinstance(e, Mul):
        if expr_vars(e.left) and expr_vars(e.right):
            return True
        return is_nonlinear(e.left) or is_nonlinear(e.right)
    if isinstance(e, (Neg, Mod, Not)):
        return is_nonlinear(e.arg)
    if isinstance(e, (And, Or)):
        return any(is_nonlinear(a) for a in e.args)
    return is_nonlinear(e.left) or is_nonlinear(e.right)


# -- compilation to Python closures (used on hot paths) -------------------------


def _py_expr(e: IntExpr) -> str:
    if isinstance(e, Const):
        return f"({e.value})"
    if isinstance(e, Var):
        return f"s[{e.index}]"
    if isinstance(e, Add):
        return f"({_py_expr(e.left)} + {_py_expr(e.right)})"
    if isinstance(e, Sub):
        return f"({_py_expr(e.left)} - {_py_expr(e.right)})"
    if isinstance(e, Mul):
        return f"({_py_expr(e.left)} * {_py_expr(e.right)})"
    if isinstance(e, Neg):
        return f"(-{_py_expr(e.arg)})"
    if isinstance(e, Mod):
        return f"({_py_expr(e.arg)} % {e.divisor})"
    raise TypeError(e)


_PY_CMP = {">=": ">=", ">": ">", "=": "==", "!=": "!=", "<=": "<=", "<": "<"}


def _py_pred(p: Predicate) -> str:
    if isinstance(p, Cmp):
        return f"({_py_expr(p.left)} {_PY_CMP[p.op]} {_py_expr(p.right)})"
    if isinstance(p, BoolConst):
        return "True" if p.value else "False"
    if isinstance(p, And):
        return "(" + " and ".join(_py_pred(a) for a in p.args) + ")" if p.args else "True"
    if isinstance(p, Or):
        return "(" + " or ".join(_py_pred(a) for a in p.args) + ")" if p.args else "False"
    if isinstance(p, Not):
        return f"(not {_py_pred(p.arg)})"
    raise TypeError(p)


def compile_pred(p: Predicate) -> Callable[[Sequence[int]], bool]:
    return eval(f"lambda s: {_py_pred(p)}")


def compile_expr(e: IntExpr) -> Callable[[Sequence[int]], int]:
    return eval(f"lambda s: {_py_expr(e)}")


# -- transition systems -------------------------------------------------------


@dataclass(frozen=True)
class GuardedCommand:
    guard: Predicate
    update: tuple[IntExpr, ...]


@dataclass(frozen=True)
class TransitionSystem:
    variables: tuple[str, ...]
    initial: Predicate
    commands: tuple[GuardedCommand, ...]
    propositions: tuple[tuple[str, Predicate], ...]
    name: str = "system"
    _step: Callable = field(init=False, repr=False, compare=False)
    _labels: Callable = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = len(self.variables)
        if n == 0:
            raise ValueError("a system needs at least one variable")
        if len(set(self.variables)) != n:
            raise ValueError("duplicate variable names")
        names = [a for a, _ in self.propositions]
        if len(set(names)) != len(names):
            raise ValueError("duplicate proposition names")
        if not self.commands or self.commands[-1].guard != TRUE:
            raise ValueError("the last command must be the catch-all (guard 'else')")
        for cmd in self.commands:
            if len(cmd.update) != n:
                raise ValueError(f"update has {len(cmd.update)} entries, expected {n}")
        for p in [self.initial, *(c.guard for c in self.commands), *(q for _, q in self.propositions)]:
            bad = [i for i in pred_vars(p) if i >= n]
            if bad:
                raise ValueError(f"variable index {bad[0]} out of range")
        object.__setattr__(self, "_step", self._compile_step())
        object.__setattr__(self, "_labels", self._compile_labels())

    @property
    def dimension(self) -> int:
        return len(self.variables)

    @property
    def proposition_names(self) -> tuple[str, ...]:
        return tuple(a for a, _ in self.propositions)

    def is_nonlinear(self) -> bool:
        parts = [self.initial, *(q for _, q in self.propositions)]
        for c in self.commands:
            parts.append(c.guard)
            parts.extend(c.update)
        return any(is_nonlinear(p) for p in parts)

    def _compile_step(self):
        lines = ["def _step(s):"]
        for cmd in self.commands:
            vec = ", ".join(_py_expr(u) for u in cmd.update)
            lines.append(f"    if {_py_pred(cmd.guard)}:")
            lines.append(f"        return ({vec},)")
        scope: dict = {}
        exec("\n".join(lines), scope)
        return scope["_step"]

    def _compile_labels(self):
        body = ", ".join(f"({_py_pred(p)}, {a!r})" for a, p in self.propositions)
        fn = eval(f"lambda s: ({body},)" if self.propositions else "lambda s: ()")
        return lambda s: frozenset(a for ok, a in fn(s) if ok)


def step(m: TransitionSystem, s: Sequence[int]) -> StateVector:
    """Successor of ``s``: update of the first command whose guard holds."""
    if len(s) != m.dimension:
        raise ValueError(f"state has {len(s)} entries, system has {m.dimension}")
    return m._step(s)


def step_reference(m: TransitionSystem, s: Sequence[int]) -> StateVector:
    """Tree-walking version of :func:`step`; slow, used to cross-check it."""
    for cmd in m.commands:
        if evaluate_pred(cmd.guard, s):
            return tuple(evaluate_expr(u, s) for u in cmd.update)
    raise AssertionError("catch-all command did not fire")


def labels_of(m: TransitionSystem, s: Sequence[int]) -> frozenset[str]:
    return m._labels(s)


def is_initial(m: TransitionSystem, s: Sequence[int]) -> bool:
    return evaluate_pred(m.initial, s)


def simulate(m: TransitionSystem, s: Sequence[int], max_steps: int) -> list[StateVector]:
    if max_steps < 0:
        raise ValueError("max_steps must be non-negative")
    s = tuple(s)
    out = [s]
    for _ in range(max_steps):
        s = m._step(s)
        out.append(s)
    return out
