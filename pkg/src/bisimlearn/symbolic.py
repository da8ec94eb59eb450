"""Symbolic views of system expressions, predicates and the transition function."""

from __future__ import annotations

from typing import Sequence

from . import terms as T
from .system import (
    Add,
    And,
    BoolConst,
    Cmp,
    Const,
    Mod,
    Mul,
    Neg,
    Not,
    Or,
    Sub,
    TransitionSystem,
    Var,
)

_CMP = {">=": T.ge, ">": T.gt, "=": T.eq, "!=": T.ne, "<=": T.le, "<": T.lt}


def state_symbols(n: int, prefix: str = "s") -> tuple[T.Term, ...]:
    return tuple(T.IntVar(f"{prefix}_{i}") for i in range(n))


def expr_term(e, syms: Sequence[T.Term]) -> T.Term:
    if isinstance(e, Const):
        return T.Int(e.value)
    if isinstance(e, Var):
        return syms[e.index]
    if isinstance(e, Add):
        return T.add(expr_term(e.left, syms), expr_term(e.right, syms))
    if isinstance(e, Sub):
        return T.sub(expr_term(e.left, syms), expr_term(e.right, syms))
    if isinstance(e, Mul):
        return T.mul(expr_term(e.left, syms), expr_term(e.right, syms))
    if isinstance(e, Neg):
        return T.neg(expr_term(e.arg, syms))
    if isinstance(e, Mod):
        return T.mod(expr_term(e.arg, syms), e.divisor)
    raise TypeError(e)


def pred_term(p, syms: Sequence[T.Term]) -> T.Term:
    if isinstance(p, Cmp):
        return _CMP[p.op](expr_term(p.left, syms), expr_term(p.right, syms))
    if isinstance(p, BoolConst):
        return T.Bool(p.value)
    if isinstance(p, And):
        return T.and_(*(pred_term(a, syms) for a in p.args))
    if isinstance(p, Or):
        return T.or_(*(pred_term(a, syms) for a in p.args))
    if isinstance(p, Not):
        return T.not_(pred_term(p.arg, syms))
    raise TypeError(p)


def successor_terms(m: TransitionSystem, syms: Sequence[T.Term]) -> tuple[T.Term, ...]:
    """Per-dimension successor as an ite chain over the guards, first match wins."""
    guards = [pred_term(c.guard, syms) for c in m.commands]
    out = []
    for i in range(m.dimension):
        acc = expr_term(m.commands[-1].update[i], syms)
        for cmd, g in zip(reversed(m.commands[:-1]), reversed(guards[:-1])):
            acc = T.ite(g, expr_term(cmd.update[i], syms), acc)
        out.append(acc)
    return tuple(out)
