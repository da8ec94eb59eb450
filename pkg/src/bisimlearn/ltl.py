"""LTL without next: syntax, parsing and evaluation on ultimately periodic words."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence, Union


@dataclass(frozen=True)
class LTrue:
    pass


@dataclass(frozen=True)
class Prop:
    name: str


@dataclass(frozen=True)
class LNot:
    arg: "Formula"


@dataclass(frozen=True)
class LAnd:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Until:
    left: "Formula"
    right: "Formula"


Formula = Union[LTrue, Prop, LNot, LAnd, Until]

TRUE = LTrue()


def lor(a: Formula, b: Formula) -> Formula:
    return LNot(LAnd(LNot(a), LNot(b)))


def eventually(a: Formula) -> Formula:
    return Until(TRUE, a)


def globally(a: Formula) -> Formula:
    return LNot(eventually(LNot(a)))


def limplies(a: Formula, b: Formula) -> Formula:
    return lor(LNot(a), b)


def propositions(f: Formula) -> set[str]:
    if isinstance(f, Prop):
        return {f.name}
    if isinstance(f, LTrue):
        return set()
    if isinstance(f, LNot):
        return propositions(f.arg)
    return propositions(f.left) | propositions(f.right)


def subformulas(f: Formula) -> list[Formula]:
    """Children before parents, each subformula once."""
    out: list[Formula] = []
    seen = set()

    def go(g):
        if g in seen:
            return
        if isinstance(g, LNot):
            go(g.arg)
        elif isinstance(g, (LAnd, Until)):
            go(g.left)
            go(g.right)
        seen.add(g)
        out.append(g)

    go(f)
    return out


def to_text(f: Formula) -> str:
    if isinstance(f, LTrue):
        return "true"
    if isinstance(f, Prop):
        return f.name
    if isinstance(f, LNot):
        a = f.arg
        if isinstance(a, LTrue):
            return "false"
        if isinstance(a, Until) and a.left == TRUE and isinstance(a.right, LNot):
            return f"G {_wrap(a.right.arg)}"
        return f"!{_wrap(a)}"
    if isinstance(f, LAnd):
        return f"({to_text(f.left)} & {to_text(f.right)})"
    if f.left == TRUE:
        return f"F {_wrap(f.right)}"
    return f"({to_text(f.left)} U {to_text(f.right)})"


def _wrap(f):
    s = to_text(f)
    return s if isinstance(f, (LTrue, Prop)) or s.startswith("(") else f"({s})"


# -- parsing ------------------------------------------------------------------------


class FormulaSyntaxError(ValueError):
    pass


class NextOperatorError(FormulaSyntaxError):
    """``X`` is not stutter insensitive, so quotient verdicts would be meaningless."""


_TOKEN = re.compile(r"\s*(->|[()!&|]|[A-Za-z_][A-Za-z0-9_]*)")


def _tokens(text: str) -> list[str]:
    out, pos = [], 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise FormulaSyntaxError(f"unexpected character at {pos}: {text[pos:pos + 10]!r}")
        out.append(m.group(1))
        pos = m.end()
    return out


def parse_ltl(text: str) -> Formula:
    """Parse ``G F X U ! & | ->`` formulas; ``X`` is rejected after parsing.

    Precedence, loosest first: ``->`` (right assoc), ``|``, ``&``, ``U``
    (right assoc), then the prefix operators ``! G F X``.
    """
    toks = _tokens(text)
    pos = 0
    saw_next = False

    def peek():
        return toks[pos] if pos < len(toks) else None

    def take(expected=None):
        nonlocal pos
        tok = peek()
        if tok is None or (expected is not None and tok != expected):
            raise FormulaSyntaxError(f"expected {expected or 'a formula'}, got {tok or 'end of input'}")
        pos += 1
        return tok

    def implication():
        left = disjunction()
        if peek() == "->":
            take()
            return limplies(left, implication())
        return left

    def disjunction():
        left = conjunction()
        while peek() == "|":
            take()
            left = lor(left, conjunction())
        return left

    def conjunction():
        left = until()
        while peek() == "&":
            take()
            left = LAnd(left, until())
        return left

    def until():
        left = unary()
        if peek() == "U":
            take()
            return Until(left, until())
        return left

    def unary():
        nonlocal saw_next
        tok = peek()
        if tok == "!":
            take()
            return LNot(unary())
        if tok == "G":
            take()
            return globally(unary())
        if tok == "F":
            take()
            return eventually(unary())
        if tok == "X":
            take()
            saw_next = True
            return unary()
        if tok == "(":
            take()
            f = implication()
            take(")")
            return f
        if tok == "true":
            take()
            return TRUE
        if tok == "false":
            take()
            return LNot(TRUE)
        if tok is None or not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", tok) or tok == "U":
            raise FormulaSyntaxError(f"expected a formula, got {tok or 'end of input'}")
        take()
        return Prop(tok)

    f = implication()
    if pos != len(toks):
        raise FormulaSyntaxError(f"trailing input at token {toks[pos]!r}")
    if saw_next:
        raise NextOperatorError(
            "the next operator X is not allowed: verdicts on the quotient are only "
            "preserved for stutter-insensitive properties"
        )
    return f


# -- evaluation on lassos ------------------------------------------------------------------


def evaluate_lasso(f: Formula, prefix: Sequence[frozenset], loop: Sequence[frozenset]) -> bool:
    """Truth of ``f`` at position 0 of the word ``prefix . loop^omega``.

    Every subformula is labelled on the finitely many distinct positions;
    until is the least fixpoint of its one-step unfolding.
    """
    if not loop:
        raise ValueError("loop must be nonempty")
    word = list(prefix) + list(loop)
    n = len(word)
    nxt = list(range(1, n)) + [len(prefix)]
    val: dict[Formula, list[bool]] = {}
    for g in subformulas(f):
        if isinstance(g, LTrue):
            v = [True] * n
        elif isinstance(g, Prop):
            v = [g.name in w for w in word]
        elif isinstance(g, LNot):
            v = [not x for x in val[g.arg]]
        elif isinstance(g, LAnd):
            v = [a and b for a, b in zip(val[g.left], val[g.right])]
        else:
            a, b = val[g.left], val[g.right]
            v = [False] * n
            changed = True
            while changed:
                changed = False
                for i in reversed(range(n)):
                    new = b[i] or (a[i] and v[nxt[i]])
                    if new and not v[i]:
                        v[i] = True
                        changed = True
        val[g] = v
    return val[f][0]
