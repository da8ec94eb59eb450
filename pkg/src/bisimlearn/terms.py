"""Sorted quantifier-free terms over integers and booleans.

Terms are immutable trees.  The constructors below fold constants as they
build, so substituting ground values into a term and rebuilding it yields a
simplified term; the learner and the verifier both rely on this to instantiate
one symbolic encoding in two different ways.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Union

INT = "Int"
BOOL = "Bool"

Value = Union[int, bool]
Valuation = Mapping[str, Value]


class SortError(TypeError):
    pass


class UnboundVariable(KeyError):
    pass


@dataclass(frozen=True, eq=False)
class Term:
    """Compared by identity; structural comparison of shared DAGs is exponential."""

    op: str
    args: tuple = ()
    value: object = None
    sort: str = BOOL

    def __repr__(self):
        return to_text(self)


TRUE = Term("const", value=True, sort=BOOL)
FALSE = Term("const", value=False, sort=BOOL)

_ARITH = {"add", "sub", "mul", "neg", "mod"}
_CMP = {"le", "lt", "ge", "gt", "eq", "ne"}


def is_const(t: Term) -> bool:
    return t.op == "const"


def Int(v: int) -> Term:
    if isinstance(v, bool) or not isinstance(v, int):
        raise SortError(f"not an integer: {v!r}")
    return Term("const", value=v, sort=INT)


def Bool(v: bool) -> Term:
    return TRUE if v else FALSE


def const(v: Value) -> Term:
    return Bool(v) if isinstance(v, bool) else Int(v)


def IntVar(name: str) -> Term:
    return Term("var", value=name, sort=INT)


def BoolVar(name: str) -> Term:
    return Term("var", value=name, sort=BOOL)


def _lift(x) -> Term:
    if isinstance(x, Term):
        return x
    return const(x)


def _ints(*xs):
    out = [_lift(x) for x in xs]
    for x in out:
        if x.sort != INT:
            raise SortError(f"expected Int, got {x.sort}: {x!r}")
    return out


def _bools(*xs):
    out = [_lift(x) for x in xs]
    for x in out:
        if x.sort != BOOL:
            raise SortError(f"expected Bool, got {x.sort}: {x!r}")
    return out


def add(*xs) -> Term:
    terms = []
    c = 0
    for x in _ints(*xs):
        if x.op == "add":
            for y in x.args:
                if is_const(y):
                    c += y.value
                else:
                    terms.append(y)
        elif is_const(x):
            c += x.value
        else:
            terms.append(x)
    if c != 0 or not terms:
        terms.append(Int(c))
    if len(terms) == 1:
        return terms[0]
    return Term("add", tuple(terms), sort=INT)


def sub(a, b) -> Term:
    a, b = _ints(a, b)
    if is_const(a) and is_const(b):
        return Int(a.value - b.value)
    if is_const(b) and b.value == 0:
        return a
    return Term("sub", (a, b), sort=INT)


def neg(a) -> Term:
    (a,) = _ints(a)
    if is_const(a):
        return Int(-a.value)
    return Term("neg", (a,), sort=INT)


def mul(a, b) -> Term:
    a, b = _ints(a, b)
    if is_const(a) and is_const(b):
        return Int(a.value * b.value)
    if is_const(b):
        a, b = b, a
    if is_const(a):
        if a.value == 0:
            return Int(0)
        if a.value == 1:
            return b
    return Term("mul", (a, b), sort=INT)


def mod(a, k: int) -> Term:
    """``a mod k`` for a positive integer constant ``k``."""
    (a,) = _ints(a)
    if not isinstance(k, int) or k <= 0:
        raise SortError("mod needs a positive constant divisor")
    if is_const(a):
        return Int(a.value % k)
    return Term("mod", (a,), value=k, sort=INT)


def _cmp(op, a, b) -> Term:
    a, b = _ints(a, b)
    if is_const(a) and is_const(b):
        return Bool(_CMP_FN[op](a.value, b.value))
    return Term(op, (a, b), sort=BOOL)


_CMP_FN = {
    "le": lambda a, b: a <= b,
    "lt": lambda a, b: a < b,
    "ge": lambda a, b: a >= b,
    "gt": lambda a, b: a > b,
    "eq": lambda a, b: a == b,
    "ne": lambda a, b: a != b,
}


def le(a, b):
    return _cmp("le", a, b)


def lt(a, b):
    return _cmp("lt", a, b)


def ge(a, b):
    return _cmp("ge", a, b)


def gt(a, b):
    return _cmp("gt", a, b)


def eq(a, b):
    return _cmp("eq", a, b)


def ne(a, b):
    return _cmp("ne", a, b)


def and_(*xs) -> Term:
    out = []
    for x in _bools(*xs):
        if x is TRUE or (is_const(x) and x.value):
            continue
        if is_const(x):
            return FALSE
        if x.op == "and":
            out.extend(x.args)
        else:
            out.append(x)
    if not out:
        return TRUE
    if len(out) == 1:
        return out[0]
    return Term("and", tuple(out))


def or_(*xs) -> Term:
    out = []
    for x in _bools(*xs):
        if is_const(x):
            if x.value:
                return TRUE
            continue
        if x.op == "or":
            out.extend(x.args)
        else:
            out.append(x)
    if not out:
        return FALSE
    if len(out) == 1:
        return out[0]
    return Term("or", tuple(out))


def not_(a) -> Term:
    (a,) = _bools(a)
    if is_const(a):
        return Bool(not a.value)
    if a.op == "not":
        return a.args[0]
    return Term("not", (a,))


def implies(a, b) -> Term:
    a, b = _bools(a, b)
    if is_const(a):
        return b if a.value else TRUE
    if is_const(b):
        return TRUE if b.value else not_(a)
    return Term("implies", (a, b))


def ite(c, a, b) -> Term:
    (c,) = _bools(c)
    a, b = _lift(a), _lift(b)
    if a.sort != b.sort:
        raise SortError("ite branches have different sorts")
    if is_const(c):
        return a if c.value else b
    if a is b or (is_const(a) and is_const(b) and a.value == b.value):
        return a
    if a.sort == BOOL:
        # keeps the boolean fragment free of ite
        return or_(and_(c, a), and_(not_(c), b))
    return Term("ite", (c, a, b), sort=a.sort)


def conj(xs: Iterable[Term]) -> Term:
    return and_(*xs)


def disj(xs: Iterable[Term]) -> Term:
    return or_(*xs)


def linear(coeffs, xs, offset=0) -> Term:
    """``sum(c * x) + offset`` for term or int coefficients."""
    return add(*(mul(c, x) for c, x in zip(coeffs, xs)), offset)


# -- traversal ------------------------------------------------------------------

_BUILD = {
    "add": lambda t, a: add(*a),
    "sub": lambda t, a: sub(*a),
    "mul": lambda t, a: mul(*a),
    "neg": lambda t, a: neg(*a),
    "mod": lambda t, a: mod(a[0], t.value),
    "le": lambda t, a: le(*a),
    "lt": lambda t, a: lt(*a),
    "ge": lambda t, a: ge(*a),
    "gt": lambda t, a: gt(*a),
    "eq": lambda t, a: eq(*a),
    "ne": lambda t, a: ne(*a),
    "and": lambda t, a: and_(*a),
    "or": lambda t, a: or_(*a),
    "not": lambda t, a: not_(*a),
    "implies": lambda t, a: implies(*a),
    "ite": lambda t, a: ite(*a),
}


def substitute(t: Term, bindings: Valuation) -> Term:
    """Replace bound variables by constants and re-simplify.

    Shared subterms are rewritten once, so sharing survives substitution.
    """
    memo: dict[int, Term] = {}

    def go(u: Term) -> Term:
        key = id(u)
        hit = memo.get(key)
        if hit is not None:
            return hit
        if u.op == "const":
            r = u
        elif u.op == "var":
            if u.value in bindings:
                v = bindings[u.value]
                if (u.sort == BOOL) != isinstance(v, bool):
                    raise SortError(f"value {v!r} does not fit {u.value}: {u.sort}")
                r = const(v)
            else:
                r = u
        else:
            new = tuple(go(a) for a in u.args)
            r = u if all(x is y for x, y in zip(new, u.args)) else _BUILD[u.op](u, new)
        memo[key] = r
        return r

    return go(t)


def evaluate_term(t: Term, v: Valuation) -> Value:
    memo: dict[int, Value] = {}

    def go(u: Term) -> Value:
        key = id(u)
        if key in memo:
            return memo[key]
        op = u.op
        if op == "const":
            r = u.value
        elif op == "var":
            if u.value not in v:
                raise UnboundVariable(u.value)
            r = v[u.value]
            if (u.sort == BOOL) != isinstance(r, bool):
                raise SortError(f"value {r!r} does not fit {u.value}: {u.sort}")
        elif op == "and":
            r = True
            for a in u.args:
                if not go(a):
                    r = False
                    break
        elif op == "or":
            r = False
            for a in u.args:
                if go(a):
                    r = True
                    break
        elif op == "not":
            r = not go(u.args[0])
        elif op == "implies":
            r = (not go(u.args[0])) or go(u.args[1])
        elif op == "ite":
            r = go(u.args[1]) if go(u.args[0]) else go(u.args[2])
        elif op == "add":
            r = sum(go(a) for a in u.args)
        elif op == "sub":
            r = go(u.args[0]) - go(u.args[1])
        elif op == "mul":
            r = go(u.args[0]) * go(u.args[1])
        elif op == "neg":
            r = -go(u.args[0])
        elif op == "mod":
            r = go(u.args[0]) % u.value
        elif op in _CMP_FN:
            r = _CMP_FN[op](go(u.args[0]), go(u.args[1]))
        else:
            raise ValueError(f"unknown operator {op}")
        memo[key] = r
        return r

    return go(t)


def free_vars(t: Term) -> dict[str, str]:
    """Map each free variable name to its sort."""
    out: dict[str, str] = {}
    seen: set[int] = set()
    stack = [t]
    while stack:
        u = stack.pop()
        if id(u) in seen:
            continue
        seen.add(id(u))
        if u.op == "var":
            out[u.value] = u.sort
        else:
            stack.extend(u.args)
    return out


def is_nonlinear(t: Term) -> bool:
    seen: set[int] = set()
    stack = [t]
    while stack:
        u = stack.pop()
        if id(u) in seen:
            continue
        seen.add(id(u))
        if u.op == "mul" and not is_const(u.args[0]) and not is_const(u.args[1]):
            return True
        stack.extend(u.args)
    return False


_TEXT = {
    "add": "+", "sub": "-", "mul": "*", "le": "<=", "lt": "<", "ge": ">=",
    "gt": ">", "eq": "=", "ne": "!=", "and": "&&", "or": "||", "implies": "=>",
}


def to_text(t: Term) -> str:
    if t.op == "const":
        return str(t.value).lower() if t.sort == BOOL else str(t.value)
    if t.op == "var":
        return t.value
    if t.op == "not":
        return f"!{to_text(t.args[0])}"
    if t.op == "neg":
        return f"-{to_text(t.args[0])}"
    if t.op == "mod":
        return f"({to_text(t.args[0])} % {t.value})"
    if t.op == "ite":
        return "ite(" + ", ".join(to_text(a) for a in t.args) + ")"
    return "(" + f" {_TEXT[t.op]} ".join(to_text(a) for a in t.args) + ")"


_PY = {
    "le": "<=", "lt": "<", "ge": ">=", "gt": ">", "eq": "==", "ne": "!=",
    "and": " and ", "or": " or ",
}


def compile_term(t: Term, params: Iterable[str]):
    """Python function of ``params`` (positional) computing the same value.

    Shared subterms become local variables, so the code stays linear in the
    size of the term DAG.
    """
    params = list(params)
    fv = free_vars(t)
    missing = set(fv) - set(params)
    if missing:
        raise UnboundVariable(sorted(missing)[0])
    local = {p: f"a{i}" for i, p in enumerate(params)}
    refs: dict[int, int] = {}
    stack = [t]
    while stack:
        u = stack.pop()
        refs[id(u)] = refs.get(id(u), 0) + 1
        if refs[id(u)] == 1:
            stack.extend(u.args)
    lines: list[str] = []
    names: dict[int, str] = {}

    def go(u) -> str:
        key = id(u)
        if key in names:
            return names[key]
        if u.op == "const":
            return repr(u.value)
        if u.op == "var":
            return local[u.value]
        a = [go(x) for x in u.args]
        op = u.op
        if op == "add":
            s = "(" + " + ".join(a) + ")"
        elif op == "sub":
            s = f"({a[0]} - {a[1]})"
        elif op == "mul":
            s = f"({a[0]} * {a[1]})"
        elif op == "neg":
            s = f"(-{a[0]})"
        elif op == "mod":
            s = f"({a[0]} % {u.value})"
        elif op in ("and", "or"):
            s = "(" + _PY[op].join(a) + ")"
        elif op == "not":
            s = f"(not {a[0]})"
        elif op == "implies":
            s = f"((not {a[0]}) or {a[1]})"
        elif op == "ite":
            s = f"({a[1]} if {a[0]} else {a[2]})"
        else:
            s = f"({a[0]} {_PY[op]} {a[1]})"
        if refs[key] > 1:
            # every operator is total, so eager evaluation of shared parts is safe
            name = f"_v{len(names)}"
            lines.append(f"    {name} = {s}")
            names[key] = name
            return name
        return s

    body = go(t)
    args = ", ".join(local[p] for p in params)
    code = f"def _f({args}):\n" + "\n".join(lines) + ("\n" if lines else "") + f"    return {body}\n"
    scope: dict = {}
    exec(code, scope)
    return scope["_f"]
