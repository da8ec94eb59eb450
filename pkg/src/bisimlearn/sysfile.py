"""Reading and writing system files.

Text format::

    # comments start with '#'
    name euclid
    vars x, y
    init true
    transitions
      x > y  -> x := x - y
      x < y  -> y := y - x
      else   -> skip
    labels
      terminated: x = y

Commands are tried top to bottom and the first whose guard holds fires; the
last command must use the guard ``else``.  Assignments are simultaneous and
variables that are not assigned keep their value.  Expressions use
``+ - * %`` (``%`` only by a positive constant), comparisons
``>= > = != <= <`` and boolean ``&& || !`` with ``true``/``false``.

The JSON rendering carries the same fields, with every expression written as
a string in the syntax above::

    {"name": "euclid", "vars": ["x", "y"], "init": "true",
     "transitions": [{"guard": "x > y", "update": {"x": "x - y"}}, ...,
                     {"guard": "else", "update": {}}],
     "labels": {"terminated": "x = y"}}
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

from .system import (
    FALSE,
    TRUE,
    Add,
    And,
    BoolConst,
    Cmp,
    Const,
    GuardedCommand,
    Mod,
    Mul,
    Neg,
    Not,
    Or,
    Sub,
    TransitionSystem,
    Var,
)


class SystemSyntaxError(ValueError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        where = f"line {line}, column {column}: " if line else ""
        super().__init__(where + message)


_TOKEN = re.compile(
    r"\s*(?:(?P<int>\d+)|(?P<id>[A-Za-z_][A-Za-z0-9_']*)"
    r"|(?P<op>:=|->|&&|\|\||!=|>=|<=|[><=!+\-*%(),:]))"
)


@dataclass
class _Tok:
    kind: str
    text: str
    col: int


def _tokenize(text: str, line: int, col0: int = 1) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            bad = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise SystemSyntaxError(f"unexpected character {text[bad]!r}", line, col0 + bad)
        kind = m.lastgroup
        toks.append(_Tok(kind, m.group(kind), col0 + m.start(kind)))
        pos = m.end()
    return toks


class _ExprParser:
    """Precedence parser returning either an IntExpr or a Predicate."""

    def __init__(self, toks: list[_Tok], variables: dict[str, int], line: int):
        self.toks = toks
        self.i = 0
        self.vars = variables
        self.line = line

    def error(self, msg, tok=None):
        tok = tok or (self.toks[self.i] if self.i < len(self.toks) else None)
        col = tok.col if tok else (self.toks[-1].col + len(self.toks[-1].text) if self.toks else 1)
        raise SystemSyntaxError(msg, self.line, col)

    def peek(self):
        return self.toks[self.i].text if self.i < len(self.toks) else None

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, text):
        if self.peek() != text:
            self.error(f"expected {text!r}")
        return self.take()

    def at_end(self):
        return self.i >= len(self.toks)

    def _need_pred(self, v, tok):
        if not _is_pred(v):
            self.error("expected a boolean expression", tok)
        return v

    def _need_int(self, v, tok):
        if _is_pred(v):
            self.error("expected an integer expression", tok)
        return v

    def parse_or(self):
        tok = self.toks[self.i] if not self.at_end() else None
        left = self.parse_and()
        if self.peek() != "||":
            return left
        args = [self._need_pred(left, tok)]
        while self.peek() == "||":
            self.take()
            tok = self.toks[self.i] if not self.at_end() else None
            args.append(self._need_pred(self.parse_and(), tok))
        return Or(tuple(args))

    def parse_and(self):
        tok = self.toks[self.i] if not self.at_end() else None
        left = self.parse_not()
        if self.peek() != "&&":
            return left
        args = [self._need_pred(left, tok)]
        while self.peek() == "&&":
            self.take()
            tok = self.toks[self.i] if not self.at_end() else None
            args.append(self._need_pred(self.parse_not(), tok))
        return And(tuple(args))

    def parse_not(self):
        if self.peek() == "!":
            tok = self.take()
            return Not(self._need_pred(self.parse_not(), tok))
        return self.parse_cmp()

    def parse_cmp(self):
        tok = self.toks[self.i] if not self.at_end() else None
        left = self.parse_arith()
        op = self.peek()
        if op in (">=", ">", "=", "!=", "<=", "<"):
            optok = self.take()
            self._need_int(left, tok)
            rtok = self.toks[self.i] if not self.at_end() else None
            right = self._need_int(self.parse_arith(), rtok)
            if self.peek() in (">=", ">", "=", "!=", "<=", "<"):
                self.error("comparisons do not chain", optok)
            return Cmp(op, left, right)
        return left

    def parse_arith(self):
        tok = self.toks[self.i] if not self.at_end() else None
        left = self.parse_term()
        while self.peek() in ("+", "-"):
            op = self.take()
            self._need_int(left, tok)
            rtok = self.toks[self.i] if not self.at_end() else None
            right = self._need_int(self.parse_term(), rtok)
            left = Add(left, right) if op.text == "+" else Sub(left, right)
        return left

    def parse_term(self):
        tok = self.toks[self.i] if not self.at_end() else None
        left = self.parse_factor()
        while self.peek() in ("*", "%"):
            op = self.take()
            self._need_int(left, tok)
            rtok = self.toks[self.i] if not self.at_end() else None
            right = self._need_int(self.parse_factor(), rtok)
            if op.text == "*":
                left = Mul(left, right)
            else:
                if not isinstance(right, Const) or right.value <= 0:
                    self.error("'%' needs a positive integer constant on the right", rtok)
                left = Mod(left, right.value)
        return left

    def parse_factor(self):
        if self.at_end():
            self.error("unexpected end of expression")
        tok = self.take()
        if tok.text == "-":
            inner = self._need_int(self.parse_factor(), tok)
            if isinstance(inner, Const):
                return Const(-inner.value)
            return Neg(inner)
        if tok.kind == "int":
            return Const(int(tok.text))
        if tok.kind == "id":
            if tok.text == "true":
                return TRUE
            if tok.text == "false":
                return FALSE
            if tok.text not in self.vars:
                self.error(f"unknown variable {tok.text!r}", tok)
            return Var(self.vars[tok.text])
        if tok.text == "(":
            inner = self.parse_or()
            self.expect(")")
            return inner
        self.error(f"unexpected {tok.text!r}", tok)


def _is_pred(v) -> bool:
    return isinstance(v, (Cmp, BoolConst, And, Or, Not))


def parse_expr(text: str, variables, line: int = 0, col0: int = 1, want: str = "int"):
    """Parse an integer expression (``want='int'``) or a predicate (``'bool'``)."""
    if not isinstance(variables, dict):
        variables = {v: i for i, v in enumerate(variables)}
    toks = _tokenize(text, line, col0)
    if not toks:
        raise SystemSyntaxError("empty expression", line, col0)
    p = _ExprParser(toks, variables, line)
    v = p.parse_or()
    if not p.at_end():
        p.error(f"unexpected {p.peek()!r}")
    if want == "bool" and not _is_pred(v):
        raise SystemSyntaxError("expected a boolean expression", line, col0)
    if want == "int" and _is_pred(v):
        raise SystemSyntaxError("expected an integer expression", line, col0)
    return v


def parse_pred(text: str, variables, line: int = 0, col0: int = 1):
    return parse_expr(text, variables, line, col0, want="bool")


def _parse_update(text: str, variables: dict[str, int], line: int, col0: int):
    n = len(variables)
    update = [Var(i) for i in range(n)]
    if text.strip() == "skip":
        return tuple(update)
    seen = set()
    # split on top-level commas
    depth, start, parts = 0, 0, []
    for i, ch in enumerate(text):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "," and depth == 0:
            parts.append((start, text[start:i]))
            start = i + 1
    parts.append((start, text[start:]))
    for off, part in parts:
        if ":=" not in part:
            raise SystemSyntaxError("expected 'var := expr' or 'skip'", line, col0 + off)
        lhs, rhs = part.split(":=", 1)
        name = lhs.strip()
        lcol = col0 + off + len(lhs) - len(lhs.lstrip())
        if name not in variables:
            raise SystemSyntaxError(f"unknown variable {name!r}", line, lcol)
        if name in seen:
            raise SystemSyntaxError(f"variable {name!r} assigned twice", line, lcol)
        seen.add(name)
        update[variables[name]] = parse_expr(rhs, variables, line, col0 + off + len(lhs) + 2)
    return tuple(update)


_SECTIONS = ("name", "vars", "init", "transitions", "labels")


def parse_system(text: str) -> TransitionSystem:
    """Parse the text format; JSON input (starting with ``{``) is also accepted."""
    if text.lstrip().startswith("{"):
        return system_from_json(json.loads(text))
    name = "system"
    variables: dict[str, int] | None = None
    init = None
    commands: list[GuardedCommand] = []
    labels: list[tuple[str, object]] = []
    section = None
    saw_else = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        indent = len(line) - len(line.lstrip())
        head, _, rest = line.strip().partition(" ")
        if indent == 0 and head in _SECTIONS:
            section = head
            rcol = indent + len(head) + 2 + (len(rest) - len(rest.lstrip()))
            rest = rest.strip()
            if head == "name":
                name = rest or name
            elif head == "vars":
                names = [v for v in re.split(r"[,\s]+", rest) if v]
                if not names:
                    raise SystemSyntaxError("'vars' needs at least one name", lineno, rcol)
                if len(set(names)) != len(names):
                    dup = next(v for v in names if names.count(v) > 1)
                    raise SystemSyntaxError(f"duplicate variable {dup!r}", lineno, rcol)
                for v in names:
                    if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", v) or v in ("true", "false", "else", "skip"):
                        raise SystemSyntaxError(f"bad variable name {v!r}", lineno, rcol)
                variables = {v: i for i, v in enumerate(names)}
            elif head == "init":
                _need_vars(variables, lineno)
                init = parse_pred(rest, variables, lineno, rcol)
            elif rest:
                raise SystemSyntaxError(f"unexpected text after '{head}'", lineno, rcol)
            continue
        col0 = indent + 1
        body = line.strip()
        if section == "transitions":
            _need_vars(variables, lineno)
            if saw_else:
                raise SystemSyntaxError("commands after the 'else' command", lineno, col0)
            if "->" not in body:
                raise SystemSyntaxError("expected 'guard -> update'", lineno, col0)
            guard_text, upd_text = body.split("->", 1)
            ucol = col0 + len(guard_text) + 2
            if guard_text.strip() == "else":
                guard = TRUE
                saw_else = True
            else:
                guard = parse_pred(guard_text, variables, lineno, col0)
            commands.append(GuardedCommand(guard, _parse_update(upd_text, variables, lineno, ucol)))
        elif section == "labels":
            _need_vars(variables, lineno)
            if ":" not in body:
                raise SystemSyntaxError("expected 'name: predicate'", lineno, col0)
            lname, pred_text = body.split(":", 1)
            lname = lname.strip()
            if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", lname):
                raise SystemSyntaxError(f"bad proposition name {lname!r}", lineno, col0)
            if any(lname == a for a, _ in labels):
                raise SystemSyntaxError(f"duplicate proposition {lname!r}", lineno, col0)
            labels.append((lname, parse_pred(pred_text, variables, lineno, col0 + len(lname) + 1)))
        else:
            raise SystemSyntaxError(f"unexpected line outside a section: {body!r}", lineno, col0)
    return _assemble(name, variables, init, commands, labels, saw_else)


def _need_vars(variables, lineno):
    if variables is None:
        raise SystemSyntaxError("'vars' must come first", lineno, 1)


def _assemble(name, variables, init, commands, labels, saw_else):
    if variables is None:
        raise SystemSyntaxError("missing 'vars' section")
    if not commands:
        raise SystemSyntaxError("missing 'transitions' section")
    if not saw_else:
        raise SystemSyntaxError("missing catch-all command: the last transition must have guard 'else'")
    return TransitionSystem(
        variables=tuple(variables),
        initial=init if init is not None else TRUE,
        commands=tuple(commands),
        propositions=tuple(labels),
        name=name,
    )


def system_from_json(doc: dict) -> TransitionSystem:
    try:
        names = list(doc["vars"])
        transitions = doc["transitions"]
    except (KeyError, TypeError) as exc:
        raise SystemSyntaxError(f"JSON system is missing field {exc}") from None
    if len(set(names)) != len(names):
        raise SystemSyntaxError("duplicate variable names")
    variables = {v: i for i, v in enumerate(names)}
    init = parse_pred(str(doc.get("init", "true")), variables)
    commands = []
    saw_else = False
    for k, tr in enumerate(transitions):
        if saw_else:
            raise SystemSyntaxError("commands after the 'else' command")
        g = str(tr.get("guard", "else")).strip()
        if g == "else":
            guard, saw_else = TRUE, True
        else:
            guard = parse_pred(g, variables)
        upd = tr.get("update", {})
        update = [Var(i) for i in range(len(names))]
        for v, e in upd.items():
            if v not in variables:
                raise SystemSyntaxError(f"transition {k}: unknown variable {v!r}")
            update[variables[v]] = parse_expr(str(e), variables)
        commands.append(GuardedCommand(guard, tuple(update)))
    raw_labels = doc.get("labels", {})
    items = raw_labels.items() if isinstance(raw_labels, dict) else [tuple(x) for x in raw_labels]
    labels = []
    for a, p in items:
        if any(a == b for b, _ in labels):
            raise SystemSyntaxError(f"duplicate proposition {a!r}")
        labels.append((a, parse_pred(str(p), variables)))
    return _assemble(doc.get("name", "system"), variables, init, commands, labels, saw_else)


# -- printing -----------------------------------------------------------------


def format_expr(e, names) -> str:
    if isinstance(e, Const):
        return str(e.value) if e.value >= 0 else f"({e.value})"
    if isinstance(e, Var):
        return names[e.index]
    if isinstance(e, Add):
        return f"({format_expr(e.left, names)} + {format_expr(e.right, names)})"
    if isinstance(e, Sub):
        return f"({format_expr(e.left, names)} - {format_expr(e.right, names)})"
    if isinstance(e, Mul):
        return f"({format_expr(e.left, names)} * {format_expr(e.right, names)})"
    if isinstance(e, Neg):
        return f"(-{format_expr(e.arg, names)})"
    if isinstance(e, Mod):
        return f"({format_expr(e.arg, names)} % {e.divisor})"
    if isinstance(e, Cmp):
        return f"{format_expr(e.left, names)} {e.op} {format_expr(e.right, names)}"
    if isinstance(e, BoolConst):
        return "true" if e.value else "false"
    if isinstance(e, And):
        return "(" + " && ".join(format_expr(a, names) for a in e.args) + ")" if e.args else "true"
    if isinstance(e, Or):
        return "(" + " || ".join(format_expr(a, names) for a in e.args) + ")" if e.args else "false"
    if isinstance(e, Not):
        return f"!({format_expr(e.arg, names)})"
    raise TypeError(e)


def print_system(m: TransitionSystem) -> str:
    names = m.variables
    out = [f"name {m.name}", "vars " + ", ".join(names), "init " + format_expr(m.initial, names), "transitions"]
    for cmd in m.commands:
        assigns = [
            f"{names[i]} := {format_expr(u, names)}"
            for i, u in enumerate(cmd.update)
            if u != Var(i)
        ]
        guard = "else" if cmd is m.commands[-1] else format_expr(cmd.guard, names)
        out.append(f"  {guard} -> {', '.join(assigns) if assigns else 'skip'}")
    if m.propositions:
        out.append("labels")
        for a, p in m.propositions:
            out.append(f"  {a}: {format_expr(p, names)}")
    return "\n".join(out) + "\n"


def system_to_json(m: TransitionSystem) -> dict:
    names = m.variables
    return {
        "name": m.name,
        "vars": list(names),
        "init": format_expr(m.initial, names),
        "transitions": [
            {
                "guard": "else" if i == len(m.commands) - 1 else format_expr(c.guard, names),
                "update": {names[k]: format_expr(u, names) for k, u in enumerate(c.update) if u != Var(k)},
            }
            for i, c in enumerate(m.commands)
        ],
        "labels": {a: format_expr(p, names) for a, p in m.propositions},
    }


def load_system(path) -> TransitionSystem:
    with open(path, encoding="utf-8") as fh:
        return parse_system(fh.read())
