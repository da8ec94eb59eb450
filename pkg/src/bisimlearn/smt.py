"""SMT-LIB v2 driver for an external solver process.

Every query runs in a fresh solver process: the script is written to stdin
and the answer (``sat``/``unsat``/``unknown`` plus a model) read back from
stdout.  Any solver that speaks SMT-LIB v2 and prints models in the standard
``define-fun`` form works; z3 is the default.
"""

from __future__ import annotations

import logging
import os
import shutil
import subprocess
import time
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

from .terms import BOOL, INT, Term, Valuation, evaluate_term, free_vars, is_nonlinear

log = logging.getLogger(__name__)

SOLVER_ENV = "BISIMLEARN_SOLVER"


class SolverError(RuntimeError):
    pass


class SolverNotFound(SolverError):
    pass


class ModelParseError(SolverError):
    pass


def default_solver_path() -> str:
    return os.environ.get(SOLVER_ENV) or "z3"


@dataclass(frozen=True)
class SolverConfig:
    executable: str = field(default_factory=default_solver_path)
    args: tuple[str, ...] = ("-in", "-smt2")
    logic: Optional[str] = None  # picked from the assertion when None
    timeout_ms: int = 60_000
    seed: Optional[int] = 0
    check_models: bool = True
    rlimit: Optional[int] = None  # deterministic work limit (z3 resource units)
    options: tuple[tuple[str, str], ...] = ()  # extra solver-specific set-option pairs

    def __post_init__(self):
        if self.timeout_ms <= 0:
            raise ValueError("timeout must be positive")

    def with_seed(self, seed):
        return _replace(self, seed=seed)


def _replace(cfg, **kw):
    from dataclasses import replace

    return replace(cfg, **kw)


@dataclass(frozen=True)
class Sat:
    model: dict


@dataclass(frozen=True)
class Unsat:
    pass


@dataclass(frozen=True)
class Unknown:
    reason: str


SolverResult = Union[Sat, Unsat, Unknown]


@dataclass
class SolverStats:
    queries: int = 0
    seconds: float = 0.0

    def add(self, other: "SolverStats"):
        self.queries += other.queries
        self.seconds += other.seconds


# -- printing -------------------------------------------------------------------

_SMT_OP = {
    "add": "+", "sub": "-", "mul": "*", "neg": "-", "le": "<=", "lt": "<",
    "ge": ">=", "gt": ">", "eq": "=", "and": "and", "or": "or",
    "not": "not", "implies": "=>", "ite": "ite",
}


def _atom(t: Term) -> str:
    if t.op == "const":
        if t.sort == BOOL:
            return "true" if t.value else "false"
        return str(t.value) if t.value >= 0 else f"(- {-t.value})"
    return _symbol(t.value)


def _symbol(name: str) -> str:
    if all(c.isalnum() or c in "_.!@$%^&*+-<>=?/~" for c in name) and not name[0].isdigit():
        return name
    return "|" + name.replace("|", "") + "|"


def to_smtlib(
    declarations: Mapping[str, str],
    assertion: Term,
    logic: Optional[str] = None,
    seed: Optional[int] = None,
    timeout_ms: Optional[int] = None,
    rlimit: Optional[int] = None,
    options: Sequence[tuple[str, str]] = (),
) -> str:
    """Render a check-sat script.

    Subterms referenced more than once are hoisted into ``define-fun``
    definitions so shared structure is not expanded in the text.
    """
    if assertion.sort != BOOL:
        raise TypeError("assertion must be Bool")
    if logic is None:
        logic = "QF_NIA" if is_nonlinear(assertion) else "QF_LIA"

    refs: dict[int, int] = {}
    order: list[Term] = []
    stack: list[tuple[Term, bool]] = [(assertion, False)]
    while stack:
        u, done = stack.pop()
        if done:
            order.append(u)
            continue
        k = id(u)
        if k in refs:
            refs[k] += 1
            continue
        refs[k] = 1
        stack.append((u, True))
        for a in reversed(u.args):
            stack.append((a, False))

    names: dict[int, str] = {}
    text: dict[int, str] = {}
    defs: list[str] = []
    for u in order:
        if u.op in ("const", "var"):
            s = _atom(u)
        else:
            parts = [text[id(a)] for a in u.args]
            if u.op == "mod":
                s = f"(mod {parts[0]} {u.value})"
            elif u.op == "ne":
                s = f"(not (= {parts[0]} {parts[1]}))"
            else:
                s = f"({_SMT_OP[u.op]} {' '.join(parts)})"
            if refs[id(u)] > 1 and u is not assertion:
                name = f"_d{len(defs)}"
                sort = "Bool" if u.sort == BOOL else "Int"
                defs.append(f"(define-fun {name} () {sort} {s})")
                names[id(u)] = name
                s = name
        text[id(u)] = s

    lines = ["(set-option :print-success false)", "(set-option :produce-models true)"]
    if seed is not None:
        lines.append(f"(set-option :random-seed {seed})")
    if timeout_ms is not None:
        lines.append(f"(set-option :timeout {timeout_ms})")
    if rlimit is not None:
        lines.append(f"(set-option :rlimit {rlimit})")
    for key, value in options:
        lines.append(f"(set-option :{key} {value})")
    lines.append(f"(set-logic {logic})")
    for name, sort in declarations.items():
        lines.append(f"(declare-fun {_symbol(name)} () {'Bool' if sort == BOOL else 'Int'})")
    lines.extend(defs)
    lines.append(f"(assert {text[id(assertion)]})")
    lines.append("(check-sat)")
    lines.append("(get-model)")
    return "\n".join(lines) + "\n"


# -- parsing ----------------------------------------------------------------------


def _sexprs(text: str):
    """Tokenize and parse all top-level s-expressions in ``text``."""
    tokens = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
        elif c in "()":
            tokens.append(c)
            i += 1
        elif c == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif c == '"':
            j = i + 1
            while j < n and not (text[j] == '"' and (j + 1 >= n or text[j + 1] != '"')):
                j += 2 if text[j] == '"' else 1
            tokens.append(text[i : j + 1])
            i = j + 1
        elif c == "|":
            j = text.index("|", i + 1)
            tokens.append(text[i + 1 : j])
            i = j + 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in "();":
                j += 1
            tokens.append(text[i:j])
            i = j
    out = []
    stack: list[list] = []
    for tok in tokens:
        if tok == "(":
            stack.append([])
        elif tok == ")":
            if not stack:
                raise ModelParseError("unbalanced ')'")
            done = stack.pop()
            (stack[-1] if stack else out).append(done)
        else:
            (stack[-1] if stack else out).append(tok)
    if stack:
        raise ModelParseError("unbalanced '('")
    return out


def _value(x):
    if isinstance(x, str):
        if x == "true":
            return True
        if x == "false":
            return False
        try:
            return int(x)
        except ValueError:
            raise ModelParseError(f"unsupported value {x!r}") from None
    if len(x) == 2 and x[0] == "-":
        v = _value(x[1])
        if isinstance(v, bool):
            raise ModelParseError("negated boolean")
        return -v
    raise ModelParseError(f"unsupported value {x!r}")


def parse_model(text: str, declarations: Optional[Mapping[str, str]] = None) -> dict:
    """Read ``(define-fun name () Sort value)`` entries into a valuation.

    With ``declarations``, only those names are kept and missing ones get
    the default value of their sort (solvers omit unconstrained constants).
    """
    exprs = _sexprs(text)
    model = {}
    pending = list(exprs)
    while pending:
        e = pending.pop(0)
        if not isinstance(e, list):
            continue
        if e and e[0] == "model":
            pending.extend(e[1:])
            continue
        if len(e) == 5 and e[0] == "define-fun":
            name, params, sort, body = e[1], e[2], e[3], e[4]
            if params != [] or sort not in ("Int", "Bool"):
                continue
            if declarations is not None and name not in declarations:
                continue
            model[name] = _value(body)
        elif e and e[0] == "error":
            raise ModelParseError(f"solver error: {' '.join(map(str, e[1:]))}")
        else:
            pending.extend(x for x in e if isinstance(x, list))
    if declarations is not None:
        for name, sort in declarations.items():
            model.setdefault(name, False if sort == BOOL else 0)
    return model


# -- running ----------------------------------------------------------------------


def _resolve(executable: str) -> str:
    path = shutil.which(executable)
    if path is None:
        raise SolverNotFound(f"SMT solver {executable!r} not found (set --solver or ${SOLVER_ENV})")
    return path


def check_sat(
    cfg: SolverConfig,
    declarations: Optional[Mapping[str, str]],
    assertion: Term,
    stats: Optional[SolverStats] = None,
) -> SolverResult:
    """Decide ``assertion`` with a fresh solver process."""
    fv = free_vars(assertion)
    if declarations is None:
        declarations = fv
    else:
        missing = set(fv) - set(declarations)
        if missing:
            raise ValueError(f"undeclared variables: {sorted(missing)}")
    script = to_smtlib(declarations, assertion, cfg.logic, cfg.seed, cfg.timeout_ms, cfg.rlimit, cfg.options)
    exe = _resolve(cfg.executable)
    t0 = time.perf_counter()
    try:
        proc = subprocess.run(
            [exe, *cfg.args],
            input=script,
            capture_output=True,
            text=True,
            timeout=cfg.timeout_ms / 1000 + 5,
        )
    except subprocess.TimeoutExpired:
        return Unknown("timeout")
    except OSError as exc:
        raise SolverNotFound(str(exc)) from exc
    finally:
        if stats is not None:
            stats.queries += 1
            stats.seconds += time.perf_counter() - t0
    out = proc.stdout.lstrip()
    head, _, rest = out.partition("\n")
    head = head.strip()
    if head == "unsat":
        return Unsat()
    if head == "unknown":
        text = proc.stderr + rest
        if "resource" in text:
            return Unknown("resource limit")
        return Unknown("timeout" if "timeout" in text else "unknown")
    if head == "timeout":
        return Unknown("timeout")
    if head != "sat":
        raise SolverError(f"unexpected solver output: {out[:200]!r} {proc.stderr[:200]!r}")
    model = parse_model(rest, declarations)
    if cfg.check_models and evaluate_term(assertion, model) is not True:
        raise SolverError("solver model does not satisfy the assertion")
    return Sat(model)


def solver_available(cfg: Optional[SolverConfig] = None) -> bool:
    try:
        _resolve((cfg or SolverConfig()).executable)
        return True
    except SolverNotFound:
        return False
