"""Binary decision tree classifier templates with per-class ranking functions.

A template is a tree whose inner nodes test either a fixed predicate (the
label-preserving top layer) or a parametric affine form ``w . s - b >= 0``
with integer parameters ``w``, ``b``.  Leaves carry class ids.  Besides the
tree parameters, a solution assigns every class an abstract successor
(``gamma``) and an affine ranking function (``eta``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

from . import terms as T
from .symbolic import pred_term, state_symbols
from .system import Predicate, compile_pred, evaluate_pred
from .sysfile import format_expr


@dataclass(frozen=True)
class Leaf:
    cls: int
    cell: frozenset = frozenset()


@dataclass(frozen=True)
class Fixed:
    predicate: Predicate
    name: str = ""


@dataclass(frozen=True)
class Affine:
    weights: tuple[str, ...]
    offset: str


@dataclass(frozen=True)
class Node:
    decision: Union[Fixed, Affine]
    left: "Tree"
    right: "Tree"


Tree = Union[Leaf, Node]


class UnknownClass(KeyError):
    pass


class UnboundParameter(KeyError):
    pass


@dataclass(frozen=True)
class BdtTemplate:
    root: Tree
    dimension: int
    variables: tuple[str, ...] = ()
    next_node: int = 0

    def __post_init__(self):
        ids = [leaf.cls for leaf in self.leaves()]
        if len(set(ids)) != len(ids):
            raise ValueError("leaf class ids must be distinct")
        if not self.variables:
            object.__setattr__(self, "variables", tuple(f"x{i}" for i in range(self.dimension)))

    def leaves(self) -> list[Leaf]:
        out = []
        stack = [self.root]
        while stack:
            t = stack.pop()
            if isinstance(t, Leaf):
                out.append(t)
            else:
                stack.append(t.right)
                stack.append(t.left)
        return out

    @property
    def classes(self) -> tuple[int, ...]:
        return tuple(leaf.cls for leaf in self.leaves())

    def cell_of(self, c: int) -> frozenset:
        for leaf in self.leaves():
            if leaf.cls == c:
                return leaf.cell
        raise UnknownClass(c)

    def affine_nodes(self) -> list[Affine]:
        out = []
        stack = [self.root]
        while stack:
            t = stack.pop()
            if isinstance(t, Node):
                if isinstance(t.decision, Affine):
                    out.append(t.decision)
                stack.append(t.right)
                stack.append(t.left)
        return out

    def theta_names(self) -> list[str]:
        out = []
        for a in self.affine_nodes():
            out.extend(a.weights)
            out.append(a.offset)
        return out

    def depth(self) -> int:
        def go(t):
            return 0 if isinstance(t, Leaf) else 1 + max(go(t.left), go(t.right))

        return go(self.root)


def gamma_name(c: int) -> str:
    return f"g{c}"


def eta_names(c: int, n: int) -> tuple[tuple[str, ...], str]:
    return tuple(f"hw{c}_{i}" for i in range(n)), f"hb{c}"


@dataclass(frozen=True)
class ParameterAssignment:
    theta: Mapping[str, int] = field(default_factory=dict)
    gamma: Mapping[int, int] = field(default_factory=dict)
    eta: Mapping[int, tuple[tuple[int, ...], int]] = field(default_factory=dict)

    def check(self, t: BdtTemplate):
        missing = [n for n in t.theta_names() if n not in self.theta]
        if missing:
            raise UnboundParameter(missing[0])
        classes = set(t.classes)
        for c in classes:
            if c not in self.gamma or self.gamma[c] not in classes:
                raise ValueError(f"gamma is not a total map into the classes at {c}")

    def valuation(self, t: BdtTemplate) -> dict:
        """Flat name -> value map matching the free variables of the encodings."""
        v = dict(self.theta)
        for c in t.classes:
            v[gamma_name(c)] = self.gamma[c]
            ws, b = eta_names(c, t.dimension)
            hw, hb = self.eta.get(c, ((0,) * t.dimension, 0))
            v.update(zip(ws, hw))
            v[b] = hb
        return v

    @classmethod
    def from_valuation(cls, t: BdtTemplate, v: Mapping[str, int]) -> "ParameterAssignment":
        theta = {n: v[n] for n in t.theta_names()}
        gamma = {c: v[gamma_name(c)] for c in t.classes}
        eta = {}
        for c in t.classes:
            ws, b = eta_names(c, t.dimension)
            eta[c] = (tuple(v[w] for w in ws), v[b])
        return cls(theta, gamma, eta)

    def to_json(self) -> dict:
        return {
            "theta": dict(self.theta),
            "gamma": {str(c): d for c, d in self.gamma.items()},
            "eta": {str(c): [list(w), b] for c, (w, b) in self.eta.items()},
        }

    @classmethod
    def from_json(cls, doc) -> "ParameterAssignment":
        return cls(
            theta={k: int(v) for k, v in doc["theta"].items()},
            gamma={int(c): int(d) for c, d in doc["gamma"].items()},
            eta={int(c): (tuple(int(x) for x in w), int(b)) for c, (w, b) in doc["eta"].items()},
        )


# -- construction -------------------------------------------------------------------


def _fresh_affine(t_next: int, n: int) -> Affine:
    return Affine(tuple(f"w{t_next}_{i}" for i in range(n)), f"b{t_next}")


def build_label_preserving_template(
    propositions: Sequence[tuple[str, Predicate]],
    extra_depth: int = 0,
    dimension: Optional[int] = None,
    variables: Sequence[str] = (),
    solver=None,
) -> BdtTemplate:
    """Template whose fixed top layer realises the observation partition.

    Each fixed node tests one whole proposition.  Along a path, a proposition
    is only tested while its value is still undecided by the tests above it,
    so every exit of the fixed layer is a distinct, nonempty observation cell.
    Below each exit hangs a complete parametric subtree of depth
    ``extra_depth``.
    """
    from .smt import Sat, SolverConfig, Unsat, check_sat

    if dimension is None:
        dimension = len(variables)
    if dimension <= 0:
        raise ValueError("dimension must be positive")
    cfg = solver or SolverConfig()
    syms = state_symbols(dimension)
    props = [(a, p, pred_term(p, syms)) for a, p in propositions]

    def feasible(path):
        res = check_sat(cfg, None, T.and_(*path) if path else T.TRUE)
        if isinstance(res, Sat):
            return True
        if isinstance(res, Unsat):
            return False
        raise RuntimeError(f"cannot decide observation cell emptiness: {res}")

    next_cls = [0]

    def build(path):
        for name, pred, term in props:
            pos = feasible(path + [term])
            negf = feasible(path + [T.not_(term)])
            if pos and negf:
                return Node(Fixed(pred, name), build(path + [term]), build(path + [T.not_(term)]))
        cell = frozenset(name for name, _, term in props if feasible(path + [term]))
        c = next_cls[0]
        next_cls[0] += 1
        return Leaf(c, cell)

    t = BdtTemplate(build([]), dimension, tuple(variables))
    for _ in range(extra_depth):
        t = enlarge(t)
    return t


def enlarge(t: BdtTemplate) -> BdtTemplate:
    """Split every leaf with a fresh parametric decision.

    The old class stays on the left, a fresh class (same observation cell) is
    created on the right, so old ids keep their meaning.
    """
    fresh = [max(t.classes) + 1]
    counter = [t.next_node]

    def go(u):
        if isinstance(u, Leaf):
            aff = _fresh_affine(counter[0], t.dimension)
            counter[0] += 1
            new = Leaf(fresh[0], u.cell)
            fresh[0] += 1
            return Node(aff, u, new)
        return Node(u.decision, go(u.left), go(u.right))

    root = go(t.root)
    return BdtTemplate(root, t.dimension, t.variables, counter[0])


# -- semantics ---------------------------------------------------------------------------


def _decide(d, p: ParameterAssignment, s) -> bool:
    if isinstance(d, Fixed):
        return evaluate_pred(d.predicate, s)
    try:
        val = sum(p.theta[w] * x for w, x in zip(d.weights, s)) - p.theta[d.offset]
    except KeyError as exc:
        raise UnboundParameter(exc.args[0]) from None
    return val >= 0


def classify(t: BdtTemplate, p: ParameterAssignment, s) -> int:
    u = t.root
    while isinstance(u, Node):
        u = u.left if _decide(u.decision, p, s) else u.right
    return u.cls


def compile_classifier(t: BdtTemplate, p: ParameterAssignment):
    """Fast Python closure equivalent to ``classify(t, p, .)``."""
    fixed: list = []

    def src(u, ind):
        pad = "    " * ind
        if isinstance(u, Leaf):
            return f"{pad}return {u.cls}\n"
        d = u.decision
        if isinstance(d, Fixed):
            fixed.append(compile_pred(d.predicate))
            cond = f"_f{len(fixed) - 1}(s)"
        else:
            terms = " + ".join(f"({p.theta[w]}) * s[{i}]" for i, w in enumerate(d.weights))
            cond = f"{terms} - ({p.theta[d.offset]}) >= 0"
        return f"{pad}if {cond}:\n{src(u.left, ind + 1)}{pad}else:\n{src(u.right, ind + 1)}"

    code = "def _classify(s):\n" + src(t.root, 1)
    scope = {f"_f{i}": f for i, f in enumerate(fixed)}
    exec(code, scope)
    return scope["_classify"]


def rank(p: ParameterAssignment, c: int, s) -> int:
    if c not in p.eta:
        raise UnknownClass(c)
    w, b = p.eta[c]
    return sum(a * x for a, x in zip(w, s)) + b


# -- symbolic encodings ------------------------------------------------------------------


def decision_term(d, syms) -> T.Term:
    """Boolean term for "the decision goes left" with parameters left free."""
    if isinstance(d, Fixed):
        return pred_term(d.predicate, syms)
    val = T.sub(T.linear([T.IntVar(w) for w in d.weights], syms), T.IntVar(d.offset))
    return T.ge(val, 0)


def leaf_conditions(t: BdtTemplate, syms) -> dict[int, T.Term]:
    """Path condition of every class; prefixes are shared between classes."""
    out: dict[int, T.Term] = {}

    def go(u, path):
        if isinstance(u, Leaf):
            out[u.cls] = T.and_(*path)
            return
        d = decision_term(u.decision, syms)
        go(u.left, path + [d])
        go(u.right, path + [T.not_(d)])

    go(t.root, [])
    return out


def path_condition(t: BdtTemplate, c: int, syms) -> T.Term:
    conds = leaf_conditions(t, syms)
    if c not in conds:
        raise UnknownClass(c)
    return conds[c]


def class_term(t: BdtTemplate, syms) -> T.Term:
    """Integer term evaluating to the class of the state ``syms``."""

    def go(u):
        if isinstance(u, Leaf):
            return T.Int(u.cls)
        return T.ite(decision_term(u.decision, syms), go(u.left), go(u.right))

    return go(t.root)


def rank_term(c: int, n: int, syms) -> T.Term:
    ws, b = eta_names(c, n)
    return T.add(T.linear([T.IntVar(w) for w in ws], syms), T.IntVar(b))


# -- dumps and serialisation ---------------------------------------------------------------


def _affine_text(d: Affine, p: Optional[ParameterAssignment], names) -> str:
    if p is None:
        return " + ".join(f"{w}*{x}" for w, x in zip(d.weights, names)) + f" - {d.offset} >= 0"
    parts = []
    for w, x in zip(d.weights, names):
        k = p.theta[w]
        if k == 0:
            continue
        parts.append(f"{x}" if k == 1 else f"-{x}" if k == -1 else f"{k}*{x}")
    lhs = " + ".join(parts).replace("+ -", "- ") or "0"
    return f"{lhs} >= {p.theta[d.offset]}"


def decision_text(d, p: Optional[ParameterAssignment], names) -> str:
    if isinstance(d, Fixed):
        label = f"[{d.name}] " if d.name else ""
        return label + format_expr(d.predicate, names)
    return _affine_text(d, p, names)


def dump_text(t: BdtTemplate, p: Optional[ParameterAssignment] = None, class_names=None) -> str:
    """Indented tree: ``if`` branches are taken when the test holds."""
    names = t.variables
    lines: list[str] = []

    def go(u, ind):
        pad = "  " * ind
        if isinstance(u, Leaf):
            label = class_names(u.cls) if class_names else f"class {u.cls}"
            cell = "{" + ", ".join(sorted(u.cell)) + "}"
            extra = ""
            if p is not None and u.cls in p.gamma:
                w, b = p.eta.get(u.cls, ((0,) * t.dimension, 0))
                rk = " + ".join(f"{k}*{x}" for k, x in zip(w, names) if k) or "0"
                extra = f"  -> {p.gamma[u.cls]}, rank {rk} + {b}"
            lines.append(f"{pad}{label} {cell}{extra}")
            return
        lines.append(f"{pad}if {decision_text(u.decision, p, names)}:")
        go(u.left, ind + 1)
        lines.append(f"{pad}else:")
        go(u.right, ind + 1)

    go(t.root, 0)
    return "\n".join(lines) + "\n"


def dump_dot(t: BdtTemplate, p: Optional[ParameterAssignment] = None) -> str:
    names = t.variables
    lines = ["digraph bdt {", "  node [fontname=monospace];"]
    counter = [0]

    def go(u):
        k = counter[0]
        counter[0] += 1
        if isinstance(u, Leaf):
            cell = ", ".join(sorted(u.cell))
            lines.append(f'  n{k} [shape=box, label="{u.cls}\\n{{{cell}}}"];')
            return k
        text = decision_text(u.decision, p, names).replace('"', '\\"')
        lines.append(f'  n{k} [shape=ellipse, label="{text}"];')
        a = go(u.left)
        b = go(u.right)
        lines.append(f'  n{k} -> n{a} [label="yes"];')
        lines.append(f'  n{k} -> n{b} [label="no", style=dashed];')
        return k

    go(t.root)
    lines.append("}")
    return "\n".join(lines) + "\n"


def template_to_json(t: BdtTemplate) -> dict:
    from .sysfile import format_expr as fmt

    def go(u):
        if isinstance(u, Leaf):
            return {"leaf": u.cls, "cell": sorted(u.cell)}
        d = u.decision
        if isinstance(d, Fixed):
            dec = {"fixed": fmt(d.predicate, t.variables), "name": d.name}
        else:
            dec = {"weights": list(d.weights), "offset": d.offset}
        return {"decision": dec, "left": go(u.left), "right": go(u.right)}

    return {"dimension": t.dimension, "variables": list(t.variables), "next_node": t.next_node, "root": go(t.root)}


def template_from_json(doc) -> BdtTemplate:
    from .sysfile import parse_pred

    variables = tuple(doc["variables"])

    def go(u):
        if "leaf" in u:
            return Leaf(int(u["leaf"]), frozenset(u.get("cell", ())))
        d = u["decision"]
        if "fixed" in d:
            dec = Fixed(parse_pred(d["fixed"], variables), d.get("name", ""))
        else:
            dec = Affine(tuple(d["weights"]), d["offset"])
        return Node(dec, go(u["left"]), go(u["right"]))

    return BdtTemplate(go(doc["root"]), int(doc["dimension"]), variables, int(doc["next_node"]))
