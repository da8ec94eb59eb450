import functools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bisimlearn import terms as T
from bisimlearn.cegis import INFEASIBLE, CegisConfig, Dataset, Sample, learn
from bisimlearn.symbolic import state_symbols
from bisimlearn.sysfile import parse_system
from bisimlearn.system import Cmp, Var, labels_of, step
from bisimlearn.templates import (
    Affine,
    BdtTemplate,
    Fixed,
    Leaf,
    Node,
    ParameterAssignment,
    UnboundParameter,
    UnknownClass,
    build_label_preserving_template,
    classify,
    compile_classifier,
    dump_dot,
    dump_text,
    enlarge,
    path_condition,
    rank,
    template_from_json,
    template_to_json,
)

from conftest import EUCLID_TEXT, needs_solver

X, Y = Var(0), Var(1)


def random_params(t, rng, bound=5):
    theta = {n: rng.randint(-bound, bound) for n in t.theta_names()}
    cls = t.classes
    gamma = {c: rng.choice(cls) for c in cls}
    eta = {c: (tuple(rng.randint(-bound, bound) for _ in range(t.dimension)), rng.randint(-bound, bound)) for c in cls}
    return ParameterAssignment(theta, gamma, eta)


def atom_level_euclid():
    # the three-leaf tree testing single atoms: x = y, then x > y
    return BdtTemplate(
        Node(Fixed(Cmp("=", X, Y), "t"), Leaf(0, frozenset({"terminated"})),
             Node(Fixed(Cmp(">", X, Y)), Leaf(1), Leaf(2))),
        2, ("x", "y"),
    )


@functools.cache
def euclid_with_template():
    m = parse_system(EUCLID_TEXT)
    return m, enlarge(enlarge(build_label_preserving_template(m.propositions, 0, 2, m.variables)))


@needs_solver
class TestConstruction:
    def test_euclid_fixed_layer(self, euclid):
        t = build_label_preserving_template(euclid.propositions, 0, 2, euclid.variables)
        assert len(t.classes) == 2
        assert {t.cell_of(c) for c in t.classes} == {frozenset(), frozenset({"terminated"})}

    def test_depth_adds_affine_layers(self, euclid):
        t = build_label_preserving_template(euclid.propositions, 2, 2, euclid.variables)
        assert len(t.classes) == 8
        assert len(t.affine_nodes()) == 6

    def test_empty_cells_are_pruned(self):
        props = (("a", Cmp(">", X, Y)), ("b", Cmp("<", X, Y)))
        t = build_label_preserving_template(props, 0, 2)
        # a and b are exclusive, so {a, b} never appears
        assert sorted(sorted(t.cell_of(c)) for c in t.classes) == [[], ["a"], ["b"]]

    def test_no_propositions(self):
        t = build_label_preserving_template((), 1, 3)
        assert len(t.classes) == 2 and t.dimension == 3

    def test_dimension_required(self):
        with pytest.raises(ValueError):
            build_label_preserving_template((), 0, 0)


class TestEnlarge:
    @pytest.mark.parametrize("k", [0, 1, 2, 3])
    def test_leaf_count_doubles(self, k):
        t = atom_level_euclid()
        for _ in range(k):
            t = enlarge(t)
        assert len(t.classes) == 3 * 2**k

    def test_old_classes_keep_ids_and_cells(self):
        t = atom_level_euclid()
        u = enlarge(t)
        assert set(t.classes) <= set(u.classes)
        for c in t.classes:
            assert u.cell_of(c) == t.cell_of(c)

    def test_old_class_reachable_by_same_prefix(self):
        # with every fresh split sending everything left, the old tree reappears
        rng = random.Random(0)
        t = atom_level_euclid()
        p = random_params(t, rng)
        u = enlarge(t)
        theta = {n: 0 for n in u.theta_names()}
        q = ParameterAssignment(theta, {c: c for c in u.classes}, {})
        for s in [(3, 3), (5, 1), (-2, 4), (0, 0)]:
            assert classify(u, q, s) == classify(t, p, s)

    def test_fresh_parameter_names(self):
        t = enlarge(enlarge(atom_level_euclid()))
        names = t.theta_names()
        assert len(names) == len(set(names))


class TestSemantics:
    @given(st.integers(0, 10_000), st.lists(st.tuples(st.integers(-50, 50), st.integers(-50, 50)), min_size=1, max_size=20))
    @settings(max_examples=100, deadline=None)
    def test_exactly_one_path_condition_holds(self, seed, states):
        rng = random.Random(seed)
        t = enlarge(enlarge(atom_level_euclid()))
        p = random_params(t, rng)
        syms = state_symbols(2)
        conds = {c: path_condition(t, c, syms) for c in t.classes}
        for s in states:
            v = p.valuation(t)
            v.update({sym.value: x for sym, x in zip(syms, s)})
            holding = [c for c, term in conds.items() if T.evaluate_term(term, v)]
            assert holding == [classify(t, p, s)]

    @needs_solver
    @given(st.integers(0, 10_000), st.tuples(st.integers(-50, 50), st.integers(-50, 50)),
           st.tuples(st.integers(-50, 50), st.integers(-50, 50)))
    @settings(max_examples=200, deadline=None)
    def test_label_preservation(self, seed, s, u):
        m, t = euclid_with_template()
        p = random_params(t, random.Random(seed))
        if classify(t, p, s) == classify(t, p, u):
            assert labels_of(m, s) == labels_of(m, u)

    @given(st.integers(0, 10_000), st.tuples(st.integers(-99, 99), st.integers(-99, 99)))
    @settings(max_examples=200, deadline=None)
    def test_compiled_classifier_agrees(self, seed, s):
        t = enlarge(enlarge(atom_level_euclid()))
        p = random_params(t, random.Random(seed))
        assert compile_classifier(t, p)(s) == classify(t, p, s)

    def test_tie_goes_left(self):
        t = BdtTemplate(Node(Affine(("w0", "w1"), "b"), Leaf(0), Leaf(1)), 2)
        p = ParameterAssignment({"w0": 1, "w1": 0, "b": 3}, {0: 0, 1: 1}, {})
        assert classify(t, p, (3, 0)) == 0
        assert classify(t, p, (2, 0)) == 1

    def test_unbound_parameter(self):
        t = BdtTemplate(Node(Affine(("w0",), "b"), Leaf(0), Leaf(1)), 1)
        with pytest.raises(UnboundParameter):
            classify(t, ParameterAssignment({"w0": 1}), (0,))

    def test_rank(self):
        p = ParameterAssignment({}, {0: 0}, {0: ((2, -1), 5)})
        assert rank(p, 0, (3, 4)) == 7
        with pytest.raises(UnknownClass):
            rank(p, 1, (0, 0))

    def test_gamma_must_be_total(self):
        t = atom_level_euclid()
        with pytest.raises(ValueError):
            ParameterAssignment({}, {0: 0, 1: 7, 2: 2}).check(t)


class TestSerialisation:
    def test_json_round_trip(self):
        rng = random.Random(3)
        t = enlarge(atom_level_euclid())
        p = random_params(t, rng)
        u = template_from_json(template_to_json(t))
        q = ParameterAssignment.from_json(p.to_json())
        assert u.classes == t.classes
        for s in [(1, 2), (5, 5), (-3, 7), (9, -9)]:
            assert classify(u, q, s) == classify(t, p, s)

    def test_dumps(self):
        t = enlarge(atom_level_euclid())
        p = random_params(t, random.Random(1))
        text = dump_text(t, p)
        assert text.count("class ") == 6
        assert "x = y" in text
        dot = dump_dot(t, p)
        assert dot.startswith("digraph") and dot.count("shape=box") == 6


@needs_solver
class TestAtomLevelEuclid:
    """The three-leaf atom-level tree cannot fit positive samples plus (0, -1).

    By hand: (0, -1) and (3, 1) both land in the x > y leaf.  (3, 1) runs to
    (2, 1) and stays, then (1, 1) is terminated, so the leaf's successor must
    be the terminated class and both transitions must stutter with a
    decreasing rank.  (0, -1) -> (1, -1) needs the x weight negative while
    (3, 1) -> (2, 1) needs it positive.
    """

    def samples(self, euclid, extra=()):
        # positive states whose runs never cross between the x > y and x < y leaves
        states = [(2, 1), (3, 1), (4, 1), (1, 2), (1, 3), (1, 4), (2, 2), (3, 3)] + list(extra)
        return Dataset(Sample(s, step(euclid, s)) for s in states)

    def test_positive_samples_alone_are_feasible(self, euclid):
        res = learn(atom_level_euclid(), self.samples(euclid), CegisConfig())
        assert res is not INFEASIBLE

    def test_adding_minus_one_is_infeasible(self, euclid):
        res = learn(atom_level_euclid(), self.samples(euclid, [(0, -1)]), CegisConfig())
        assert res is INFEASIBLE

    def test_hand_contradiction(self, euclid):
        # the two transitions force opposite signs on the x weight of a shared rank
        a, b = (0, -1), (3, 1)
        da = tuple(p - q for p, q in zip(a, step(euclid, a)))
        db = tuple(p - q for p, q in zip(b, step(euclid, b)))
        assert da == (-1, 0) and db == (1, 0)
