import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bisimlearn import terms as T
from bisimlearn.cegis import (
    INFEASIBLE,
    CegisConfig,
    Counterexample,
    Dataset,
    Failed,
    LearnedBisimulation,
    Sample,
    Valid,
    bisimulation_learning,
    conditions_hold,
    ground_indicator,
    initial_samples,
    learn,
    verify,
)
from bisimlearn.sysfile import parse_system
from bisimlearn.system import Cmp, Const, Var, step
from bisimlearn.templates import (
    BdtTemplate,
    Fixed,
    Leaf,
    Node,
    ParameterAssignment,
    classify,
    compile_classifier,
    enlarge,
    rank,
)

from conftest import bundled, needs_solver

X, Y = Var(0), Var(1)
pairs = st.tuples(st.integers(-30, 30), st.integers(-30, 30))


def small_template():
    t = BdtTemplate(
        Node(Fixed(Cmp("=", X, Y), "t"), Leaf(0, frozenset({"terminated"})), Leaf(1)), 2, ("x", "y")
    )
    return enlarge(t)


def random_params(t, rng):
    cls = t.classes
    return ParameterAssignment(
        {n: rng.randint(-3, 3) for n in t.theta_names()},
        {c: rng.choice(cls) for c in cls},
        {c: ((rng.randint(-3, 3), rng.randint(-3, 3)), rng.randint(-5, 5)) for c in cls},
    )


def by_definition(t, p, s, sp):
    """Direct reading of the two conditions from the class semantics."""
    c, d = classify(t, p, s), classify(t, p, sp)
    g = p.gamma[c]
    if d != c and g != d:
        return False
    if g != c and d != g:
        return d == c and rank(p, c, s) > rank(p, c, sp) and rank(p, c, s) >= 0
    return True


class TestEncodings:
    @given(st.integers(0, 10**6), pairs, pairs)
    @settings(max_examples=300, deadline=None)
    def test_compact_and_pairwise_agree_with_definition(self, seed, s, sp):
        t = small_template()
        p = random_params(t, random.Random(seed))
        want = by_definition(t, p, s, sp)
        assert conditions_hold(t, p, s, sp, "compact") == want
        assert conditions_hold(t, p, s, sp, "pairwise") == want

    @given(st.integers(0, 10**6), pairs, pairs)
    @settings(max_examples=300, deadline=None)
    def test_indicator_agrees(self, seed, s, sp):
        t = small_template()
        p = random_params(t, random.Random(seed))
        term, aux = ground_indicator(t, Sample(s, sp), 0)
        v = p.valuation(t)
        d = classify(t, p, sp)
        v[aux] = d
        assert T.evaluate_term(term, v) == by_definition(t, p, s, sp)
        # any other value for the auxiliary class is refuted
        v[aux] = d + 1
        assert T.evaluate_term(term, v) is False


class TestData:
    def test_grid(self, euclid):
        d = initial_samples(euclid, CegisConfig())
        assert len(d) == 25
        assert (-10, 5) in d
        for smp in d:
            assert smp.successor == step(euclid, smp.state)

    def test_dedup(self):
        d = Dataset()
        assert d.add(Sample((1,), (0,)))
        assert not d.add(Sample((1,), (0,)))
        assert len(d) == 1

    @pytest.mark.parametrize(
        "kw", [dict(radius=-1), dict(stride=0), dict(max_iterations=0), dict(encoding="x"), dict(learner_encoding="y")]
    )
    def test_bad_config(self, kw):
        with pytest.raises(ValueError):
            CegisConfig(**kw)

    def test_learn_needs_samples(self):
        with pytest.raises(ValueError):
            learn(small_template(), Dataset(), CegisConfig())


@needs_solver
class TestLearnerVerifier:
    def test_learner_fits_samples(self, euclid):
        t = small_template()
        d = initial_samples(euclid, CegisConfig())
        p = learn(t, d, CegisConfig())
        assert p is not INFEASIBLE
        for smp in d:
            assert conditions_hold(t, p, smp.state, smp.successor)

    @pytest.mark.parametrize("enc", ["indicator", "encoding"])
    def test_learner_encodings_agree_on_feasibility(self, euclid, enc):
        t = small_template()
        d = initial_samples(euclid, CegisConfig())
        d.add(Sample((0, -1), step(euclid, (0, -1))))
        p = learn(t, d, CegisConfig(learner_encoding=enc))
        assert p is not INFEASIBLE
        for smp in d:
            assert conditions_hold(t, p, smp.state, smp.successor)

    def test_verifier_counterexample_is_real(self, euclid):
        t = small_template()
        cfg = CegisConfig()
        p = learn(t, initial_samples(euclid, cfg), cfg)
        res = verify(euclid, t, p, cfg)
        if isinstance(res, Counterexample):
            s = res.state
            assert not conditions_hold(t, p, s, step(euclid, s))

    def test_verifier_accepts_hand_solution(self):
        # countdown to zero: class 0 is x <= 0 (a fixpoint), class 1 stutters into it
        m = parse_system("vars x\ntransitions\n  x > 0 -> x := x - 1\n  else -> skip\nlabels\n  zero: x <= 0\n")
        zero = Fixed(Cmp("<=", X, Const(0)), "zero")
        t = BdtTemplate(Node(zero, Leaf(0, frozenset({"zero"})), Leaf(1)), 1, ("x",))
        p = ParameterAssignment({}, {0: 0, 1: 0}, {0: ((0,), 0), 1: ((1,), 0)})
        assert verify(m, t, p, CegisConfig()) == Valid()
        bad = ParameterAssignment({}, {0: 0, 1: 0}, {0: ((0,), 0), 1: ((-1,), 0)})
        assert isinstance(verify(m, t, bad, CegisConfig()), Counterexample)


@needs_solver
class TestLoop:
    def test_euclid(self, euclid):
        r = bisimulation_learning(euclid, CegisConfig())
        assert isinstance(r, LearnedBisimulation)
        f = compile_classifier(r.template, r.params)
        # the classifier is a sound partition on a box, checked pointwise
        for x in range(-15, 16):
            for y in range(-15, 16):
                s = (x, y)
                assert conditions_hold(r.template, r.params, s, step(euclid, s))
        assert f((2, 3)) == f((7, 5))
        assert f((2, 3)) != f((0, -1))
        assert r.stats.iterations >= 1
        assert r.stats.learner.queries >= r.stats.iterations

    def test_budget_exhausted(self):
        r = bisimulation_learning(bundled("fig8"), CegisConfig(max_enlargements=0))
        assert isinstance(r, Failed)
        assert r.reason == "budget exhausted"

    def test_iteration_budget(self, euclid):
        r = bisimulation_learning(euclid, CegisConfig(max_iterations=1, max_enlargements=0))
        assert isinstance(r, Failed)
        assert "budget" in r.reason

    def test_stalled_template_is_enlarged(self):
        # no linear rank works for max(x, y), yet every finite sample set fits one
        r = bisimulation_learning(bundled("disjunction-term"), CegisConfig(max_iterations=30, max_enlargements=1))
        kinds = [e["event"] for e in r.stats.events if e["event"] != "counterexample"]
        assert kinds == ["stalled", "enlarge", "stalled"]
        assert isinstance(r, Failed) and r.reason == "iteration budget exhausted"

    def test_deterministic(self, euclid):
        cfg = CegisConfig(max_enlargements=1)
        a = bisimulation_learning(euclid, cfg)
        b = bisimulation_learning(euclid, cfg)
        assert type(a) is type(b)
        assert a.stats.counterexamples == b.stats.counterexamples
