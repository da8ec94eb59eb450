import random

import pytest

from bisimlearn.benchmarks.random_systems import embed, random_finite_system
from bisimlearn.oracle import (
    OK,
    Violation,
    class_count,
    coarsest_stutter_partition,
    divergence_sensitive,
    exhaustive_condition_check,
    exit_map,
    explicit_system,
    finite_restriction,
    from_successor_map,
    ltl_holds_concrete,
    validate_partition,
)
from bisimlearn.ltl import parse_ltl
from bisimlearn.sysfile import parse_system
from bisimlearn.system import Cmp, Const, Var, labels_of, step
from bisimlearn.templates import BdtTemplate, Fixed, Leaf, Node, ParameterAssignment

from conftest import bundled

A, B = frozenset({"a"}), frozenset()


def brute_force_coarsest(fr):
    """Naive pairwise refinement: drop related pairs whose exits differ."""
    states = list(fr.states)
    rel = {(s, t) for s in states for t in states if fr.labels[s] == fr.labels[t]}
    while True:
        block = {}
        for s in states:
            block[s] = frozenset(t for t in states if (s, t) in rel)
        ex = exit_map(fr, block)
        keep = {(s, t) for (s, t) in rel if ex[s] == ex[t]}
        if keep == rel:
            return block
        rel = keep


class TestRestriction:
    def test_countdown_box(self):
        fr = finite_restriction(bundled("fig8"), 10)
        assert set(fr.states) == {(x,) for x in range(-10, 11)}
        assert fr.successor[(5,)] == (4,)

    def test_divergent_runs_are_escaped(self):
        m = parse_system("vars x\ntransitions\n  x > 0 -> x := x + 1\n  else -> skip\n")
        fr = finite_restriction(m, 5)
        assert (3,) in fr.escaped and (3,) not in fr.states
        assert (-2,) in fr.states

    def test_partial_map(self):
        fr = from_successor_map({1: 2, 2: 3, 4: 4}, lambda s: ())
        assert fr.states == (4,)
        assert fr.escaped == {1, 2}

    def test_closure_is_enforced(self):
        with pytest.raises(ValueError):
            explicit_system({0: 1}, {0: B})


class TestPartitions:
    def test_exit_map(self):
        fr = explicit_system({0: 1, 1: 2, 2: 2}, {0: B, 1: B, 2: A})
        block = {0: "x", 1: "x", 2: "y"}
        assert exit_map(fr, block) == {0: "y", 1: "y", 2: None}

    def test_identity_partition_validates(self):
        rng = random.Random(0)
        for _ in range(50):
            fs = random_finite_system(rng, 20)
            fr = explicit_system(fs.successor, fs.labels)
            assert validate_partition(fr, lambda s: s) == OK

    def test_label_violation(self):
        fr = explicit_system({0: 0, 1: 1}, {0: A, 1: B})
        res = validate_partition(fr, lambda s: 0)
        assert isinstance(res, Violation) and res.kind == "labels"

    def test_transfer_violation(self):
        # 0 and 1 share a label but lead to differently labelled sinks
        fr = explicit_system({0: 2, 1: 3, 2: 2, 3: 3}, {0: B, 1: B, 2: A, 3: B})
        res = validate_partition(fr, lambda s: {0: 0, 1: 0, 2: 1, 3: 2}[s])
        assert isinstance(res, Violation) and res.kind == "transfer"

    def test_stuttering_is_allowed(self):
        fr = explicit_system({0: 1, 1: 2, 2: 2}, {0: B, 1: B, 2: A})
        assert validate_partition(fr, lambda s: s == 2) == OK

    def test_coarsest_against_brute_force(self):
        rng = random.Random(3)
        for _ in range(200):
            fs = random_finite_system(rng, 15)
            fr = explicit_system(fs.successor, fs.labels)
            fast = coarsest_stutter_partition(fr)
            slow = brute_force_coarsest(fr)
            for s in fr.states:
                for t in fr.states:
                    assert (fast[s] == fast[t]) == (slow[s] == slow[t])
            assert validate_partition(fr, fast.__getitem__) == OK
            assert divergence_sensitive(fr, fast.__getitem__)

    def test_divergence_sensitivity_violation(self):
        # 0 loops forever, 1 leaves; same labels and a shared class
        fr = explicit_system({0: 0, 1: 2, 2: 2}, {0: B, 1: B, 2: A})
        assert not divergence_sensitive(fr, lambda s: s == 2)

    @pytest.mark.parametrize("n", [5, 10, 20])
    def test_countdown_needs_every_state(self, n):
        m = bundled("fig8")
        succ = {(x,): step(m, (x,)) for x in range(n + 1)}
        fr = from_successor_map(succ, lambda s: labels_of(m, s))
        assert class_count(coarsest_stutter_partition(fr)) == n + 1


class TestConditions:
    def test_evaluators_agree(self):
        m = parse_system("vars x\ntransitions\n  x > 0 -> x := x - 1\n  else -> skip\nlabels\n  zero: x <= 0\n")
        t = BdtTemplate(Node(Fixed(Cmp("<=", Var(0), Const(0))), Leaf(0, frozenset({"zero"})), Leaf(1)), 1)
        good = ParameterAssignment({}, {0: 0, 1: 0}, {0: ((0,), 0), 1: ((1,), 0)})
        bad = ParameterAssignment({}, {0: 0, 1: 0}, {0: ((0,), 0), 1: ((1,), -3)})
        for ev in ("term", "compiled"):
            assert exhaustive_condition_check(m, t, good, 30, ev) == OK
            res = exhaustive_condition_check(m, t, bad, 30, ev)
            # 1 steps straight into the zero class; 2 must stutter with rank -1
            assert isinstance(res, Violation) and res.state == (2,)


class TestConcreteLtl:
    def test_embedding_preserves_runs(self):
        rng = random.Random(8)
        fs_ = [parse_ltl(x) for x in ("F p", "G p", "G F p", "F G p")]
        for _ in range(30):
            fs = random_finite_system(rng, 12)
            fr = explicit_system(fs.successor, fs.labels)
            m = embed(fs)
            emb = finite_restriction(m, fs.size)
            for s in range(fs.size):
                assert emb.successor[(s,)] == (fs.successor[s],)
                assert emb.labels[(s,)] == fs.labels[s]
            for f in fs_:
                for s in range(fs.size):
                    assert ltl_holds_concrete(fr, f, [s]) == ltl_holds_concrete(emb, f, [(s,)])
