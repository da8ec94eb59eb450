import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bisimlearn.benchmarks import CASES
from bisimlearn.sysfile import (
    SystemSyntaxError,
    parse_system,
    print_system,
    system_from_json,
    system_to_json,
)
from bisimlearn.system import labels_of, step

from conftest import EUCLID_TEXT

states = st.tuples(st.integers(-40, 40), st.integers(-40, 40))


class TestParse:
    def test_euclid(self, euclid):
        assert euclid.variables == ("x", "y")
        assert euclid.proposition_names == ("terminated",)
        assert len(euclid.commands) == 3

    def test_unassigned_variables_keep_value(self):
        m = parse_system("vars a b\ntransitions\n  else -> a := a + 1\n")
        assert step(m, (1, 7)) == (2, 7)

    def test_simultaneous_assignment(self):
        m = parse_system("vars a b\ntransitions\n  else -> a := b, b := a\n")
        assert step(m, (1, 2)) == (2, 1)

    def test_operators(self):
        m = parse_system(
            "vars a\ntransitions\n  !(a >= 0) || a % 2 != 0 -> a := -a * 3\n  else -> skip\n"
            "labels\n  big: a > 10 && a <= 100\n"
        )
        assert step(m, (-2,)) == (6,)
        assert step(m, (3,)) == (-9,)
        assert step(m, (4,)) == (4,)
        assert labels_of(m, (50,)) == {"big"}

    @pytest.mark.parametrize(
        "text, line",
        [
            ("vars x\ntransitions\n  x > 0 -> x := x - 1\n", 0),  # no else
            ("vars x\ntransitions\n  else -> skip\n  x > 0 -> skip\n", 4),  # after else
            ("vars x\ntransitions\n  x >> 0 -> skip\n  else -> skip\n", 3),
            ("vars x\ntransitions\n  else -> y := 1\n", 3),
            ("transitions\n  else -> skip\n", 2),
            ("vars x x\n", 1),
            ("vars x\nlabels\n  p x > 0\n", 3),
            ("vars x\ntransitions\n  else -> x := x % 0\n", 3),
            ("vars x\ntransitions\n  else -> skip\nlabels\n  p: x > 0\n  p: x < 0\n", 6),
        ],
    )
    def test_errors_carry_line(self, text, line):
        with pytest.raises(SystemSyntaxError) as exc:
            parse_system(text)
        assert exc.value.line == line

    def test_comments_and_blank_lines(self):
        m = parse_system("# c\n\nvars x  # trailing\ntransitions\n\n  else -> skip # ok\n")
        assert m.variables == ("x",)


class TestRoundTrip:
    @given(states)
    @settings(max_examples=100)
    def test_print_parse_same_behaviour(self, s):
        for name in ("euclid-term", "tte-usf-100", "con-sf-10", "nlr-cond-term"):
            m = CASES[name].system()
            m2 = parse_system(print_system(m))
            assert step(m2, s) == step(m, s)
            assert labels_of(m2, s) == labels_of(m, s)

    @given(states)
    @settings(max_examples=100)
    def test_json_same_behaviour(self, s):
        m = parse_system(EUCLID_TEXT)
        doc = json.loads(json.dumps(system_to_json(m)))
        m2 = system_from_json(doc)
        assert step(m2, s) == step(m, s)
        assert labels_of(m2, s) == labels_of(m, s)

    def test_parse_accepts_json_text(self):
        m = parse_system(json.dumps(system_to_json(parse_system(EUCLID_TEXT))))
        assert m.name == "euclid"

    def test_json_missing_field(self):
        with pytest.raises(SystemSyntaxError):
            system_from_json({"vars": ["x"]})
