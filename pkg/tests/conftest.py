from pathlib import Path

import pytest

from bisimlearn.benchmarks import system_path
from bisimlearn.smt import SolverConfig, solver_available
from bisimlearn.sysfile import load_system, parse_system

needs_solver = pytest.mark.skipif(not solver_available(), reason="z3 not on PATH")

SYSTEMS = Path(system_path("fig8.sys")).parent

EUCLID_TEXT = """
name euclid
vars x, y
init true
transitions
  x > y -> x := x - y
  x < y -> y := y - x
  else -> skip
labels
  terminated: x = y
"""


@pytest.fixture
def euclid():
    return parse_system(EUCLID_TEXT)


@pytest.fixture
def solver():
    return SolverConfig()


def bundled(name):
    return load_system(SYSTEMS / f"{name}.sys")


@pytest.fixture(scope="session")
def learned_euclid():
    from bisimlearn.cegis import CegisConfig, LearnedBisimulation, bisimulation_learning

    m = parse_system(EUCLID_TEXT)
    r = bisimulation_learning(m, CegisConfig())
    assert isinstance(r, LearnedBisimulation)
    return m, r
