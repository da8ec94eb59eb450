"""Random finite deterministic systems and their embedding as integer programs.

A finite system on states ``0..n-1`` becomes a one-variable program whose
step function agrees with the successor map on ``[0, n)``.  Integers below
the range step to ``0`` and integers above it step to ``n - 1``, so every
run enters the finite part after at most one step.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Mapping

from ..system import (
    FALSE,
    TRUE,
    BoolConst,
    Cmp,
    Const,
    GuardedCommand,
    Or,
    TransitionSystem,
    Var,
)

LABEL_NAMES = ("p", "q", "r")


@dataclass(frozen=True)
class FiniteSystem:
    successor: Mapping[int, int]
    labels: Mapping[int, frozenset]
    propositions: tuple[str, ...]

    @property
    def size(self) -> int:
        return len(self.successor)


def random_finite_system(
    rng: random.Random,
    max_states: int = 50,
    max_labels: int = 3,
    min_states: int = 1,
    exclusive: bool = True,
) -> FiniteSystem:
    """Uniform random successor map with random labels.

    With ``exclusive`` every state carries at most one proposition;
    otherwise each proposition holds independently with probability 1/2.
    """
    n = rng.randint(min_states, max_states)
    k = rng.randint(1, max_labels)
    props = LABEL_NAMES[:k]
    succ = {i: rng.randrange(n) for i in range(n)}
    labels = {}
    for i in range(n):
        if exclusive:
            j = rng.randrange(k + 1)
            labels[i] = frozenset([props[j]]) if j < k else frozenset()
        else:
            labels[i] = frozenset(a for a in props if rng.random() < 0.5)
    return FiniteSystem(succ, labels, props)


def _member(states) -> object:
    atoms = tuple(Cmp("=", Var(0), Const(i)) for i in sorted(states))
    if not atoms:
        return FALSE
    return atoms[0] if len(atoms) == 1 else Or(atoms)


def embed(fs: FiniteSystem, name: str = "random") -> TransitionSystem:
    n = fs.size
    x = Var(0)
    cmds = [
        GuardedCommand(Cmp("<", x, Const(0)), (Const(0),)),
        GuardedCommand(Cmp(">=", x, Const(n)), (Const(n - 1),)),
    ]
    for i in range(n):
        if fs.successor[i] != i:
            cmds.append(GuardedCommand(Cmp("=", x, Const(i)), (Const(fs.successor[i]),)))
    cmds.append(GuardedCommand(TRUE, (x,)))
    props = tuple((a, _member(s for s in range(n) if a in fs.labels[s])) for a in fs.propositions)
    return TransitionSystem(("x",), BoolConst(True), tuple(cmds), props, name)
