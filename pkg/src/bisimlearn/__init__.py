"""Learning stutter-insensitive bisimulations of infinite-state systems with SMT.

A decision-tree classifier over integer states, a successor map on its
classes and per-class ranking functions are synthesised by a
counterexample-guided loop; the resulting finite quotient preserves every
LTL property without the next operator.
"""

__version__ = "0.1.0"
