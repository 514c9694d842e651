"""Two-step CMDP on which outcome-blind threshold updates overspend.

From the start, a single action leads to either a state with a genuine
cost/reward trade-off (probability 0.5) or a state where cost 1 is
unavoidable.  Any planner that keeps its threshold at 0.5 on both
branches ends up paying 0.75 in expectation.
"""

from __future__ import annotations

from ..cmdp import TabularCMDP


def cmdp_a() -> TabularCMDP:
    """The counterexample CMDP; exact dynamics included."""
    transitions = {
        "s0": {"a1": [("s2", 0.5, 0.0, 0.0), ("s3", 0.5, 0.0, 0.0)]},
        "s2": {"a4": [("s7", 1.0, 1.0, 1.0)], "a5": [("s8", 1.0, 0.0, 0.0)]},
        "s3": {"a6": [("s9", 1.0, 0.0, 1.0)]},
        "s7": {},
        "s8": {},
        "s9": {},
    }
    return TabularCMDP(transitions, initial="s0", terminals=frozenset({"s7", "s8", "s9"}))
