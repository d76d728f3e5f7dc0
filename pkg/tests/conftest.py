import logging

import pytest

from handoff.examples import arm_example, gridworld_example
from handoff.pipeline import build_product, prepare

# published arm policies, keyed by (object state, attention level)
REF_STATES = (("11", 0), ("11", 1), ("10", 0), ("10", 1), ("01", 1), ("01", 0))
REF_POLICIES = {
    "f1": ("(a_A,1)", "(b_H,1)", "(a_A,1)", "(a_H,1)", "(b_H,1)", "(b_A,1)"),
    "f2": ("(a_A,0)", None, "(a_A,0)", None, None, "(b_A,0)"),
    "fP": ("(a_A,1)", "(b_H,1)", "(a_A,0)", "(a_H,0)", "(b_H,1)", "(b_A,1)"),
}
REF_LAMBDA = (11.93, 0.02)


def arm_state(p, s, h):
    return next(v for v, st in enumerate(p.states) if st[0] == s and st[1] == h)


def policy_row(p, policy):
    """Highest-probability action (as text) at each reference state."""
    out = []
    for s, h in REF_STATES:
        v = arm_state(p, s, h)
        out.append(str(policy.best_action(p, v)) if v in policy.probs else None)
    return tuple(out)


@pytest.fixture(scope="session")
def arm_prep():
    return prepare(build_product(*arm_example()))


@pytest.fixture(scope="session")
def grid_prep():
    logging.getLogger("handoff").setLevel(logging.ERROR)
    return prepare(build_product(*gridworld_example()))
