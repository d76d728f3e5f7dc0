import numpy as np
import pytest

from handoff import lp as lpmod
from handoff.aec import build_aec_lp, solve_aec_policy, terminal_costs
from handoff.compose import ProductMdp
from handoff.ec import EndComponent, accepting_end_components
from handoff.policy import induced_irreducible
from handoff.random_models import random_product


@pytest.mark.parametrize("gamma,c", [(0.98, 5.0), (0.9, 1.0), (0.5, 3.25)])
def test_singleton_closed_form(gamma, c):
    p = ProductMdp.from_dict({(0, "loop"): {0: 1.0}}, {0: 1.0}, gamma, acceptance=[((), (0,))], cost={(0, "loop", 0): c})
    ec = accepting_end_components(p)[0]
    sol = solve_aec_policy(p, ec)
    assert sol.values[0] == pytest.approx(c / (1 - gamma), abs=1e-9)
    assert sol.objective == pytest.approx(c / (1 - gamma), abs=1e-9)


def test_cheap_loop_gets_recurrence_mix():
    t = {(0, "cheap"): {0: 1.0}, (0, "go"): {1: 1.0}, (1, "back"): {0: 1.0}}
    cost = {(0, "cheap", 0): 1.0, (0, "go", 1): 4.0, (1, "back", 0): 4.0}
    p = ProductMdp.from_dict(t, {0: 1.0}, 0.9, acceptance=[((), (0,))], cost=cost)
    sol = solve_aec_policy(p, accepting_end_components(p)[0])
    # the uniform start already satisfies the visit floor, so the LP never leaves state 0
    assert sol.lp_policy.probs[0][1] == 0.0
    assert sol.values[0] == pytest.approx(10.0, abs=1e-9)
    assert sol.mix > 0 and induced_irreducible(p, [0, 1], sol.policy)
    assert sol.executed_values[0] > sol.values[0]


def test_visit_floor_in_lp():
    t = {(0, "a"): {1: 1.0}, (1, "a"): {0: 1.0}}
    p = ProductMdp.from_dict(t, {0: 1.0}, 0.9, acceptance=[((), (0,))])
    ec = EndComponent(frozenset({0, 1}), {0: (0,), 1: (1,)})
    prog = build_aec_lp(p, ec, {0: 0.5, 1: 0.5}, 0.1)
    assert sum(1 for con in prog.constraints if con.name[0] == "visit") == 2
    with pytest.raises(ValueError):
        build_aec_lp(p, ec, {}, 0.0)


def test_arm_terminal_cost(arm_prep):
    assert sorted(arm_prep.terminal.values.values()) == pytest.approx([250.0, 250.0], abs=1e-9)


def test_random_components_recurrent_and_bounded():
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 40:
        p = random_product(rng, max_states=5, max_actions=2)
        aecs = accepting_end_components(p)
        if not aecs:
            continue
        term = terminal_costs(p, aecs)
        cmax = p.tr_cost.max()
        for sol in term.solutions:
            states = sorted(sol.component.states)
            assert induced_irreducible(p, states, sol.policy)
            assert all(-1e-9 <= sol.values[v] <= cmax / (1 - p.gamma) + 1e-6 for v in states)
        for v, u in term.values.items():
            assert u <= min(s.values[v] for s in term.solutions if v in s.component.states) + 1e-9
        checked += 1


def test_backoff_reports_failure(monkeypatch):
    p = ProductMdp.from_dict({(0, "loop"): {0: 1.0}}, {0: 1.0}, 0.9, acceptance=[((), (0,))])
    monkeypatch.setattr(lpmod, "solve", lambda prog: lpmod.LpSolution(lpmod.INFEASIBLE))
    with pytest.raises(lpmod.SolverError):
        solve_aec_policy(p, accepting_end_components(p)[0])
