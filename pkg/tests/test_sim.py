import numpy as np
import pytest

from handoff.compose import ProductMdp
from handoff.pipeline import prepare
from handoff.sim import ExecutionPlan, PolicyGapError, estimate, recurrence_horizon, simulate
from handoff.policy import MemorylessPolicy


@pytest.fixture(scope="module")
def arm_plan(arm_prep):
    return ExecutionPlan.build(arm_prep.product, arm_prep.singles[0].policy, arm_prep.terminal)


def line_model(gamma=0.9, start_in_target=False):
    t = {(0, "go"): {1: 1.0}, (1, "go"): {2: 1.0}, (2, "stay"): {2: 1.0}}
    cost = {(0, "go", 1): 1.0, (1, "go", 2): 2.0, (2, "stay", 2): 3.0}
    init = {2: 1.0} if start_in_target else {0: 1.0}
    p = ProductMdp.from_dict(t, init, gamma, acceptance=[((), (2,))], cost=cost)
    prep = prepare(p)
    return prep, ExecutionPlan.build(p, prep.singles[0].policy, prep.terminal)


def test_deterministic_model_zero_variance():
    prep, plan = line_model()
    est = estimate(plan, 50, 300, seed=3)
    assert est.reach_se == 0.0 and est.cost_se == 0.0
    assert est.reach_mean == pytest.approx(0.9)  # accepted set entered on the second step
    assert est.cost_mean == pytest.approx(1 + 0.9 * 2 + 0.81 * 3 / 0.1, rel=1e-12)


def test_start_inside_accepting_set_switches_at_once():
    _, plan = line_model(start_in_target=True)
    tr = simulate(plan, 0, 10)
    assert tr.switch_index == 0 and tr.discounted_reach == 1.0


def test_horizon_must_be_positive(arm_plan):
    with pytest.raises(ValueError):
        simulate(arm_plan, 0, 0)
    with pytest.raises(ValueError):
        estimate(arm_plan, 1, 0)
    with pytest.raises(ValueError):
        estimate(arm_plan, 0, 10)


def test_seeded_determinism(arm_plan):
    assert simulate(arm_plan, 11, 50, index=4) == simulate(arm_plan, 11, 50, index=4)
    assert simulate(arm_plan, 11, 50, index=4) != simulate(arm_plan, 12, 50, index=4)


def test_simulate_matches_estimate(arm_plan):
    n, h = 40, 120
    traces = [simulate(arm_plan, 5, h, index=i) for i in range(n)]
    est = estimate(arm_plan, n, h, seed=5)
    assert est.reach_mean == pytest.approx(np.mean([t.discounted_reach for t in traces]), abs=1e-12)
    assert est.cost_mean == pytest.approx(np.mean([t.discounted_cost for t in traces]), rel=1e-12)
    assert est.switched == sum(t.switch_index is not None for t in traces)


def test_chunk_and_block_invariance(arm_plan):
    a = estimate(arm_plan, 100, 300, seed=2, chunk=7, block=13)
    b = estimate(arm_plan, 100, 300, seed=2)
    assert (a.reach_mean, a.cost_mean, a.recurrence) == (b.reach_mean, b.cost_mean, b.recurrence)


def test_estimates_in_range(arm_plan):
    est = estimate(arm_plan, 200, 500, seed=1)
    assert 0.0 <= est.reach_mean <= 1.0 and est.cost_mean >= 0.0
    assert est.reach_truncation == pytest.approx(0.98 ** 500)


def test_truncation_bound_at_default_horizon(arm_plan):
    est = estimate(arm_plan, 1, seed=0)
    assert est.horizon == 2000 and est.reach_truncation <= 2.9e-18


def test_trace_switches_to_component_policy(arm_prep, arm_plan):
    tr = simulate(arm_plan, 0, 200)
    assert tr.switch_index is not None
    after = tr.steps[tr.switch_index:]
    inside = {arm_prep.product.states[v] for v in arm_prep.accepting}
    assert all(step.state in inside for step in after)


def test_recurrence_horizon_and_suffix_visits(arm_plan):
    h = recurrence_horizon(arm_plan, 1e-6)
    assert h > 1
    est = estimate(arm_plan, 300, 1000 + h, seed=9, min_suffix=h)
    assert est.recurrent()


def test_missing_policy_row_detected():
    prep, _ = line_model()
    with pytest.raises(PolicyGapError):
        ExecutionPlan.build(prep.product, MemorylessPolicy({}), prep.terminal)
