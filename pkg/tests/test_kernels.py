import numpy as np
import pytest

from handoff import kernels
from handoff.pipeline import prepare
from handoff.random_models import random_product
from handoff.sim import ExecutionPlan, estimate

BACKENDS = kernels.backends()
needs_cython = pytest.mark.skipif("cython" not in BACKENDS, reason="compiled extension not built")


def test_python_backend_always_available():
    assert "python" in BACKENDS
    assert kernels.BACKEND in BACKENDS


def vi_inputs(seed):
    p = random_product(np.random.default_rng(seed), max_states=8, max_actions=3)
    rng = np.random.default_rng(seed + 1)
    rew = rng.normal(size=len(p.tr_prob))
    active = (rng.random(p.n_states) < 0.8).astype(np.uint8)
    return p, rew, active


@needs_cython
@pytest.mark.parametrize("seed", range(20))
def test_value_iteration_backends_agree(seed):
    p, rew, active = vi_inputs(seed)
    out = [BACKENDS[name].value_iteration(p.sa_start, p.tr_start, p.tr_succ, p.tr_prob, rew, active,
                                          p.gamma, 1e-12, 100000) for name in ("python", "cython")]
    assert np.allclose(out[0][0], out[1][0], atol=1e-11)
    assert abs(out[0][1] - out[1][1]) <= 1


@pytest.mark.parametrize("seed", range(5))
def test_value_iteration_fixed_point(seed):
    p, rew, active = vi_inputs(seed)
    v, _ = kernels.value_iteration(p.sa_start, p.tr_start, p.tr_succ, p.tr_prob, rew, active, p.gamma, 1e-12, 100000)
    cont = np.where(active[p.tr_succ] > 0, v[p.tr_succ], 0.0)
    q = np.add.reduceat(p.tr_prob * (rew + p.gamma * cont), p.tr_start[:-1])
    best = np.maximum.reduceat(q, p.sa_start[:-1])
    assert np.allclose(np.where(active > 0, best, 0.0), v, atol=1e-10)


def plan_for(seed):
    rng = np.random.default_rng(seed)
    while True:
        p = random_product(rng, max_states=6, max_actions=2)
        prep = prepare(p)
        if prep.terminal.solutions:
            return ExecutionPlan.build(p, prep.singles[0].policy, prep.terminal)


@needs_cython
@pytest.mark.parametrize("seed", range(8))
def test_simulation_backends_agree(seed):
    plan = plan_for(seed)
    a = estimate(plan, 300, 400, seed=seed, backend=BACKENDS["python"])
    b = estimate(plan, 300, 400, seed=seed, backend=BACKENDS["cython"])
    assert a.switched == b.switched and a.recurrence == b.recurrence and a.visit_totals == b.visit_totals
    assert a.reach_mean == pytest.approx(b.reach_mean, abs=1e-12)
    assert a.cost_mean == pytest.approx(b.cost_mean, rel=1e-12)
