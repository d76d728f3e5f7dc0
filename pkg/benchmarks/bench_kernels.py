"""Compare the compiled and pure-Python kernels on the built-in examples.

    python3 benchmarks/bench_kernels.py [--traces N] [--repeat R]
"""

import argparse
import logging
import time

import numpy as np

from handoff import kernels
from handoff.examples import arm_example, gridworld_example
from handoff.pipeline import build_product, prepare
from handoff.sim import ExecutionPlan, estimate


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def bench_vi(prep, impl, repeat):
    p = prep.product
    active = np.zeros(p.n_states, dtype=np.uint8)
    active[prep.domain] = 1
    rew = np.ascontiguousarray(prep.rewards.r2)
    return best_of(lambda: impl.value_iteration(p.sa_start, p.tr_start, p.tr_succ, p.tr_prob, rew, active,
                                                p.gamma, 1e-11, 200000), repeat)


def bench_sim(plan, impl, traces, horizon, repeat):
    return best_of(lambda: estimate(plan, traces, horizon, seed=1, backend=impl), repeat)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--traces", type=int, default=1000)
    ap.add_argument("--horizon", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    logging.getLogger("handoff").setLevel(logging.ERROR)
    impls = kernels.backends()
    if "cython" not in impls:
        print("compiled extension not built; only the Python backend is timed")
    print(f"{'example':10} {'kernel':16} " + " ".join(f"{name:>10}" for name in impls) + "   speedup")
    for name, build in (("arm", arm_example), ("gridworld", gridworld_example)):
        prep = prepare(build_product(*build()))
        plan = ExecutionPlan.build(prep.product, prep.singles[0].policy, prep.terminal)
        rows = {
            "value_iteration": {k: bench_vi(prep, impl, args.repeat) for k, impl in impls.items()},
            f"simulate x{args.traces}": {k: bench_sim(plan, impl, args.traces, args.horizon, args.repeat)
                                         for k, impl in impls.items()},
        }
        for kernel, res in rows.items():
            secs = {k: t for k, (t, _) in res.items()}
            speed = f"{secs['python'] / secs['cython']:8.1f}x" if "cython" in secs else ""
            print(f"{name:10} {kernel:16} " + " ".join(f"{secs[k]:9.4f}s" for k in impls) + "  " + speed)
        if "cython" in impls:
            a, b = rows[f"simulate x{args.traces}"]["python"][1], rows[f"simulate x{args.traces}"]["cython"][1]
            assert a.reach_mean == b.reach_mean and a.switched == b.switched, "backends disagree"


if __name__ == "__main__":
    main()
