"""Monte-Carlo execution of a two-stage policy.

Seeding rule: trace ``i`` of a run with master seed ``s`` draws from
``Generator(PCG64(SeedSequence(s, spawn_key=(i,))))``. Its first uniform
picks the initial state, then every step consumes two uniforms (action,
successor). Results therefore do not depend on batch or block sizes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .aec import TerminalCostMap
from .compose import ProductMdp
from .policy import MemorylessPolicy

DEFAULT_HORIZON = 2000
CHUNK_TRACES = 1024
BLOCK_STEPS = 4096


class PolicyGapError(RuntimeError):
    """A simulated state has no action under the active policy."""


def trace_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def _padded_cdf(rows: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    width = max(len(r) for r in rows)
    cdf = np.full((len(rows), width), 2.0)
    last = np.zeros(len(rows), dtype=np.int64)
    for i, row in enumerate(rows):
        pos = np.flatnonzero(row > 0)
        last[i] = pos[-1] if pos.size else len(row) - 1
        c = np.cumsum(row)
        c[last[i]:] = 1.0
        cdf[i, :len(row)] = c
    return cdf, last


@dataclass
class ExecutionPlan:
    """Flat tables the simulation kernels run on.

    Policy 0 is the stage-1 policy; policy ``c + 1`` is the executed policy
    of component ``c`` of the terminal-cost map.
    """

    product: ProductMdp
    stage1: MemorylessPolicy
    terminal: TerminalCostMap
    pol_cdf: np.ndarray = field(repr=False, default=None)
    pol_last: np.ndarray = field(repr=False, default=None)
    tr_cdf: np.ndarray = field(repr=False, default=None)
    tr_last: np.ndarray = field(repr=False, default=None)
    init_cdf: np.ndarray = field(repr=False, default=None)
    init_last: int = 0
    switch_to: np.ndarray = field(repr=False, default=None)
    w_states: tuple = ()
    w_index: np.ndarray = field(repr=False, default=None)

    @classmethod
    def build(cls, p: ProductMdp, stage1: MemorylessPolicy, terminal: TerminalCostMap) -> "ExecutionPlan":
        policies = [stage1] + [sol.policy for sol in terminal.solutions]
        rows = []
        for k, pol in enumerate(policies):
            for v in range(p.n_states):
                width = p.sa_start[v + 1] - p.sa_start[v]
                row = pol.probs.get(v)
                if row is None:
                    row = np.full(width, np.nan)  # never consulted; checked at run time
                rows.append(np.asarray(row, dtype=float))
        defined = np.array([not np.isnan(r).any() for r in rows])
        rows = [np.where(np.isnan(r), 0.0, r) for r in rows]
        pol_cdf, pol_last = _padded_cdf(rows)
        pol_last[~defined] = -1
        tr_rows = [p.tr_prob[p.tr_start[sa]:p.tr_start[sa + 1]] for sa in range(p.n_pairs)]
        tr_cdf, tr_last = _padded_cdf(tr_rows)
        init_cdf, init_last = _padded_cdf([p.initial])
        switch_to = np.full(p.n_states, -1, dtype=np.int64)
        for v, c in terminal.component_of.items():
            switch_to[v] = c + 1
        w_states = tuple(sorted(terminal.values))
        w_index = np.full(p.n_states, -1, dtype=np.int64)
        w_index[list(w_states)] = np.arange(len(w_states))
        plan = cls(p, stage1, terminal, pol_cdf, pol_last, tr_cdf, tr_last, init_cdf[0], int(init_last[0]),
                   switch_to, w_states, w_index)
        plan._check_coverage()
        return plan

    def _check_coverage(self):
        # every state reachable under the active policy needs an action row
        p = self.product
        n = p.n_states
        for k in range(1 + len(self.terminal.solutions)):
            frontier = [v for v in np.flatnonzero(self.initial_support())] if k == 0 else \
                sorted(self.terminal.solutions[k - 1].component.states)
            seen = set(frontier)
            while frontier:
                v = frontier.pop()
                if k == 0 and self.switch_to[v] >= 0:
                    continue
                if self.pol_last[k * n + v] < 0:
                    raise PolicyGapError(f"policy {k} has no action at {p.states[v]!r}")
                row = self.pol_cdf[k * n + v]
                probs = np.diff(np.concatenate([[0.0], row[: self.pol_last[k * n + v] + 1]]))
                for off in np.flatnonzero(probs > 0):
                    succ, _ = p.successors(p.sa_start[v] + off)
                    for v2 in succ.tolist():
                        if v2 not in seen:
                            seen.add(v2)
                            frontier.append(v2)

    def initial_support(self) -> np.ndarray:
        return self.product.initial > 0

    def pick_initial(self, u: float) -> int:
        return int(min(np.count_nonzero(self.init_cdf <= u), self.init_last))

    def kernel_args(self):
        p = self.product
        return (self.pol_cdf, self.pol_last, p.sa_start, self.tr_cdf, self.tr_last, p.tr_start, p.tr_succ,
                p.tr_cost, self.switch_to, self.w_index, p.gamma)


@dataclass
class Step:
    state: object
    action: object
    mode: str
    cost: float


@dataclass
class Trace:
    steps: list
    final_state: object
    switch_index: int | None
    discounted_reach: float
    discounted_cost: float


def simulate(plan: ExecutionPlan, seed: int, horizon: int = DEFAULT_HORIZON, index: int = 0) -> Trace:
    """One trace in plain Python, identical to trace ``index`` of :func:`estimate`."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    p = plan.product
    n = p.n_states
    rng = trace_rng(seed, index)
    v = plan.pick_initial(rng.random())
    u = rng.random(2 * horizon)
    k, switch, disc, reach, cost = 0, None, 1.0, 0.0, 0.0
    steps = []
    for t in range(horizon):
        if switch is None and plan.switch_to[v] >= 0:
            switch, k = t, int(plan.switch_to[v])
            if t == 0:
                reach = 1.0
        row = k * n + v
        last = plan.pol_last[row]
        if last < 0:
            raise PolicyGapError(f"no policy action at {p.states[v]!r} (policy {k})")
        sa = int(p.sa_start[v] + min(np.count_nonzero(plan.pol_cdf[row] <= u[2 * t]), last))
        j = int(p.tr_start[sa] + min(np.count_nonzero(plan.tr_cdf[sa] <= u[2 * t + 1]), plan.tr_last[sa]))
        v2 = int(p.tr_succ[j])
        action = p.sa_action[sa]
        steps.append(Step(p.states[v], action, getattr(action, "mode", ""), float(p.tr_cost[j])))
        cost += disc * p.tr_cost[j]
        if switch is None and plan.switch_to[v2] >= 0:
            reach += disc
        disc *= p.gamma
        v = v2
    return Trace(steps, p.states[v], switch, float(reach), float(cost))


@dataclass
class Estimate:
    n_traces: int
    horizon: int
    reach_mean: float
    reach_se: float
    cost_mean: float
    cost_se: float
    reach_truncation: float  # bound on discounted reach beyond the horizon
    cost_truncation: float
    switched: int  # traces that entered an accepting end state
    min_suffix: int
    recurrence: dict = field(default_factory=dict)  # component -> (checked, all states visited)
    visit_totals: dict = field(default_factory=dict)  # product state -> post-switch visits

    def recurrent(self) -> bool:
        return all(ok == checked for checked, ok in self.recurrence.values())


def estimate(plan: ExecutionPlan, n_traces: int, horizon: int = DEFAULT_HORIZON, seed: int = 0,
             min_suffix: int | None = None, chunk: int = CHUNK_TRACES, block: int = BLOCK_STEPS,
             backend=None) -> Estimate:
    """Discounted reach and cost averaged over seeded traces.

    The recurrence table counts, per component, the traces whose post-switch
    suffix is at least ``min_suffix`` steps long (default half the horizon)
    and among them those that visited every state of the component.
    """
    if n_traces < 1:
        raise ValueError("n_traces must be >= 1")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    impl = backend or kernels
    p = plan.product
    min_suffix = horizon // 2 if min_suffix is None else min_suffix
    args = plan.kernel_args()
    comps = [np.array([plan.w_index[v] for v in sorted(sol.component.states)]) for sol in plan.terminal.solutions]
    reach_all = np.zeros(n_traces)
    cost_all = np.zeros(n_traces)
    switched = 0
    table = {c: [0, 0] for c in range(len(comps))}
    totals = np.zeros(len(plan.w_states), dtype=np.int64)
    for lo in range(0, n_traces, chunk):
        ids = range(lo, min(lo + chunk, n_traces))
        gens = [trace_rng(seed, i) for i in ids]
        m = len(gens)
        v = np.array([plan.pick_initial(g.random()) for g in gens], dtype=np.int64)
        k = np.zeros(m, dtype=np.int64)
        disc = np.ones(m)
        switch = np.full(m, -1, dtype=np.int64)
        reach = np.zeros(m)
        cost = np.zeros(m)
        visits = np.zeros((m, len(plan.w_states)), dtype=np.int64)
        for t0 in range(0, horizon, block):
            steps = min(block, horizon - t0)
            u = np.stack([g.random(2 * steps) for g in gens])
            impl.simulate_block(*args, u, t0, v, k, disc, switch, reach, cost, visits)
        reach_all[lo:lo + m] = reach
        cost_all[lo:lo + m] = cost
        switched += int((switch >= 0).sum())
        totals += visits.sum(axis=0)
        for i in np.flatnonzero((switch >= 0) & (horizon - switch >= min_suffix)):
            c = int(k[i]) - 1
            table[c][0] += 1
            table[c][1] += int((visits[i, comps[c]] > 0).all())
    se = lambda x: float(x.std(ddof=1) / np.sqrt(len(x))) if len(x) > 1 else 0.0
    g_h = p.gamma ** horizon
    cmax = float(p.tr_cost.max(initial=0.0))
    return Estimate(
        n_traces, horizon, float(reach_all.mean()), se(reach_all), float(cost_all.mean()), se(cost_all),
        g_h, g_h * cmax / (1.0 - p.gamma), switched, min_suffix,
        {c: tuple(x) for c, x in table.items() if x[0]},
        {p.states[v]: int(totals[i]) for i, v in enumerate(plan.w_states)},
    )


def recurrence_horizon(plan: ExecutionPlan, miss_prob: float = 1e-9) -> int:
    """Suffix length after which every component state is visited w.p. >= 1 - ``miss_prob``.

    Exact for the executed chains: for each target state the survival
    probability of the taboo chain is driven below ``miss_prob`` from the
    worst starting state.
    """
    p = plan.product
    worst = 1
    for sol in plan.terminal.solutions:
        states = sorted(sol.component.states)
        pos = {v: i for i, v in enumerate(states)}
        P = np.zeros((len(states), len(states)))
        for v in states:
            for off, q in enumerate(sol.policy.probs[v]):
                if q <= 0:
                    continue
                succ, prob = p.successors(p.sa_start[v] + off)
                for v2, r in zip(succ.tolist(), prob.tolist()):
                    P[pos[v], pos[v2]] += q * r
        for j in range(len(states)):
            keep = [i for i in range(len(states)) if i != j]
            if not keep:
                continue
            Q = P[np.ix_(keep, keep)]
            worst = max(worst, _survival_time(Q, miss_prob))
    return worst


def _survival_time(Q: np.ndarray, eps: float) -> int:
    surv = lambda t: float((np.linalg.matrix_power(Q, t) @ np.ones(len(Q))).max())
    hi = 1
    while surv(hi) > eps:
        hi *= 2
        if hi > 1 << 40:
            raise ValueError("component chain is not recurrent")
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        lo, hi = (mid, hi) if surv(mid) > eps else (lo, mid)
    return hi
