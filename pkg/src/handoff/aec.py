"""Stage 2: cheapest recurrent behaviour inside each accepting end component."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import lp as lpmod
from .compose import ProductMdp
from .ec import EndComponent
from .model import ModelError
from .policy import (
    MemorylessPolicy,
    evaluate_policy,
    from_occupancy,
    induced_irreducible,
    uniform,
)

log = logging.getLogger(__name__)

EPS_VISIT = 1e-6
RECURRENCE_MIX = 1e-3
MAX_BACKOFF = 12


def build_aec_lp(p: ProductMdp, ec: EndComponent, eta: dict, eps_visit: float) -> lpmod.LinearProgram:
    """Occupancy LP minimising discounted attention cost while staying in ``ec``.

    Variables are the staying pairs of the component; every state must keep
    a discounted visit frequency of at least ``eps_visit``.
    """
    if eps_visit <= 0:
        raise ValueError("eps_visit must be positive")
    inside = np.zeros(p.n_states, dtype=bool)
    inside[list(ec.states)] = True
    for v in ec.states:
        for sa in ec.staying.get(v, ()):
            if not inside[p.successors(sa)[0]].all():
                raise ModelError(f"pair {sa} of state {p.states[v]!r} leaves the component")
    exp_cost = p.expected_cost()
    prog = lpmod.LinearProgram("min")
    inflow: dict = {v: {} for v in ec.states}
    for v in sorted(ec.states):
        for sa in ec.staying[v]:
            prog.add_variable(sa)
            succ, prob = p.successors(sa)
            for v2, q in zip(succ.tolist(), prob.tolist()):
                inflow[v2][sa] = inflow[v2].get(sa, 0.0) + q
    prog.set_objective({sa: float(exp_cost[sa]) for v in ec.states for sa in ec.staying[v]})
    for v in sorted(ec.states):
        coeffs = {sa: 1.0 for sa in ec.staying[v]}
        for sa, q in inflow[v].items():
            coeffs[sa] = coeffs.get(sa, 0.0) - p.gamma * q
        prog.add_constraint(coeffs, "=", eta.get(v, 0.0), name=("flow", v))
        prog.add_constraint({sa: 1.0 for sa in ec.staying[v]}, ">=", eps_visit, name=("visit", v))
    return prog


@dataclass
class AecSolution:
    component: EndComponent
    lp_policy: MemorylessPolicy  # normalised LP occupancy
    policy: MemorylessPolicy  # recurrent policy actually executed
    occupancy: dict  # pair -> x, zero for pairs that can leave the component
    objective: float
    values: np.ndarray  # per-state cost of lp_policy (full length, 0 outside)
    executed_values: np.ndarray  # per-state cost of ``policy``
    eps_visit: float
    mix: float = 0.0


def solve_aec_policy(p: ProductMdp, ec: EndComponent, eps_visit: float = EPS_VISIT,
                     recurrence_mix: float = RECURRENCE_MIX) -> AecSolution:
    """Solve the component LP and derive a recurrent staying policy.

    ``eps_visit`` is divided by 10 while the LP is infeasible. When the LP
    policy does not visit the whole component recurrently, it is blended
    with the uniform staying policy using weight ``recurrence_mix``.
    """
    states = sorted(ec.states)
    eta = {v: 1.0 / len(states) for v in states}
    eps = eps_visit
    for _ in range(MAX_BACKOFF):
        sol = lpmod.solve(build_aec_lp(p, ec, eta, eps))
        if sol.optimal:
            break
        log.info("component LP %s with eps_visit=%g; retrying smaller", sol.status, eps)
        eps /= 10.0
    else:
        raise lpmod.SolverError(f"component LP infeasible down to eps_visit={eps * 10:g}")
    occ = {sa: 0.0 for v in states for sa in p.pairs(v)}
    occ.update({sa: max(x, 0.0) for sa, x in sol.values.items()})
    lp_policy = from_occupancy(p, states, occ)
    cost = p.tr_cost
    values = evaluate_policy(p, states, lp_policy, cost)
    policy, mix = lp_policy, 0.0
    if not induced_irreducible(p, states, lp_policy):
        mix = recurrence_mix
        policy = lp_policy.mixed(uniform(p, states, ec.staying), mix)
        if not induced_irreducible(p, states, policy):
            raise ModelError("staying pairs of the component are not strongly connected")
    executed = values if mix == 0.0 else evaluate_policy(p, states, policy, cost)
    return AecSolution(ec, lp_policy, policy, occ, sol.objective, values, executed, eps, mix)


@dataclass
class TerminalCostMap:
    """Best component value per accepting end state and the policy to run there."""

    values: dict = field(default_factory=dict)  # state -> U*_AEC(v)
    component_of: dict = field(default_factory=dict)  # state -> index into solutions
    solutions: list = field(default_factory=list)

    @property
    def states(self) -> frozenset:
        return frozenset(self.values)

    def policy(self, v: int) -> MemorylessPolicy:
        return self.solutions[self.component_of[v]].policy


def terminal_costs(p: ProductMdp, aecs, eps_visit: float = EPS_VISIT,
                   recurrence_mix: float = RECURRENCE_MIX) -> TerminalCostMap:
    """Per-state minimum over containing components; ties go to the lower index."""
    out = TerminalCostMap()
    for idx, ec in enumerate(aecs):
        sol = solve_aec_policy(p, ec, eps_visit, recurrence_mix)
        out.solutions.append(sol)
        for v in sorted(ec.states):
            val = float(sol.values[v])
            best = out.values.get(v)
            if best is None or val < best - 1e-9 * max(1.0, abs(best)):
                out.values[v] = val
                out.component_of[v] = idx
    return out
