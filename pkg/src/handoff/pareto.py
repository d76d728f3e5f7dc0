"""Stage 1: bi-objective occupancy LPs before an accepting end state is reached.

Objective 1 is the discounted probability of entering the accepting end
states, objective 2 the negated discounted attention cost including the
terminal cost charged on entry. Pareto-optimal policies come from an
augmented Tchebychev scalarisation around the ideal point.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from . import lp as lpmod
from .compose import ProductMdp
from .policy import MemorylessPolicy, deterministic, evaluate_policy, from_occupancy

log = logging.getLogger(__name__)

EPS_AUG = 1e-4
LAMBDA_FLOOR = 1e-12
TIE_TOL = 1e-10
IMPROVE_TOL = 1e-13
VI_TOL = 1e-11


class RewardError(ValueError):
    pass


@dataclass
class RewardVector:
    """Per-transition rewards aligned with ``ProductMdp.tr_*`` arrays."""

    r1: np.ndarray
    r2: np.ndarray

    def __iter__(self):
        return iter((self.r1, self.r2))


@dataclass(frozen=True)
class ValueProfile:
    u1: float
    u2: float

    def dominates(self, other: "ValueProfile", tol: float = 1e-6) -> bool:
        """Strictly better in one objective and not worse in the other, beyond ``tol``."""
        return (self.u1 > other.u1 + tol and self.u2 >= other.u2 - tol) or (
            self.u2 > other.u2 + tol and self.u1 >= other.u1 - tol
        )


def build_reward_vector(p: ProductMdp, accepting, terminal) -> RewardVector:
    """Reach indicator and negated cost, with the terminal cost charged on entry."""
    in_w = np.zeros(p.n_states, dtype=bool)
    in_w[list(accepting)] = True
    missing = [v for v in accepting if v not in terminal.values]
    if missing:
        raise RewardError(f"no terminal cost for accepting states {[p.states[v] for v in missing[:5]]}")
    term = np.zeros(p.n_states)
    for v, u in terminal.values.items():
        term[v] = u
    src_out = ~in_w[p.sa_state[p.tr_sa]]
    dst_in = in_w[p.tr_succ]
    r1 = np.where(src_out & dst_in, 1.0, 0.0)
    r2 = np.where(src_out & ~dst_in, -p.tr_cost, 0.0)
    r2 = np.where(src_out & dst_in, -term[p.tr_succ], r2)
    return RewardVector(r1, r2)


def pair_rewards(p: ProductMdp, rewards: np.ndarray) -> np.ndarray:
    """Expected one-step reward of every state-action pair."""
    return np.add.reduceat(p.tr_prob * rewards, p.tr_start[:-1])


def stage_domain(p: ProductMdp, accepting) -> list[int]:
    acc = set(accepting)
    return [v for v in range(p.n_states) if v not in acc]


def _flow_constraints(prog: lpmod.LinearProgram, p: ProductMdp, domain, start, allowed: dict):
    """Discounted flow balance over ``domain``; inflow only from domain pairs."""
    inflow = {v: {} for v in domain}
    for v in domain:
        for sa in allowed[v]:
            succ, prob = p.successors(sa)
            for v2, q in zip(succ.tolist(), prob.tolist()):
                row = inflow.get(v2)
                if row is not None:
                    row[sa] = row.get(sa, 0.0) + q
    for v in domain:
        coeffs = {sa: 1.0 for sa in allowed[v]}
        for sa, q in inflow[v].items():
            coeffs[sa] = coeffs.get(sa, 0.0) - p.gamma * q
        prog.add_constraint(coeffs, "=", float(start[v]), name=("flow", v))


def occupancy_lp(p: ProductMdp, domain, start, pair_reward: np.ndarray, allowed: dict | None = None):
    """``max sum_sa R[sa] x[sa]`` over discounted occupancies from ``start``."""
    allowed = allowed or {v: list(p.pairs(v)) for v in domain}
    prog = lpmod.LinearProgram("max")
    for v in domain:
        for sa in allowed[v]:
            prog.add_variable(sa)
    prog.set_objective({sa: float(pair_reward[sa]) for v in domain for sa in allowed[v]})
    _flow_constraints(prog, p, domain, start, allowed)
    return prog


def q_values(p: ProductMdp, rewards: np.ndarray, values: np.ndarray, domain) -> np.ndarray:
    """One-step lookahead ``Q[sa]``; successors outside ``domain`` contribute no continuation."""
    in_dom = np.zeros(p.n_states, dtype=bool)
    in_dom[list(domain)] = True
    cont = np.where(in_dom[p.tr_succ], values[p.tr_succ], 0.0)
    return np.add.reduceat(p.tr_prob * (rewards + p.gamma * cont), p.tr_start[:-1])


def _optimal_sets(p, q, values, domain, allowed, tol):
    scale = max(1.0, float(np.abs(values).max(initial=0.0)))
    out = {}
    for v in domain:
        best = max(q[sa] for sa in allowed[v])
        out[v] = [sa for sa in allowed[v] if q[sa] >= best - tol * scale]
    return out


def _solve_restricted(p, rewards, domain, allowed, tol):
    """LP optimum on the ``allowed`` pairs, polished by policy iteration."""
    start = np.zeros(p.n_states)
    start[domain] = 1.0 / len(domain)
    sol = lpmod.solve(occupancy_lp(p, domain, start, pair_rewards(p, rewards), allowed))
    if not sol.optimal:
        raise lpmod.SolverError(f"single-objective LP {sol.status}")
    policy = from_occupancy(p, domain, sol.values)
    for v in domain:
        # zero out anything the allowed set excludes (from_occupancy spans all pairs)
        mask = np.zeros_like(policy.probs[v])
        mask[[sa - p.sa_start[v] for sa in allowed[v]]] = 1.0
        row = policy.probs[v] * mask
        policy.probs[v] = row / row.sum() if row.sum() > 0 else mask / mask.sum()
    values = evaluate_policy(p, domain, policy, rewards, allow_exit=True)
    for _ in range(100):
        q = q_values(p, rewards, values, domain)
        scale = max(1.0, float(np.abs(values).max(initial=0.0)))
        if not any(max(q[sa] for sa in allowed[v]) > values[v] + IMPROVE_TOL * scale for v in domain):
            break
        greedy = {v: max(allowed[v], key=lambda sa: q[sa]) for v in domain}
        policy = deterministic(p, greedy)
        values = evaluate_policy(p, domain, policy, rewards, allow_exit=True)
    return sol, values, q_values(p, rewards, values, domain)


@dataclass
class SingleObjective:
    policy: MemorylessPolicy  # deterministic
    values: np.ndarray  # U_i(., f_i*) on the stage-1 domain
    lp_objective: float  # LP optimum under the uniform start
    vi_values: np.ndarray
    vi_gap: float
    optimal_pairs: dict


def solve_single_objective(p: ProductMdp, rewards: np.ndarray, domain, secondary: np.ndarray | None = None,
                           tol: float = TIE_TOL) -> SingleObjective:
    """Optimal deterministic policy for one reward on the stage-1 domain.

    The occupancy LP is solved from a uniform start so every state gets an
    optimal action. Ties are broken lexicographically by ``secondary`` (if
    given) and then by action declaration order. Value iteration provides an
    independent check of the values.
    """
    domain = sorted(domain)
    if not domain:
        empty = np.zeros(p.n_states)
        return SingleObjective(MemorylessPolicy({}), empty, 0.0, empty, 0.0, {})
    allowed = {v: list(p.pairs(v)) for v in domain}
    sol, values, q = _solve_restricted(p, rewards, domain, allowed, tol)
    best = _optimal_sets(p, q, values, domain, allowed, tol)
    if secondary is not None:
        _, v2, q2 = _solve_restricted(p, secondary, domain, best, tol)
        best = _optimal_sets(p, q2, v2, domain, best, tol)
    policy = deterministic(p, {v: best[v][0] for v in domain})
    values = evaluate_policy(p, domain, policy, rewards, allow_exit=True)
    active = np.zeros(p.n_states, dtype=np.uint8)
    active[domain] = 1
    vi, _ = kernels.value_iteration(p.sa_start, p.tr_start, p.tr_succ, p.tr_prob,
                                    np.ascontiguousarray(rewards, dtype=float), active, p.gamma, VI_TOL, 200000)
    gap = float(np.abs(vi[domain] - values[domain]).max())
    scale = max(1.0, float(np.abs(vi).max()))
    if gap > 1e-9 * scale:
        log.warning("LP and value iteration disagree by %.3g", gap)
    return SingleObjective(policy, values, sol.objective, vi, gap, best)


@dataclass
class ScalarizationContext:
    ideal: tuple
    nadir: tuple
    weights: tuple
    lam: tuple
    eps_aug: float = EPS_AUG

    @classmethod
    def from_points(cls, ideal, nadir, weights, eps_aug: float = EPS_AUG) -> "ScalarizationContext":
        if eps_aug <= 0:
            raise ValueError("eps_aug must be positive")
        if any(w < 0 for w in weights):
            raise ValueError("weights must be non-negative")
        lam = []
        for u_i, n_i, w_i in zip(ideal, nadir, weights):
            span = abs(u_i - n_i)
            lam.append(w_i / span if span > LAMBDA_FLOOR else w_i)
        return cls(tuple(ideal), tuple(nadir), tuple(weights), tuple(lam), eps_aug)


@dataclass
class IdealNadir:
    ideal: tuple
    nadir: tuple
    cross: np.ndarray  # cross[i, j] = sum_v D0(v) U_i(v, f_j*)


def ideal_and_nadir(p: ProductMdp, domain, singles, rewards) -> IdealNadir:
    """Ideal point from each optimum, Nadir from the state-wise worst cross value."""
    domain = sorted(domain)
    d0 = p.initial[domain]
    n = len(singles)
    table = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            if i == j:
                table[i][j] = singles[i].values
            else:
                table[i][j] = evaluate_policy(p, domain, singles[j].policy, rewards[i], allow_exit=True)
    ideal = tuple(float(d0 @ table[i][i][domain]) for i in range(n))
    nadir = tuple(float(d0 @ np.min([table[i][j][domain] for j in range(n)], axis=0)) for i in range(n))
    cross = np.array([[float(d0 @ table[i][j][domain]) for j in range(n)] for i in range(n)])
    return IdealNadir(ideal, nadir, cross)


def build_tchebychev_lp(ctx: ScalarizationContext, rewards, p: ProductMdp, accepting) -> lpmod.LinearProgram:
    """Linearised augmented Tchebychev program over stage-1 occupancies.

    ``z`` bounds every weighted shortfall from the ideal point; it is kept
    non-negative since no occupancy can exceed the ideal value.
    """
    domain = stage_domain(p, accepting)
    allowed = {v: list(p.pairs(v)) for v in domain}
    bars = [pair_rewards(p, r) for r in rewards]
    prog = lpmod.LinearProgram("min")
    pairs = [sa for v in domain for sa in allowed[v]]
    for sa in pairs:
        prog.add_variable(sa)
    prog.add_variable("z")
    obj = {"z": 1.0}
    for lam_i, bar in zip(ctx.lam, bars):
        for sa in pairs:
            obj[sa] = obj.get(sa, 0.0) - ctx.eps_aug * lam_i * float(bar[sa])
    prog.set_objective(obj)
    for i, (lam_i, u_i, bar) in enumerate(zip(ctx.lam, ctx.ideal, bars)):
        coeffs = {"z": 1.0}
        coeffs.update({sa: lam_i * float(bar[sa]) for sa in pairs if bar[sa] != 0.0})
        prog.add_constraint(coeffs, ">=", lam_i * u_i, name=("shortfall", i))
    _flow_constraints(prog, p, domain, p.initial, allowed)
    return prog


def extract_policy(p: ProductMdp, domain, x: dict) -> MemorylessPolicy:
    return from_occupancy(p, domain, x)


def evaluate_profile(p: ProductMdp, policy: MemorylessPolicy, rewards, accepting, terminal) -> ValueProfile:
    """Profile under the initial distribution, counting initial mass already accepted."""
    domain = stage_domain(p, accepting)
    u = [float(p.initial[domain] @ evaluate_policy(p, domain, policy, r, allow_exit=True)[domain]) for r in rewards]
    for v in accepting:
        u[0] += p.initial[v]
        u[1] -= p.initial[v] * terminal.values[v]
    if not -1e-9 <= u[0] <= 1.0 + 1e-9:
        raise AssertionError(f"discounted reach {u[0]} outside [0, 1]")
    return ValueProfile(u[0], u[1])


@dataclass
class ParetoPoint:
    weights: tuple
    lam: tuple
    profile: ValueProfile | None
    policy: MemorylessPolicy | None
    occupancy: dict = field(default_factory=dict)
    error: str = ""


def solve_tchebychev(p: ProductMdp, ctx: ScalarizationContext, rewards, accepting, terminal) -> ParetoPoint:
    sol = lpmod.solve(build_tchebychev_lp(ctx, rewards, p, accepting))
    if not sol.optimal:
        raise lpmod.SolverError(f"Tchebychev LP {sol.status}")
    x = {k: v for k, v in sol.values.items() if k != "z"}
    policy = extract_policy(p, stage_domain(p, accepting), x)
    profile = evaluate_profile(p, policy, rewards, accepting, terminal)
    return ParetoPoint(ctx.weights, ctx.lam, profile, policy, x)


def pareto_sweep(p: ProductMdp, rewards, accepting, terminal, points: IdealNadir, weights,
                 eps_aug: float = EPS_AUG) -> list[ParetoPoint]:
    """One Tchebychev solve per weight, sorted by the first weight.

    Solver failures are recorded on the point instead of aborting the sweep.
    """
    out = []
    for w in sorted(weights, key=lambda w: w[0]):
        if abs(sum(w) - 1.0) > 1e-9:
            raise ValueError(f"weights {w} do not sum to 1")
        ctx = ScalarizationContext.from_points(points.ideal, points.nadir, w, eps_aug)
        try:
            out.append(solve_tchebychev(p, ctx, rewards, accepting, terminal))
        except lpmod.SolverError as exc:
            log.warning("weight %s failed: %s", w, exc)
            out.append(ParetoPoint(tuple(w), ctx.lam, None, None, error=str(exc)))
    return out


def beta_grid(k: int) -> list[tuple]:
    """``k`` evenly spaced weights ``(j/(k+1), 1 - j/(k+1))``."""
    if k < 1:
        raise ValueError("grid size must be >= 1")
    return [(j / (k + 1), 1.0 - j / (k + 1)) for j in range(1, k + 1)]
