"""End-to-end two-stage synthesis."""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .aec import EPS_VISIT, RECURRENCE_MIX, TerminalCostMap, terminal_costs
from .compose import ProductMdp, compose_shared_autonomy, product_with_dra
from .ec import EndComponent, accepting_end_components, accepting_states_union
from .model import ModelError, validate_automaton, validate_cognitive, validate_mdp
from .pareto import (
    EPS_AUG,
    IdealNadir,
    ParetoPoint,
    RewardVector,
    ScalarizationContext,
    SingleObjective,
    build_reward_vector,
    evaluate_profile,
    ideal_and_nadir,
    pareto_sweep,
    solve_single_objective,
    solve_tchebychev,
    stage_domain,
)

log = logging.getLogger(__name__)


def build_product(ma, mh, att, dra) -> ProductMdp:
    """Validate the four inputs, compose them and take the product."""
    problems = []
    for tag, items in (("autonomous", validate_mdp(ma)), ("human", validate_mdp(mh)),
                       ("attention", validate_cognitive(att)), ("automaton", validate_automaton(dra))):
        problems += [f"{tag}: {msg}" for msg in items]
    if problems:
        raise ModelError("invalid inputs:\n  " + "\n  ".join(problems))
    return product_with_dra(compose_shared_autonomy(ma, mh, att), dra)


@dataclass
class Synthesis:
    """Everything that does not depend on the user's weights."""

    product: ProductMdp
    aecs: list[EndComponent]
    accepting: frozenset
    terminal: TerminalCostMap
    rewards: RewardVector
    domain: list[int]
    singles: list[SingleObjective]  # f1*, f2*
    points: IdealNadir

    def context(self, weights, eps_aug: float = EPS_AUG) -> ScalarizationContext:
        return ScalarizationContext.from_points(self.points.ideal, self.points.nadir, weights, eps_aug)

    def profile(self, policy):
        return evaluate_profile(self.product, policy, list(self.rewards), self.accepting, self.terminal)


def prepare(p: ProductMdp, eps_visit: float = EPS_VISIT, recurrence_mix: float = RECURRENCE_MIX) -> Synthesis:
    """Stage 2, rewards and both single-objective optima."""
    aecs = accepting_end_components(p)
    if not aecs:
        log.warning("no accepting end components: the specification cannot be satisfied, only cost is optimised")
    accepting = accepting_states_union(aecs)
    terminal = terminal_costs(p, aecs, eps_visit, recurrence_mix)
    rewards = build_reward_vector(p, accepting, terminal)
    domain = stage_domain(p, accepting)
    f1 = solve_single_objective(p, rewards.r1, domain, secondary=rewards.r2)
    f2 = solve_single_objective(p, rewards.r2, domain, secondary=rewards.r1)
    points = ideal_and_nadir(p, domain, [f1, f2], list(rewards))
    return Synthesis(p, aecs, accepting, terminal, rewards, domain, [f1, f2], points)


def synthesize(prep: Synthesis, weights, eps_aug: float = EPS_AUG) -> ParetoPoint:
    if any(w < 0 for w in weights) or abs(sum(weights) - 1.0) > 1e-9:
        raise ValueError(f"weights {tuple(weights)} must be non-negative and sum to 1")
    ctx = prep.context(weights, eps_aug)
    return solve_tchebychev(prep.product, ctx, list(prep.rewards), prep.accepting, prep.terminal)


def sweep(prep: Synthesis, weights, eps_aug: float = EPS_AUG) -> list[ParetoPoint]:
    return pareto_sweep(prep.product, list(prep.rewards), prep.accepting, prep.terminal, prep.points,
                        weights, eps_aug)


def two_stage_optimization(ma, mh, att, dra, weights, eps_aug: float = EPS_AUG, eps_visit: float = EPS_VISIT,
                           recurrence_mix: float = RECURRENCE_MIX):
    """Full synthesis for one weight vector; returns ``(Synthesis, ParetoPoint)``."""
    prep = prepare(build_product(ma, mh, att, dra), eps_visit, recurrence_mix)
    return prep, synthesize(prep, weights, eps_aug)
