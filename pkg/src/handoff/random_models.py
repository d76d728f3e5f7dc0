"""Random product MDPs and brute-force oracles for cross-checking solvers."""

from __future__ import annotations

from itertools import combinations, product

import numpy as np

from .compose import ProductMdp
from .ec import EndComponent
from .policy import deterministic


def random_product(rng: np.random.Generator, max_states: int = 4, max_actions: int = 2,
                   gamma_range=(0.8, 0.99), max_pairs: int = 2, max_cost: float = 5.0) -> ProductMdp:
    """Random product with per-transition costs and random Rabin pairs."""
    n = int(rng.integers(1, max_states + 1))
    actions, rows, costs = [], [], []
    for v in range(n):
        k = int(rng.integers(1, max_actions + 1))
        actions.append(tuple(f"a{i}" for i in range(k)))
        rrow, crow = [], []
        for _ in range(k):
            width = int(rng.integers(1, min(3, n) + 1))
            succ = np.sort(rng.choice(n, size=width, replace=False))
            prob = rng.dirichlet(np.ones(width))
            prob[-1] = 1.0 - prob[:-1].sum()
            rrow.append([(int(s), float(q)) for s, q in zip(succ, prob)])
            crow.append([float(c) for c in np.round(rng.uniform(0, max_cost, width), 3)])
        rows.append(rrow)
        costs.append(crow)
    d0 = rng.dirichlet(np.ones(n)) if rng.random() < 0.5 else np.eye(n)[int(rng.integers(n))]
    acceptance = []
    for _ in range(int(rng.integers(1, max_pairs + 1))):
        j = {v for v in range(n) if rng.random() < 0.25}
        k = {v for v in range(n) if rng.random() < 0.4} - j
        acceptance.append((j, k))
    gamma = float(rng.uniform(*gamma_range))
    return ProductMdp([f"v{v}" for v in range(n)], actions, rows, costs, d0, gamma, acceptance)


def _all_end_components(p: ProductMdp, allowed) -> list[EndComponent]:
    out = []
    allowed = sorted(allowed)
    for r in range(1, len(allowed) + 1):
        for subset in combinations(allowed, r):
            inside = set(subset)
            staying = {v: tuple(sa for sa in p.pairs(v) if set(p.successors(sa)[0].tolist()) <= inside)
                       for v in subset}
            if not all(staying.values()):
                continue
            if _strongly_connected(p, inside, staying):
                out.append(EndComponent(frozenset(inside), staying))
    return out


def _strongly_connected(p, inside, staying) -> bool:
    adj = {v: set() for v in inside}
    for v, acts in staying.items():
        for sa in acts:
            adj[v] |= set(p.successors(sa)[0].tolist())
    start = next(iter(inside))
    for graph in (adj, {v: {u for u in inside if v in adj[u]} for v in inside}):
        seen, stack = {start}, [start]
        while stack:
            for u in graph[stack.pop()]:
                if u not in seen:
                    seen.add(u)
                    stack.append(u)
        if seen != inside:
            return False
    return True


def brute_force_mecs(p: ProductMdp, allowed=None) -> list[EndComponent]:
    """Maximal end components by enumerating every state subset."""
    allowed = range(p.n_states) if allowed is None else allowed
    ecs = _all_end_components(p, allowed)
    maximal = [ec for ec in ecs if not any(ec.states < other.states for other in ecs)]
    return sorted(maximal, key=lambda ec: sorted(ec.states))


def brute_force_aecs(p: ProductMdp) -> list[EndComponent]:
    merged: dict = {}
    for bad, good in p.acceptance:
        for ec in brute_force_mecs(p, [v for v in range(p.n_states) if v not in bad]):
            if ec.states & good:
                prev = merged.get(ec.states)
                if prev is not None:
                    ec = EndComponent(ec.states, {v: tuple(sorted(set(prev.staying[v]) | set(ec.staying[v])))
                                                  for v in ec.states})
                merged[ec.states] = ec
    return sorted(merged.values(), key=lambda ec: sorted(ec.states))


def deterministic_policies(p: ProductMdp, domain):
    """Every deterministic memoryless policy on ``domain``."""
    domain = sorted(domain)
    for choice in product(*[list(p.pairs(v)) for v in domain]):
        yield deterministic(p, dict(zip(domain, choice)))
