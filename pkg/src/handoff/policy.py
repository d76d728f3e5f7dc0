"""Memoryless policies on a product MDP and exact policy evaluation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import spsolve

from .compose import ProductMdp

EVAL_RESIDUAL = 1e-10


class PolicyLeakError(ValueError):
    """A policy moves probability outside the domain it is evaluated on."""


@dataclass
class MemorylessPolicy:
    """Per-state action distributions.

    ``probs[v]`` is aligned with ``p.pairs(v)``, i.e. entry ``k`` is the
    probability of the ``k``-th enabled action of ``v``.
    """

    probs: dict

    @property
    def domain(self) -> frozenset:
        return frozenset(self.probs)

    def pair_probs(self, p: ProductMdp) -> np.ndarray:
        """Dense probabilities over all pairs; states outside the domain get zeros."""
        out = np.zeros(p.n_pairs)
        for v, row in self.probs.items():
            out[p.sa_start[v]:p.sa_start[v + 1]] = row
        return out

    def support(self, p: ProductMdp, v: int) -> list[int]:
        return [int(p.sa_start[v] + k) for k in np.flatnonzero(self.probs[v] > 0)]

    def actions(self, p: ProductMdp, v: int) -> dict:
        return {p.actions[v][k]: float(q) for k, q in enumerate(self.probs[v]) if q > 0}

    def best_action(self, p: ProductMdp, v: int):
        """Most likely action; the first declared one on ties."""
        return p.actions[v][int(np.argmax(self.probs[v]))]

    def is_deterministic(self, tol: float = 1e-9) -> bool:
        return all(np.max(row) >= 1.0 - tol for row in self.probs.values())

    def mixed(self, other: "MemorylessPolicy", weight: float) -> "MemorylessPolicy":
        """``(1 - weight) * self + weight * other`` on the shared domain."""
        return MemorylessPolicy({v: (1.0 - weight) * row + weight * other.probs[v] for v, row in self.probs.items()})


def deterministic(p: ProductMdp, choice: dict) -> MemorylessPolicy:
    """Policy from ``{state: pair index}``."""
    probs = {}
    for v, sa in choice.items():
        row = np.zeros(p.sa_start[v + 1] - p.sa_start[v])
        row[sa - p.sa_start[v]] = 1.0
        probs[v] = row
    return MemorylessPolicy(probs)


def uniform(p: ProductMdp, domain, pairs: dict | None = None) -> MemorylessPolicy:
    """Uniform over all enabled pairs, or over ``pairs[v]`` when given."""
    probs = {}
    for v in domain:
        row = np.zeros(p.sa_start[v + 1] - p.sa_start[v])
        if pairs is None:
            row[:] = 1.0 / len(row)
        else:
            for sa in pairs[v]:
                row[sa - p.sa_start[v]] = 1.0 / len(pairs[v])
        probs[v] = row
    return MemorylessPolicy(probs)


def from_occupancy(p: ProductMdp, domain, x: dict, floor: float = 1e-12) -> MemorylessPolicy:
    """Normalise occupancy ``x[sa]`` per state; unreached states become uniform."""
    probs = {}
    for v in domain:
        lo, hi = p.sa_start[v], p.sa_start[v + 1]
        row = np.array([max(x.get(sa, 0.0), 0.0) for sa in range(lo, hi)])
        total = row.sum()
        probs[v] = row / total if total > floor else np.full(hi - lo, 1.0 / (hi - lo))
    return MemorylessPolicy(probs)


def _chain(p: ProductMdp, domain: list[int], policy: MemorylessPolicy, rewards: np.ndarray, allow_exit: bool):
    pos = -np.ones(p.n_states, dtype=np.int64)
    pos[domain] = np.arange(len(domain))
    weights = policy.pair_probs(p)
    in_dom = np.zeros(p.n_states, dtype=bool)
    in_dom[domain] = True
    tr_weight = weights[p.tr_sa] * p.tr_prob
    tr_weight[~in_dom[p.sa_state[p.tr_sa]]] = 0.0
    live = tr_weight > 0
    exits = live & ~in_dom[p.tr_succ]
    if exits.any() and not allow_exit:
        j = int(np.flatnonzero(exits)[0])
        raise PolicyLeakError(
            f"policy leaves the domain: {p.states[p.sa_state[p.tr_sa[j]]]!r} -> {p.states[p.tr_succ[j]]!r}"
        )
    src = pos[p.sa_state[p.tr_sa[live]]]
    r = np.bincount(src, weights=tr_weight[live] * rewards[live], minlength=len(domain))
    keep = live & in_dom[p.tr_succ]
    P = csr_matrix(
        (tr_weight[keep], (pos[p.sa_state[p.tr_sa[keep]]], pos[p.tr_succ[keep]])),
        shape=(len(domain), len(domain)),
    )
    return P, r


def evaluate_policy(p: ProductMdp, domain, policy: MemorylessPolicy, rewards, gamma: float | None = None,
                    allow_exit: bool = False) -> np.ndarray:
    """Discounted value of ``policy`` on ``domain`` for per-transition ``rewards``.

    Solves ``U = r_g + gamma * P_g U`` exactly. With ``allow_exit`` the states
    outside ``domain`` are absorbing with value 0 (their entry reward still
    counts); otherwise leaving the domain raises :class:`PolicyLeakError`.
    Returns a length ``n_states`` array, zero outside ``domain``.
    """
    gamma = p.gamma if gamma is None else gamma
    domain = sorted(domain)
    rewards = np.asarray(rewards, dtype=float)
    out = np.zeros(p.n_states)
    if not domain:
        return out
    P, r = _chain(p, domain, policy, rewards, allow_exit)
    M = np.eye(len(domain)) - gamma * P.toarray() if len(domain) <= 3000 else None
    if M is not None:
        u = np.linalg.solve(M, r)
        for _ in range(3):
            resid = r - (M @ u)
            if np.abs(resid).max(initial=0.0) <= EVAL_RESIDUAL * max(1.0, np.abs(u).max(initial=0.0)):
                break
            u += np.linalg.solve(M, resid)
    else:
        from scipy.sparse import identity

        Ms = (identity(len(domain), format="csr") - gamma * P).tocsc()
        u = spsolve(Ms, r)
    out[domain] = u
    return out


def occupancy(p: ProductMdp, domain, policy: MemorylessPolicy, start: np.ndarray, gamma: float | None = None) -> dict:
    """Discounted state-action frequencies of ``policy`` from ``start`` (exits absorb)."""
    gamma = p.gamma if gamma is None else gamma
    domain = sorted(domain)
    P, _ = _chain(p, domain, policy, np.zeros(len(p.tr_prob)), allow_exit=True)
    mu = np.linalg.solve(np.eye(len(domain)) - gamma * P.toarray().T, np.asarray(start)[domain])
    x = {}
    for i, v in enumerate(domain):
        for k, q in enumerate(policy.probs[v]):
            if q > 0:
                x[int(p.sa_start[v] + k)] = mu[i] * q
    return x


def induced_irreducible(p: ProductMdp, domain, policy: MemorylessPolicy) -> bool:
    """Whether the policy's transition graph on ``domain`` is strongly connected."""
    domain = sorted(domain)
    if len(domain) <= 1:
        return True
    P, _ = _chain(p, domain, policy, np.zeros(len(p.tr_prob)), allow_exit=True)
    n_comp, _ = connected_components(P, directed=True, connection="strong")
    return n_comp == 1
