"""Maximal and accepting end components of a product MDP."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .compose import ProductMdp


@dataclass(frozen=True)
class EndComponent:
    """State set with, per state, the pairs whose whole support stays inside."""

    states: frozenset
    staying: dict  # state index -> tuple of state-action pair indices

    def __post_init__(self):
        object.__setattr__(self, "states", frozenset(self.states))

    def sorted_states(self) -> list[int]:
        return sorted(self.states)


def _stays(p: ProductMdp, sa: int, inside: np.ndarray) -> bool:
    succ, _ = p.successors(sa)
    return bool(inside[succ].all())


def maximal_end_components(p: ProductMdp, allowed=None) -> list[EndComponent]:
    """MEC decomposition of ``p`` restricted to the ``allowed`` states.

    Repeatedly drops pairs that can leave their strongly connected
    component (or the allowed set) until nothing changes.
    """
    n = p.n_states
    alive = np.zeros(n, dtype=bool)
    alive[list(range(n)) if allowed is None else list(allowed)] = True
    pairs = {v: [sa for sa in p.pairs(v) if _stays(p, sa, alive)] for v in np.flatnonzero(alive)}
    for v in [v for v, acts in pairs.items() if not acts]:
        del pairs[v]
    while True:
        inside = np.zeros(n, dtype=bool)
        inside[list(pairs)] = True
        rows, cols = [], []
        for v, acts in pairs.items():
            for sa in acts:
                succ, _ = p.successors(sa)
                rows.extend([v] * len(succ))
                cols.extend(succ.tolist())
        graph = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
        _, comp = connected_components(graph, directed=True, connection="strong")
        changed = False
        for v in list(pairs):
            keep = [sa for sa in pairs[v] if (comp[p.successors(sa)[0]] == comp[v]).all()]
            if len(keep) != len(pairs[v]):
                changed = True
                if keep:
                    pairs[v] = keep
                else:
                    del pairs[v]
        if not changed:
            break
    groups: dict = {}
    for v in sorted(pairs):
        groups.setdefault(comp[v], []).append(v)
    result = [EndComponent(frozenset(vs), {v: tuple(pairs[v]) for v in vs}) for vs in groups.values()]
    result.sort(key=lambda ec: min(ec.states))
    return result


def accepting_end_components(p: ProductMdp) -> list[EndComponent]:
    """Maximal accepting end components, one per distinct state set."""
    merged: dict = {}
    for bad, good in p.acceptance:
        allowed = [v for v in range(p.n_states) if v not in bad]
        for ec in maximal_end_components(p, allowed):
            assert not (ec.states & bad)
            if not ec.states & good:
                continue
            if ec.states in merged:
                prev = merged[ec.states]
                staying = {v: tuple(sorted(set(prev.staying[v]) | set(ec.staying[v]))) for v in ec.states}
                merged[ec.states] = EndComponent(ec.states, staying)
            else:
                merged[ec.states] = ec
    return sorted(merged.values(), key=lambda ec: sorted(ec.states))


def accepting_states_union(aecs) -> frozenset:
    out: set = set()
    for ec in aecs:
        out |= ec.states
    return frozenset(out)


def is_end_component(p: ProductMdp, ec: EndComponent) -> bool:
    """Check closure of the staying pairs and strong connectivity."""
    if not ec.states:
        return False
    inside = np.zeros(p.n_states, dtype=bool)
    inside[list(ec.states)] = True
    rows, cols = [], []
    for v in ec.states:
        acts = ec.staying.get(v, ())
        if not acts:
            return False
        for sa in acts:
            if p.sa_state[sa] != v or not _stays(p, sa, inside):
                return False
            succ, _ = p.successors(sa)
            rows.extend([v] * len(succ))
            cols.extend(succ.tolist())
    graph = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(p.n_states, p.n_states))
    _, comp = connected_components(graph, directed=True, connection="strong")
    return len({comp[v] for v in ec.states}) == 1
