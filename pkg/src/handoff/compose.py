"""Shared-autonomy composition and the product with a Rabin automaton."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Hashable, Mapping, NamedTuple

import numpy as np

from .model import CognitiveModel, LabeledMdp, ModelError, PROB_TOL, RabinAutomaton

AUTONOMOUS = "A"
HUMAN = "H"


class Action(NamedTuple):
    """Composite action: who controls, which physical action, which event."""

    mode: str
    act: Hashable
    event: Hashable

    def __str__(self):
        return f"({self.act}_{self.mode},{self.event})"

    @property
    def human(self) -> bool:
        return self.mode == HUMAN


@dataclass(frozen=True)
class SharedAutonomyMdp:
    """Composite MDP over ``(s, h)`` states with an attention cost."""

    mdp: LabeledMdp
    cost: Mapping[tuple, float]
    takeover: frozenset

    def step_cost(self, v, a, v2) -> float:
        return float(self.cost.get((v, a, v2), 0.0))


def compose_shared_autonomy(ma: LabeledMdp, mh: LabeledMdp, att: CognitiveModel) -> SharedAutonomyMdp:
    """Combine autonomous and human models with the operator's attention model.

    Autonomous actions are enabled in every attention state, human actions
    only when the attention state is in the takeover set. The discount of
    ``att`` is used for the composite.
    """
    mismatches = []
    if set(ma.states) != set(mh.states):
        mismatches.append(f"state sets differ: {sorted(map(str, set(ma.states) ^ set(mh.states)))}")
    if ma.ap != mh.ap:
        mismatches.append(f"atomic propositions differ: {sorted(ma.ap ^ mh.ap)}")
    for s in set(ma.states) & set(mh.states):
        if ma.labels[s] != mh.labels[s]:
            mismatches.append(f"label of {s} differs: {sorted(ma.labels[s])} vs {sorted(mh.labels[s])}")
    d_a = {s: p for s, p in ma.initial.items() if p > 0}
    d_h = {s: p for s, p in mh.initial.items() if p > 0}
    if set(d_a) != set(d_h) or any(abs(d_a[s] - d_h[s]) > PROB_TOL for s in d_a):
        mismatches.append("initial distributions differ")
    if mismatches:
        raise ModelError("cannot compose models: " + "; ".join(mismatches))

    states = tuple((s, h) for s in ma.states for h in att.states)
    actions = tuple(
        [Action(AUTONOMOUS, a, e) for a in ma.actions for e in att.events]
        + [Action(HUMAN, a, e) for a in mh.actions for e in att.events]
    )
    transitions = {}
    cost = {}
    for s in ma.states:
        for h in att.states:
            sides = [(AUTONOMOUS, ma, ma.enabled(s))]
            if h in att.takeover:
                sides.append((HUMAN, mh, mh.enabled(s)))
            for mode, side, acts in sides:
                for a in acts:
                    row = side.transitions[(s, a)]
                    for e in att.events:
                        att_row = att.transitions[(h, e)]
                        dist = {}
                        for s2, p in row.items():
                            if p <= 0:
                                continue
                            for h2, q in att_row.items():
                                if q <= 0:
                                    continue
                                dist[(s2, h2)] = p * q
                                c = att.step_cost(h, e, h2)
                                if c:
                                    cost[((s, h), Action(mode, a, e), (s2, h2))] = c
                        transitions[((s, h), Action(mode, a, e))] = dist
    initial = {}
    for s, p in ma.initial.items():
        for h, q in att.initial.items():
            if p * q > 0:
                initial[(s, h)] = p * q
    mdp = LabeledMdp(
        states=states,
        actions=actions,
        initial=initial,
        transitions=transitions,
        ap=ma.ap,
        labels={(s, h): ma.labels[s] for (s, h) in states},
        gamma=att.gamma,
    )
    return SharedAutonomyMdp(mdp=mdp, cost=cost, takeover=att.takeover)


class ProductMdp:
    """Indexed finite MDP with per-transition costs and Rabin acceptance.

    States are numbered ``0..n-1``. State-action pairs are stored
    contiguously per state (``sa_start``), successors contiguously per pair
    (``tr_start``). This is the layout every solver and kernel works on.
    """

    def __init__(self, states, actions, rows, costs, initial, gamma, acceptance, labels=None):
        self.states = tuple(states)
        self.index = {v: i for i, v in enumerate(self.states)}
        if len(self.index) != len(self.states):
            raise ModelError("duplicate product states")
        n = len(self.states)
        self.gamma = float(gamma)
        sa_start = [0]
        sa_state, sa_action, tr_start, succ, prob, cost = [], [], [0], [], [], []
        self.actions = []
        for i in range(n):
            acts = tuple(actions[i])
            if not acts:
                raise ModelError(f"state {self.states[i]!r} has no enabled action")
            self.actions.append(acts)
            for k, a in enumerate(acts):
                sa_state.append(i)
                sa_action.append(a)
                row = rows[i][k]
                crow = costs[i][k] if costs is not None else None
                for j, (v2, p) in enumerate(row):
                    succ.append(v2)
                    prob.append(p)
                    cost.append(crow[j] if crow is not None else 0.0)
                tr_start.append(len(succ))
            sa_start.append(len(sa_state))
        self.actions = tuple(self.actions)
        self.sa_start = np.asarray(sa_start, dtype=np.int64)
        self.sa_state = np.asarray(sa_state, dtype=np.int64)
        self.sa_action = tuple(sa_action)
        self.tr_start = np.asarray(tr_start, dtype=np.int64)
        self.tr_succ = np.asarray(succ, dtype=np.int64)
        self.tr_prob = np.asarray(prob, dtype=float)
        self.tr_cost = np.asarray(cost, dtype=float)
        self.tr_sa = np.repeat(np.arange(len(sa_state)), np.diff(self.tr_start))
        self.initial = np.asarray(initial, dtype=float)
        self.acceptance = tuple((frozenset(j), frozenset(k)) for j, k in acceptance)
        self.labels = labels

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_pairs(self) -> int:
        return len(self.sa_state)

    def pairs(self, v: int) -> range:
        return range(self.sa_start[v], self.sa_start[v + 1])

    def successors(self, sa: int):
        lo, hi = self.tr_start[sa], self.tr_start[sa + 1]
        return self.tr_succ[lo:hi], self.tr_prob[lo:hi]

    def row_sums(self) -> np.ndarray:
        return np.add.reduceat(self.tr_prob, self.tr_start[:-1])

    def expected_cost(self) -> np.ndarray:
        """Expected one-step cost of every state-action pair."""
        return np.add.reduceat(self.tr_prob * self.tr_cost, self.tr_start[:-1])

    def sa_index(self, v: int, action) -> int:
        for sa in self.pairs(v):
            if self.sa_action[sa] == action:
                return sa
        raise KeyError(action)

    def transition_matrix(self):
        """Sparse ``(n_pairs, n_states)`` matrix of transition probabilities."""
        from scipy.sparse import csr_matrix

        return csr_matrix((self.tr_prob, self.tr_succ, self.tr_start), shape=(self.n_pairs, self.n_states))

    @classmethod
    def from_dict(cls, transitions, initial, gamma, acceptance=(), cost=None, labels=None):
        """Build from ``{(v, a): {v2: p}}`` with states in first-seen order."""
        order: dict = {}
        for (v, a), dist in transitions.items():
            order.setdefault(v, len(order))
            for v2 in dist:
                order.setdefault(v2, len(order))
        for v in initial:
            order.setdefault(v, len(order))
        states = list(order)
        acts = {v: [] for v in states}
        for (v, a) in transitions:
            acts[v].append(a)
        cost = cost or {}
        rows, costs = [], []
        for v in states:
            rows.append([[(order[v2], p) for v2, p in transitions[(v, a)].items() if p > 0] for a in acts[v]])
            costs.append([[float(cost.get((v, a, v2), 0.0)) for v2, p in transitions[(v, a)].items() if p > 0] for a in acts[v]])
        d0 = np.zeros(len(states))
        for v, p in initial.items():
            d0[order[v]] = p
        acc = [({order[v] for v in j if v in order}, {order[v] for v in k if v in order}) for j, k in acceptance]
        return cls(states, [acts[v] for v in states], rows, costs, d0, gamma, acc, labels)


def product_with_dra(sa: SharedAutonomyMdp, automaton: RabinAutomaton) -> ProductMdp:
    """Reachable fragment of ``sa x automaton``; states are ``(s, h, q)``."""
    m = sa.mdp
    unknown = {p for s in m.states for p in m.labels[s]} - automaton.ap
    if unknown:
        raise ModelError(f"labels use propositions outside the automaton alphabet: {sorted(unknown)}")

    index: dict = {}
    order: list = []
    queue: deque = deque()

    def visit(s, h, q):
        key = (s, h, q)
        if key not in index:
            index[key] = len(order)
            order.append(key)
            queue.append(key)
        return index[key]

    initial = {}
    for (s, h), p in sorted(m.initial.items(), key=lambda kv: m.states.index(kv[0])):
        if p > 0:
            q = automaton.step(automaton.initial, m.labels[(s, h)])
            i = visit(s, h, q)
            initial[i] = initial.get(i, 0.0) + p

    actions, rows, costs = [], [], []
    while queue:
        s, h, q = queue.popleft()
        acts = m.enabled((s, h))
        act_rows, act_costs = [], []
        for a in acts:
            row, crow = [], []
            for (s2, h2), p in m.transitions[((s, h), a)].items():
                if p <= 0:
                    continue
                q2 = automaton.step(q, m.labels[(s2, h2)])
                row.append((visit(s2, h2, q2), p))
                crow.append(sa.step_cost((s, h), a, (s2, h2)))
            act_rows.append(row)
            act_costs.append(crow)
        actions.append(acts)
        rows.append(act_rows)
        costs.append(act_costs)

    d0 = np.zeros(len(order))
    for i, p in initial.items():
        d0[i] = p
    acceptance = []
    for j, k in automaton.acceptance:
        acceptance.append(({i for i, v in enumerate(order) if v[2] in j}, {i for i, v in enumerate(order) if v[2] in k}))
    labels = [m.labels[(v[0], v[1])] for v in order]
    return ProductMdp(order, actions, rows, costs, d0, m.gamma, acceptance, labels)
