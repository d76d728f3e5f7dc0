"""Core model types: labeled MDPs, operator cognitive models and Rabin automata."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import chain, combinations
from typing import Hashable, Iterable, Mapping

PROB_TOL = 1e-9


class ModelError(ValueError):
    """A model could not be built or combined."""


class NotFoundError(KeyError):
    """An unknown state, action or automaton state was referenced."""


def is_distribution(dist: Mapping[Hashable, float], tol: float = PROB_TOL) -> bool:
    if not dist:
        return False
    if any(p < 0 for p in dist.values()):
        return False
    return abs(sum(dist.values()) - 1.0) <= tol


def _distribution_problems(dist, where: str, support: set | None = None) -> list[str]:
    problems = []
    negative = [k for k, p in dist.items() if p < 0]
    if negative:
        problems.append(f"{where}: negative probability for {sorted(map(str, negative))}")
    total = sum(dist.values())
    if abs(total - 1.0) > PROB_TOL:
        problems.append(f"{where}: probabilities sum to {total:.12g}, expected 1")
    if support is not None:
        unknown = [k for k in dist if k not in support]
        if unknown:
            problems.append(f"{where}: unknown successor(s) {sorted(map(str, unknown))}")
    return problems


def letter(props: Iterable[str]) -> frozenset[str]:
    """Normalize a proposition collection into an automaton letter."""
    return frozenset(props)


def powerset(ap: Iterable[str]) -> list[frozenset[str]]:
    items = sorted(ap)
    return [frozenset(c) for c in chain.from_iterable(combinations(items, r) for r in range(len(items) + 1))]


@dataclass(frozen=True)
class LabeledMdp:
    """Finite labeled MDP.

    ``transitions`` maps ``(state, action)`` to a successor distribution; a
    missing key means the action is disabled at that state.
    """

    states: tuple
    actions: tuple
    initial: Mapping[Hashable, float]
    transitions: Mapping[tuple, Mapping[Hashable, float]]
    ap: frozenset = frozenset()
    labels: Mapping[Hashable, frozenset] = field(default_factory=dict)
    gamma: float = 0.95

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "actions", tuple(self.actions))
        object.__setattr__(self, "ap", frozenset(self.ap))
        object.__setattr__(self, "labels", {s: frozenset(self.labels.get(s, ())) for s in self.states})
        order = {a: i for i, a in enumerate(self.actions)}
        enabled: dict = {s: [] for s in self.states}
        for (s, a), dist in self.transitions.items():
            if s in enabled and any(p > 0 for p in dist.values()):
                enabled[s].append(a)
        object.__setattr__(
            self, "_enabled", {s: tuple(sorted(acts, key=lambda a: order.get(a, len(order)))) for s, acts in enabled.items()}
        )

    def label(self, s) -> frozenset:
        return self.labels[s]

    def enabled(self, s) -> tuple:
        """Enabled actions of ``s`` in declaration order."""
        try:
            return self._enabled[s]
        except KeyError:
            raise NotFoundError(f"unknown state {s!r}") from None


def enabled_actions(m: LabeledMdp, s) -> set:
    return set(m.enabled(s))


def validate_mdp(m: LabeledMdp) -> list[str]:
    """Return all invariant violations of ``m`` (empty list when well formed)."""
    problems = []
    states = set(m.states)
    actions = set(m.actions)
    if len(states) != len(m.states):
        problems.append("duplicate state ids")
    if not 0.0 < m.gamma < 1.0:
        problems.append(f"discount {m.gamma} outside (0,1)")
    problems += _distribution_problems(m.initial, "initial distribution", states)
    for (s, a), dist in m.transitions.items():
        where = f"transition ({s}, {a})"
        if s not in states:
            problems.append(f"{where}: unknown state {s!r}")
            continue
        if a not in actions:
            problems.append(f"{where}: unknown action {a!r}")
        problems += _distribution_problems(dist, where, states)
    for s in m.states:
        if not m.enabled(s):
            problems.append(f"state {s}: no enabled action (deadlock)")
        extra = m.labels[s] - m.ap
        if extra:
            problems.append(f"state {s}: label symbols {sorted(extra)} not in AP")
    return problems


@dataclass(frozen=True)
class CognitiveModel:
    """Operator attention model driven by request events.

    ``cost`` maps ``(h, e, h')`` to a non-negative effort; missing triples
    cost nothing.
    """

    states: tuple
    events: tuple
    initial: Mapping[Hashable, float]
    transitions: Mapping[tuple, Mapping[Hashable, float]]
    cost: Mapping[tuple, float]
    gamma: float
    takeover: frozenset

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "events", tuple(self.events))
        object.__setattr__(self, "takeover", frozenset(self.takeover))

    def step_cost(self, h, e, h2) -> float:
        return float(self.cost.get((h, e, h2), 0.0))


def validate_cognitive(c: CognitiveModel) -> list[str]:
    problems = []
    states = set(c.states)
    if not 0.0 < c.gamma < 1.0:
        problems.append(f"discount {c.gamma} outside (0,1)")
    problems += _distribution_problems(c.initial, "initial distribution", states)
    for h in c.states:
        for e in c.events:
            dist = c.transitions.get((h, e))
            if dist is None:
                problems.append(f"transition ({h}, {e}): missing (events must always be applicable)")
            else:
                problems += _distribution_problems(dist, f"transition ({h}, {e})", states)
    for key in c.transitions:
        if key[0] not in states or key[1] not in set(c.events):
            problems.append(f"transition {key}: unknown attention state or event")
    if not c.takeover:
        problems.append("takeover set is empty")
    elif not c.takeover <= states:
        problems.append(f"takeover set has unknown states {sorted(c.takeover - states)}")
    for key, value in c.cost.items():
        if not (value >= 0 and value < float("inf")):
            problems.append(f"cost {key}: {value} is not finite and non-negative")
    return problems


@dataclass(frozen=True)
class RabinAutomaton:
    """Deterministic Rabin automaton over letters ``frozenset(props)``.

    ``edges`` lists explicit ``(q, letter) -> q'`` moves; ``default`` gives
    the successor for letters not listed at ``q``.
    """

    states: tuple
    ap: frozenset
    initial: Hashable
    edges: Mapping[tuple, Hashable]
    default: Mapping[Hashable, Hashable]
    acceptance: tuple  # ((J, K), ...) as frozensets

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "ap", frozenset(self.ap))
        object.__setattr__(self, "edges", {(q, frozenset(w)): q2 for (q, w), q2 in self.edges.items()})
        object.__setattr__(
            self, "acceptance", tuple((frozenset(j), frozenset(k)) for j, k in self.acceptance)
        )

    def step(self, q, word: Iterable[str]) -> Hashable:
        w = frozenset(word)
        nxt = self.edges.get((q, w))
        if nxt is not None:
            return nxt
        if q in self.default:
            return self.default[q]
        if q not in set(self.states):
            raise NotFoundError(f"unknown automaton state {q!r}")
        raise ModelError(f"automaton has no move from {q!r} on {sorted(w)}")


def dra_step(automaton: RabinAutomaton, q, word: Iterable[str]) -> Hashable:
    if q not in automaton.states:
        raise NotFoundError(f"unknown automaton state {q!r}")
    return automaton.step(q, word)


def validate_automaton(a: RabinAutomaton) -> list[str]:
    problems = []
    states = set(a.states)
    if a.initial not in states:
        problems.append(f"initial state {a.initial!r} unknown")
    if not a.acceptance:
        problems.append("no acceptance pairs")
    for i, (j, k) in enumerate(a.acceptance):
        if not (j | k) <= states:
            problems.append(f"acceptance pair {i}: unknown states {sorted(map(str, (j | k) - states))}")
    for (q, w), q2 in a.edges.items():
        if q not in states or q2 not in states:
            problems.append(f"edge ({q}, {sorted(w)}) -> {q2}: unknown state")
        if not w <= a.ap:
            problems.append(f"edge ({q}, {sorted(w)}): letter outside alphabet")
    for q, q2 in a.default.items():
        if q not in states or q2 not in states:
            problems.append(f"default {q} -> {q2}: unknown state")
    letters = powerset(a.ap)
    for q in a.states:
        if q in a.default:
            continue
        missing = [w for w in letters if (q, w) not in a.edges]
        if missing:
            problems.append(f"state {q}: transition not total, {len(missing)} letter(s) without successor")
    return problems
