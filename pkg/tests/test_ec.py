import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from handoff.compose import ProductMdp
from handoff.ec import (
    EndComponent,
    accepting_end_components,
    accepting_states_union,
    is_end_component,
    maximal_end_components,
)
from handoff.random_models import brute_force_aecs, brute_force_mecs, random_product


def as_sets(ecs):
    return [(sorted(ec.states), {v: tuple(a) for v, a in sorted(ec.staying.items())}) for ec in ecs]


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_mecs_match_subset_enumeration(seed):
    p = random_product(np.random.default_rng(seed), max_states=6, max_actions=3)
    mecs = maximal_end_components(p)
    assert as_sets(mecs) == as_sets(brute_force_mecs(p))
    assert all(is_end_component(p, ec) for ec in mecs)
    # maximal end components are pairwise disjoint
    seen = set()
    for ec in mecs:
        assert not seen & ec.states
        seen |= ec.states


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_aecs_match_subset_enumeration(seed):
    p = random_product(np.random.default_rng(seed), max_states=6, max_actions=3, max_pairs=3)
    aecs = accepting_end_components(p)
    assert as_sets(aecs) == as_sets(brute_force_aecs(p))
    for ec in aecs:
        assert any(not (ec.states & j) and ec.states & k for j, k in p.acceptance)


def chain(n, loop_last=True):
    t = {(i, "go"): {i + 1: 1.0} for i in range(n - 1)}
    t[(n - 1, "go")] = {n - 1: 1.0} if loop_last else {0: 1.0}
    return t


def test_absorbing_state_is_mec():
    p = ProductMdp.from_dict(chain(3), {0: 1.0}, 0.9, acceptance=[((), (2,))])
    assert as_sets(maximal_end_components(p)) == [([2], {2: (2,)})]
    assert accepting_states_union(accepting_end_components(p)) == {2}


def test_j_state_excludes_component():
    p = ProductMdp.from_dict(chain(3, loop_last=False), {0: 1.0}, 0.9, acceptance=[((1,), (0,))])
    assert [sorted(ec.states) for ec in maximal_end_components(p)] == [[0, 1, 2]]
    assert accepting_end_components(p) == []


def test_component_without_k_is_not_accepting():
    p = ProductMdp.from_dict(chain(2), {0: 1.0}, 0.9, acceptance=[((), (0,))])
    assert accepting_end_components(p) == []


def test_leaving_pair_is_dropped():
    t = {(0, "stay"): {0: 1.0}, (0, "risk"): {0: 0.5, 1: 0.5}, (1, "stay"): {1: 1.0}}
    p = ProductMdp.from_dict(t, {0: 1.0}, 0.9, acceptance=[((), (0, 1))])
    mecs = maximal_end_components(p)
    assert as_sets(mecs) == [([0], {0: (0,)}), ([1], {1: (2,)})]


def test_same_states_from_two_pairs_merge():
    t = {(0, "a"): {1: 1.0}, (1, "a"): {0: 1.0}}
    p = ProductMdp.from_dict(t, {0: 1.0}, 0.9, acceptance=[((), (0,)), ((), (1,))])
    aecs = accepting_end_components(p)
    assert len(aecs) == 1 and aecs[0].states == {0, 1}


def test_is_end_component_rejects_open_set():
    p = ProductMdp.from_dict(chain(3), {0: 1.0}, 0.9)
    assert not is_end_component(p, EndComponent(frozenset({0, 1}), {0: (0,), 1: (1,)}))
    assert not is_end_component(p, EndComponent(frozenset(), {}))
