import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from idid.core import ActionDistribution, InteractiveBelief, ModCPT, Model, ModelSpace
from idid.domains import builtin, default_model_space
from idid.equivalence import (MissingTreeError, UnreachableClassError, ae_mod_cpt, ae_partition,
                              aggregate_belief_be, epsilon_neighbor, group_be, mc_cluster)
from idid.level0 import opt_action_set, solve_policy_tree
from idid.policy_tree import PolicyTree


def _space(beliefs):
    return default_model_space(builtin("tiger"), beliefs)


def _trees(space, T):
    return {m.id: solve_policy_tree(m, T)[0] for m in space}


def test_example_models_are_behaviorally_equal():
    sp = _space([0.01, 0.5, 0.05])
    p = group_be(sp, _trees(sp, 3))
    assert p.classes == ((0, 2), (1,)) and p.representatives == (0, 1)
    assert p.minimal_space(sp).ids == (0, 1)


def test_identical_models_form_one_class():
    sp = _space([0.3, 0.3, 0.3])
    assert len(group_be(sp, _trees(sp, 2))) == 1


def test_distinct_trees_are_singletons():
    sp = ModelSpace(tuple(Model([0.5, 0.5], builtin("tiger").other_frame, 0, k) for k in range(3)))
    p = group_be(sp, {0: PolicyTree(0), 1: PolicyTree(1), 2: PolicyTree(2)})
    assert p.classes == ((0,), (1,), (2,))


def test_missing_tree():
    sp = _space([0.3, 0.6])
    with pytest.raises(MissingTreeError):
        group_be(sp, {0: PolicyTree(0)})


def test_aggregation_sums_class_mass():
    sp = _space([0.01, 0.5, 0.05])
    p = group_be(sp, _trees(sp, 3))
    b = InteractiveBelief(np.array([[0.1, 0.3, 0.2], [0.1, 0.2, 0.1]]), (0, 1, 2))
    agg = aggregate_belief_be(b, p)
    assert agg.model_ids == (0, 1)
    assert np.allclose(agg.joint[0], [0.3, 0.3]) and np.allclose(agg.joint[1], [0.2, 0.2])


def test_aggregation_identity_and_total_mass():
    sp = _space([0.2, 0.99])
    p = group_be(sp, _trees(sp, 1))
    b = InteractiveBelief(np.array([[0.1, 0.4], [0.3, 0.2]]), (0, 1))
    assert p.classes == ((0,), (1,))
    assert np.array_equal(aggregate_belief_be(b, p).joint, b.joint)
    sp = _space([0.3, 0.6])
    p = group_be(sp, _trees(sp, 1))
    for q in (0.0, 0.25, 1.0):
        agg = aggregate_belief_be(InteractiveBelief(np.array([[q, 1 - q]]), (0, 1)), p)
        assert agg.joint.sum() == pytest.approx(1.0)


def test_aggregation_uncovered_id():
    sp = _space([0.3])
    p = group_be(sp, _trees(sp, 1))
    with pytest.raises(KeyError):
        aggregate_belief_be(InteractiveBelief(np.full((2, 2), 0.25), (0, 5)), p)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=2, max_size=7), st.integers(0, 2 ** 31))
def test_aggregation_keeps_state_marginal(ps, seed):
    sp = _space(ps)
    p = group_be(sp, _trees(sp, 2))
    rng = np.random.default_rng(seed)
    joint = rng.dirichlet(np.ones(2 * len(ps))).reshape(2, len(ps))
    agg = aggregate_belief_be(InteractiveBelief(joint, sp.ids), p)
    assert np.allclose(agg.joint.sum(axis=1), joint.sum(axis=1), atol=1e-12)


def _dist(*support, n=3):
    return ActionDistribution.uniform_over(support, n)


def test_ae_partition_groups_by_distribution():
    classes = ae_partition([0, 1, 2, 3], {0: _dist(0), 1: _dist(2), 2: _dist(0), 3: _dist(2)})
    assert [c.members for c in classes] == [(0, 2), (1, 3)]
    assert classes[0].representative == 0
    three = ae_partition([0, 1, 2], {0: _dist(0), 1: _dist(1), 2: _dist(2)}, t=1)
    assert len(three) == 3 and all(c.t == 1 for c in three)
    assert len(ae_partition([0, 1], {0: _dist(1), 1: _dist(1)})) == 1


def test_ae_partition_tolerance():
    a = ActionDistribution(np.array([0.5, 0.5, 0.0]))
    b = ActionDistribution(np.array([0.5 + 1e-12, 0.5 - 1e-12, 0.0]))
    assert len(ae_partition([0, 1], {0: a, 1: b})) == 1


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=8), st.integers(1, 3))
def test_be_classes_refine_ae_classes(ps, T):
    sp = _space(ps)
    be = group_be(sp, _trees(sp, T))
    dists = {m.id: opt_action_set(m, T) for m in sp}
    ae = ae_partition(sp, dists)
    for cls in be.classes:
        owners = {k for k, c in enumerate(ae) if set(cls) & set(c.members)}
        assert len(owners) == 1 and set(cls) <= set(ae[owners.pop()].members)
    if all(len(d.support) == 1 for d in dists.values()):
        assert len(ae) <= 3


def test_ae_rows_state_independent_mass_is_exact():
    cls = ae_partition([0, 1, 2], {0: _dist(0), 1: _dist(0), 2: _dist(0)})
    base = ModCPT.deterministic([0, 1, 2], [10, 11, 12],
                                {(0, 0, 0): 10, (1, 0, 0): 11, (2, 0, 0): 12})
    masses = np.array([0.16, 0.23, 0.32])
    joint = np.outer([0.5, 0.5], masses / masses.sum())
    upd = ae_mod_cpt(cls, InteractiveBelief(joint, (0, 1, 2)), base)
    assert upd.exact
    assert np.allclose(upd.cpt.row(0, 0, 0), masses / masses.sum())


def test_ae_singleton_class_copies_row():
    cls = ae_partition([4], {4: _dist(1)})
    base = ModCPT.deterministic([4], [0, 1], {(4, 1, 0): 1, (4, 1, 1): 0})
    upd = ae_mod_cpt(cls, InteractiveBelief(np.array([[0.3], [0.7]]), (4,)), base)
    assert upd.exact
    assert np.array_equal(upd.cpt.row(0, 1, 0), [0, 1]) and np.array_equal(upd.cpt.row(0, 1, 1), [1, 0])


def test_ae_unreachable_class():
    cls = ae_partition([0, 1], {0: _dist(0), 1: _dist(2)})
    base = ModCPT.deterministic([0, 1], [0], {(0, 0, 0): 0, (1, 2, 0): 0})
    with pytest.raises(UnreachableClassError):
        ae_mod_cpt(cls, InteractiveBelief(np.array([[0.5, 0.0], [0.5, 0.0]]), (0, 1)), base)


def test_ae_zero_mass_state_is_ignored():
    cls = ae_partition([0, 1], {0: _dist(0), 1: _dist(0)})
    base = ModCPT.deterministic([0, 1], [0, 1], {(0, 0, 0): 0, (1, 0, 0): 1})
    joint = np.array([[0.25, 0.75], [0.0, 0.0]])
    upd = ae_mod_cpt(cls, InteractiveBelief(joint, (0, 1)), base)
    assert upd.exact and np.allclose(upd.cpt.row(0, 0, 0), [0.25, 0.75])


def test_epsilon_neighbor_examples():
    solved = [[0.25, 0.75], [0.80, 0.20]]
    assert epsilon_neighbor([0.30, 0.70], solved, 0.1) == 0
    assert epsilon_neighbor([0.30, 0.70], solved, 0.0) is None
    assert epsilon_neighbor([0.80, 0.20], solved, 0.0) == 1
    assert epsilon_neighbor([0.5, 0.5], [], 1.0) is None
    with pytest.raises(ValueError):
        epsilon_neighbor([0.5, 0.5], solved, -1)


def test_epsilon_neighbor_ties_take_lowest_index():
    assert epsilon_neighbor([0.5, 0.5], [[0.4, 0.6], [0.6, 0.4]], 0.5) == 0


def test_mc_identity_when_k_is_full():
    sp = _space([0.1, 0.4, 0.9])
    c = mc_cluster(sp, 3, seed=1)
    assert c.space.ids == sp.ids and c.partition.classes == ((0,), (1,), (2,))


def test_mc_two_tight_clusters():
    sp = _space([0.10, 0.11, 0.15, 0.90, 0.96, 0.97])
    c = mc_cluster(sp, 2, seed=0)
    assert c.partition.classes == ((0, 1, 2), (3, 4, 5))
    # cluster means 0.12 and 0.9433: the models at 0.11 and 0.96 are nearest
    assert c.space.ids == (1, 4)


def test_mc_identical_beliefs():
    sp = _space([0.4, 0.4, 0.4])
    c = mc_cluster(sp, 1, seed=3)
    assert c.space.ids == (0,) and c.partition.mass_map == {0: 0, 1: 0, 2: 0}


def test_mc_deterministic_and_checks():
    sp = default_model_space(builtin("mm"), 20, seed=2)
    assert mc_cluster(sp, 4, seed=9) == mc_cluster(sp, 4, seed=9)
    with pytest.raises(ValueError):
        mc_cluster(sp, 0)
    with pytest.raises(ValueError):
        mc_cluster(sp, 21)
