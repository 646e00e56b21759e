import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from idid.core import ImpossibleObservationError, Model
from idid.domains import builtin
from idid.level0 import (Level0Solver, alpha_vector, belief_update, opt_action_set,
                         solve_policy_tree)
from idid.policy_tree import PolicyTree
from oracles import EnumerationOracle, rollout_value

L, OL, OR = 0, 1, 2
GL, GR = 0, 1


@pytest.fixture(scope="module")
def frame():
    return builtin("tiger").other_frame


def test_update_after_listen(frame):
    assert belief_update(frame, [0.5, 0.5], L, GL).probs[0] == pytest.approx(0.85, abs=1e-12)


def test_update_after_open_is_uniform(frame):
    for p in (0.1, 0.7):
        assert np.allclose(belief_update(frame, [p, 1 - p], OL, GL).probs, 0.5)


def test_update_keeps_certainty(frame):
    assert belief_update(frame, [1.0, 0.0], L, GR).probs[0] == 1.0


def test_impossible_observation():
    from idid.core import Frame
    # noiseless sensor: in state 0 observation 1 never happens
    g = Frame("sensor", "other", ("s0", "s1"), ("look",), ("o0", "o1"),
              np.eye(2)[:, None, :], np.eye(2)[:, None, :], np.zeros((2, 1)))
    assert belief_update(g, [0.5, 0.5], 0, 1).probs[1] == 1.0
    with pytest.raises(ImpossibleObservationError):
        belief_update(g, [1.0, 0.0], 0, 1)


def test_horizon_one_values(frame):
    s = Level0Solver(frame)
    tree, v = s.solve([0.5, 0.5], 1)
    assert tree == PolicyTree(L) and v == -1
    assert np.allclose(s.q_values([0.5, 0.5], 1), [-1, -45, -45])


def test_small_belief_root_listens(frame):
    tree, _ = solve_policy_tree(Model([0.01, 0.99], frame), 3)
    assert tree.action == L


def test_horizon_two_matches_enumeration(frame):
    oracle = EnumerationOracle(frame, 2)
    tree, v = solve_policy_tree(Model([0.5, 0.5], frame), 2)
    assert v == pytest.approx(oracle.value([0.5, 0.5], 2), abs=1e-9)
    assert tree == oracle.canonical([0.5, 0.5], 2)


def test_alpha_vectors_of_leaves(frame):
    assert np.array_equal(alpha_vector(PolicyTree(L), frame), [-1, -1])
    assert np.array_equal(alpha_vector(PolicyTree(OL), frame), [-100, 10])


def test_alpha_vector_arity_mismatch(frame):
    with pytest.raises(ValueError):
        alpha_vector(PolicyTree(L, [PolicyTree(L)] * 3), frame)


@pytest.mark.parametrize("b,T", [([0.5, 0.5], 2), ([0.3, 0.7], 3), ([0.9, 0.1], 3)])
def test_alpha_matches_monte_carlo(frame, b, T):
    tree, v = solve_policy_tree(Model(b, frame), T)
    mean, se = rollout_value(tree, frame, b, 100_000, seed=17)
    assert abs(mean - v) <= 3 * se


def test_monte_carlo_on_machine_maintenance():
    f = builtin("mm").other_frame
    b = [0.6, 0.3, 0.1]
    tree, v = solve_policy_tree(Model(b, f), 3)
    mean, se = rollout_value(tree, f, b, 100_000, seed=23)
    assert abs(mean - v) <= 3 * se


def test_opt_set_singleton(frame):
    d = opt_action_set(Model([0.5, 0.5], frame), 1)
    assert d.support == (L,)


def test_opt_set_symmetric_tie():
    f = builtin("tiger").other_frame
    # rewards with listening worse than a coin-flip open make OL and OR tie at b=0.5
    from idid.core import Frame
    R = f.reward.copy()
    R[:, L] = -200
    g = Frame("tie", "other", f.states, f.actions, f.observations, f.transition, f.observation_fn, R)
    d = opt_action_set(Model([0.5, 0.5], g), 1)
    assert d.support == (OL, OR) and np.allclose(d.probs[[OL, OR]], 0.5)


def test_tie_tolerance_semantics(frame):
    from idid.core import Frame
    R = np.array([[1.0, 1.0 + 1e-12, 0.0], [1.0, 1.0 + 1e-12, 0.0]])
    g = Frame("near", "other", frame.states, frame.actions, frame.observations,
              frame.transition, frame.observation_fn, R)
    m = Model([0.5, 0.5], g)
    assert opt_action_set(m, 1).support == (0, 1)
    assert opt_action_set(m, 1, tie_tol=0.0).support == (1,)


def test_unreachable_branches_flagged():
    f = builtin("mm").other_frame
    tree, _ = solve_policy_tree(Model([1, 0, 0], f), 2)
    po = (np.array([1, 0, 0]) @ f.transition[:, tree.action]) @ f.observation_fn[:, tree.action]
    assert tree.unreachable == frozenset(int(o) for o in np.flatnonzero(po <= 1e-14))


def test_bad_horizon(frame):
    with pytest.raises(ValueError):
        Level0Solver(frame).solve([0.5, 0.5], 0)


def test_nested_frame_rejected():
    with pytest.raises(ValueError):
        Level0Solver(builtin("tiger").subject_frame)


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 1), st.integers(1, 4))
def test_value_equals_alpha_dot_belief(p, T):
    f = builtin("tiger").other_frame
    b = np.array([p, 1 - p])
    tree, v = solve_policy_tree(Model(b, f), T)
    assert abs(alpha_vector(tree, f) @ b - v) <= 1e-9
    assert tree.horizon == T


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.01, 1), min_size=3, max_size=3), st.integers(1, 3))
def test_value_growth_lower_bound(w, T):
    f = builtin("mm").other_frame
    b = np.array(w) / sum(w)
    v1 = solve_policy_tree(Model(b, f), T)[1]
    v2 = solve_policy_tree(Model(b, f), T + 1)[1]
    assert v2 >= v1 + f.reward.min() - 1e-9


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 1), st.integers(0, 2), st.integers(0, 1))
def test_update_is_a_belief(p, a, o):
    f = builtin("tiger").other_frame
    b = belief_update(f, [p, 1 - p], a, o)
    assert abs(b.probs.sum() - 1) <= 1e-9 and np.all(b.probs >= 0)
