import numpy as np
import pytest

from idid.core import validate_frame
from idid.domains import (builtin, build_uav_grid, default_model_space, nested_model_space)

L, OL, OR = 0, 1, 2


def test_dimensions():
    t, m = builtin("tiger"), builtin("mm")
    f = t.subject_frame
    assert (f.n_states, f.n_actions, len(f.other_actions), f.n_observations) == (2, 3, 3, 6)
    assert t.other_frame.n_observations == 2
    f = m.subject_frame
    assert (f.n_states, f.n_actions, len(f.other_actions), f.n_observations) == (3, 4, 4, 2)
    assert m.other_frame.n_observations == 2


def test_tiger_tables(tiger):
    f = tiger.subject_frame
    TL = 0
    assert f.transition[TL, L, L, TL] == 1.0
    assert np.allclose(f.transition[TL, OL, L], 0.5)
    gl_s = f.observations.index("GL*S")
    assert f.observation_fn[TL, L, L, gl_s] == pytest.approx(0.85 * 0.9)
    assert f.reward[TL, OR, L] == 10
    assert f.reward[TL, OL, L] == -100


def test_tiger_observations_factor(tiger):
    f = tiger.subject_frame
    growl = np.array([[0.85, 0.15], [0.15, 0.85]])
    creak = np.array([[0.9, 0.05, 0.05], [0.05, 0.9, 0.05], [0.05, 0.05, 0.9]])
    # creak order CL, CR, S follows the other agent opening left, right, or listening
    creak_of = {L: 2, OL: 0, OR: 1}
    for s in range(2):
        for aj in range(3):
            want = np.outer(growl[s], creak[creak_of[aj]]).ravel()
            assert np.allclose(f.observation_fn[s, L, aj], want, atol=1e-12)


def test_tiger_reward_ignores_other_action(tiger):
    R = tiger.subject_frame.reward
    assert np.all(R == R[:, :, :1])


def test_mm_tables(mm):
    f = mm.subject_frame
    M, E, I = 0, 1, 2
    assert np.allclose(f.transition[0, M, M], [0.81, 0.18, 0.01])
    assert f.observation_fn[1, E, M, 1] == 0.5
    assert f.reward[2, I, I] == -5.0
    assert f.reward[0, E, M] == 1.5555


def test_mm_level0_fixes_other_action_to_m(mm):
    f0, f = mm.other_frame, mm.subject_frame
    assert np.array_equal(f0.transition, f.transition[:, :, 0, :])
    assert np.array_equal(f0.reward, f.reward[:, :, 0])


@pytest.mark.parametrize("n,states,cells", [(3, 25, 9), (5, 81, 25)])
def test_uav_sizes(n, states, cells):
    spec = build_uav_grid(n)
    assert spec.subject_frame.n_states == states
    assert spec.other_frame.n_states == cells
    assert spec.subject_frame.n_actions == 5 and spec.subject_frame.n_observations == 4
    assert validate_frame(spec.subject_frame) == [] and validate_frame(spec.other_frame) == []


def test_uav_listen_and_capture():
    spec = build_uav_grid(3)
    f = spec.subject_frame
    listen = f.actions.index("listen")
    s = f.states.index("(-1,0)")  # fugitive one row north
    row = f.observation_fn[s, listen, listen]
    assert row[0] == pytest.approx(0.8) and np.allclose(row[1:], 0.2 / 3)
    assert f.reward.max() == pytest.approx(50 * 0.67 - 5 * 0.33)
    caught = f.states.index("(0,0)")
    assert np.all(f.transition[caught, :, :, caught] == 1.0)


def test_uav_move_rows():
    f = build_uav_grid(3).other_frame
    centre = f.states.index("(1,1)")
    north = f.states.index("(0,1)")
    assert f.transition[centre, 0, north] == pytest.approx(0.67)
    assert f.transition[centre, 0].sum() == pytest.approx(1.0)
    corner = f.states.index("(2,0)")
    # off-grid slips stay put
    assert f.transition[corner, 1, corner] == pytest.approx(0.67 + 0.11)


def test_uav_unsupported_size():
    with pytest.raises(ValueError):
        build_uav_grid(4)


def test_unknown_builtin():
    with pytest.raises(ValueError):
        builtin("chess")


def test_example_model_space(tiger):
    sp = default_model_space(tiger, [0.01, 0.5, 0.05])
    assert [m.belief.probs[0] for m in sp] == [0.01, 0.5, 0.05]


def test_sampled_spaces_are_reproducible(tiger):
    a = default_model_space(tiger, 50, seed=3)
    b = default_model_space(tiger, 50, seed=3)
    assert [m.belief for m in a] == [m.belief for m in b]
    assert len({m.belief for m in a}) == 50
    assert len(default_model_space(tiger, 1, seed=8)) == 1


def test_model_space_errors(tiger):
    with pytest.raises(ValueError):
        default_model_space(tiger, [])
    with pytest.raises(ValueError):
        default_model_space(tiger, 0)


def test_level2_space(tiger):
    sp = nested_model_space(tiger, 2, [0.2, 0.7], inner=[0.5])
    assert all(m.level == 1 for m in sp)
    assert sp.models[0].other_space is sp.models[1].other_space
    with pytest.raises(ValueError):
        nested_model_space(build_uav_grid(3), 2, 2)
    with pytest.raises(ValueError):
        nested_model_space(tiger, 3, 2)
