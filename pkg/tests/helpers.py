"""Shared builders for tests."""

from idid.core import Model, uniform_interactive_belief
from idid.domains import default_model_space


def subject_model(spec, beliefs, seed=0):
    space = default_model_space(spec, beliefs, seed)
    b = uniform_interactive_belief(spec.subject_frame.n_states, space.ids)
    return Model(b, spec.subject_frame, 1, 0, space)
