"""Benchmark problems: two-agent tiger, machine maintenance and UAV pursuit."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import Belief, Frame, InteractiveBelief, Model, ModelSpace, require_valid


@dataclass(frozen=True, eq=False)
class DomainSpec:
    """A benchmark: the subject's nested frame and the other agent's level-0 frame.

    ``shared_state`` says whether the other agent's observations are defined
    over the subject's physical state.  When it is False (UAV pursuit) the
    other agent reasons over a private state space.

    ``symmetric`` domains use the same nested tables for both agents, which is
    what a level-2 subject needs to build level-1 models of the other agent.
    """

    name: str
    subject_frame: Frame
    other_frame: Frame
    default_beliefs: tuple[tuple[float, ...], ...] = ()
    shared_state: bool = True
    symmetric: bool = True
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        require_valid(self.subject_frame)
        require_valid(self.other_frame)

    def frame(self, level: int, role: str = "subject") -> Frame:
        if level == 0:
            return self.other_frame if role == "other" else self.other_frame.with_role(role)
        return self.subject_frame if role == "subject" else self.subject_frame.with_role(role)


# ---------------------------------------------------------------- tiger

TIGER_STATES = ("TL", "TR")
TIGER_ACTIONS = ("L", "OL", "OR")
TIGER_GROWLS = ("GL", "GR")
TIGER_CREAKS = ("CL", "CR", "S")
TIGER_OBS = tuple(f"{g}*{c}" for g in TIGER_GROWLS for c in TIGER_CREAKS)
GROWL_ACCURACY = 0.85
CREAK_ACCURACY = 0.9


def _tiger_reward() -> np.ndarray:
    r = np.empty((2, 3))
    r[:, 0] = -1.0
    r[:, 1] = (-100.0, 10.0)
    r[:, 2] = (10.0, -100.0)
    return r


def _growl(s_next: int) -> np.ndarray:
    g = np.full(2, 1 - GROWL_ACCURACY)
    g[s_next] = GROWL_ACCURACY
    return g


def _creak(other_action: int) -> np.ndarray:
    # other listened -> silence, opened left -> creak left, opened right -> creak right
    c = np.full(3, (1 - CREAK_ACCURACY) / 2)
    c[{0: 2, 1: 0, 2: 1}[other_action]] = CREAK_ACCURACY
    return c


def build_tiger() -> DomainSpec:
    S, A = 2, 3
    T = np.zeros((S, A, A, S))
    O = np.zeros((S, A, A, 6))
    R = np.zeros((S, A, A))
    r1 = _tiger_reward()
    for ai in range(A):
        for aj in range(A):
            for s in range(S):
                if ai == 0 and aj == 0:
                    T[s, ai, aj, s] = 1.0
                else:
                    T[s, ai, aj] = 0.5
                R[s, ai, aj] = r1[s, ai]
                if ai == 0:
                    O[s, ai, aj] = np.outer(_growl(s), _creak(aj)).ravel()
                else:
                    O[s, ai, aj] = 1.0 / 6
    level1 = Frame("tiger", "subject", TIGER_STATES, TIGER_ACTIONS, TIGER_OBS,
                   T, O, R, other_actions=TIGER_ACTIONS)

    T0 = np.zeros((S, A, S))
    O0 = np.zeros((S, A, 2))
    for s in range(S):
        T0[s, 0, s] = 1.0
        T0[s, 1:] = 0.5
        O0[s, 0] = _growl(s)
        O0[s, 1:] = 0.5
    level0 = Frame("tiger-0", "other", TIGER_STATES, TIGER_ACTIONS, TIGER_GROWLS, T0, O0, r1)
    return DomainSpec("tiger", level1, level0,
                      default_beliefs=((0.01, 0.99), (0.05, 0.95), (0.5, 0.5),
                                       (0.15, 0.85), (0.85, 0.15), (0.95, 0.05)),
                      metadata={"creak_obs": TIGER_CREAKS})


# ------------------------------------------------------ machine maintenance

MM_STATES = ("0-fail", "1-fail", "2-fail")
MM_ACTIONS = ("M", "E", "I", "R")
MM_OBS = ("not-defective", "defective")

_MM_PRODUCE = np.array([[0.81, 0.18, 0.01],
                        [0.0, 0.9, 0.1],
                        [0.0, 0.0, 1.0]])
_MM_RESET = np.array([[1.0, 0.0, 0.0],
                      [0.95, 0.05, 0.0],
                      [0.95, 0.0, 0.05]])

# rows <a_self, a_other> in M,E,I,R order; columns 0/1/2-fail; values as printed
# (the <E,M> row reads 1.5555 where <M,E> reads 1.555)
_MM_REWARD = {
    ("M", "M"): (1.805, 0.95, 0.5),
    ("M", "E"): (1.555, 0.7, 0.25),
    ("M", "I"): (0.4025, -1.025, -2.25),
    ("M", "R"): (-1.0975, -1.525, -1.75),
    ("E", "M"): (1.5555, 0.7, 0.25),
    ("E", "E"): (1.305, 0.45, 0.0),
    ("E", "I"): (0.1525, -1.275, -2.5),
    ("E", "R"): (-1.3475, -1.775, -2.0),
    ("I", "M"): (0.4025, -1.025, -2.25),
    ("I", "E"): (0.1525, -1.275, -2.5),
    ("I", "I"): (-1.0, -3.0, -5.0),
    ("I", "R"): (-2.5, -3.5, -4.5),
    ("R", "M"): (-1.0975, -1.525, -1.75),
    ("R", "E"): (-1.3475, -1.775, -2.0),
    ("R", "I"): (-2.5, -3.5, -4.5),
    ("R", "R"): (-4.0, -4.0, -4.0),
}


def _mm_observation(a_self: str, a_other: str, s_next: int) -> tuple[float, float]:
    if a_self in "IR" or a_other in "IR":
        return (0.95, 0.05)
    if a_self == "M":
        return (0.5, 0.5)
    return ((0.75, 0.25), (0.5, 0.5), (0.25, 0.75))[s_next]


def build_machine_maintenance() -> DomainSpec:
    S, A = 3, 4
    T = np.zeros((S, A, A, S))
    O = np.zeros((S, A, A, 2))
    R = np.zeros((S, A, A))
    for ai, x in enumerate(MM_ACTIONS):
        for aj, y in enumerate(MM_ACTIONS):
            T[:, ai, aj] = _MM_PRODUCE if (x in "ME" and y in "ME") else _MM_RESET
            for s in range(S):
                O[s, ai, aj] = _mm_observation(x, y, s)
            R[:, ai, aj] = _MM_REWARD[(x, y)]
    level1 = Frame("machine-maintenance", "subject", MM_STATES, MM_ACTIONS, MM_OBS,
                   T, O, R, other_actions=MM_ACTIONS)
    # level 0: the other agent's action is fixed to M
    m = MM_ACTIONS.index("M")
    level0 = Frame("machine-maintenance-0", "other", MM_STATES, MM_ACTIONS, MM_OBS,
                   T[:, :, m, :], O[:, :, m, :], R[:, :, m])
    return DomainSpec("machine-maintenance", level1, level0,
                      default_beliefs=((1.0, 0.0, 0.0), (0.8, 0.15, 0.05), (0.5, 0.3, 0.2),
                                       (0.3, 0.4, 0.3), (0.1, 0.3, 0.6), (0.0, 0.0, 1.0)))


# ------------------------------------------------------------ UAV pursuit

UAV_ACTIONS = ("move_N", "move_S", "move_W", "move_E", "listen")
UAV_OBS = ("sense_north", "sense_south", "sense_level", "sense_found")
MOVE_SUCCESS = 0.67
SENSE_ACCURACY = 0.8
CAPTURE_REWARD = 50.0
STEP_COST = -5.0
FUGITIVE_HOME_REWARD = 50.0
FUGITIVE_STEP_COST = -1.0

_DIRS = ((-1, 0), (1, 0), (0, -1), (0, 1))  # N, S, W, E; rows grow southward


def _displacements(a: int) -> list[tuple[tuple[int, int], float]]:
    if a == 4:
        return [((0, 0), 1.0)]
    slip = (1 - MOVE_SUCCESS) / 3
    return [(d, MOVE_SUCCESS if k == a else slip) for k, d in enumerate(_DIRS)]


def _sense(dr: int, dc: int) -> int:
    if dr < 0:
        return 0
    if dr > 0:
        return 1
    return 2 if dc != 0 else 3


def _sense_row(correct: int | None) -> np.ndarray:
    if correct is None:
        return np.full(4, 0.25)
    row = np.full(4, (1 - SENSE_ACCURACY) / 3)
    row[correct] = SENSE_ACCURACY
    return row


def build_uav_grid(n: int) -> DomainSpec:
    if n not in (3, 5):
        raise ValueError(f"unsupported grid size {n}; use 3 or 5")
    span = range(-(n - 1), n)
    rel = [(dr, dc) for dr in span for dc in span]
    index = {p: k for k, p in enumerate(rel)}
    S, A = len(rel), 5
    caught = index[(0, 0)]

    T = np.zeros((S, A, A, S))
    for s, (dr, dc) in enumerate(rel):
        for ai in range(A):
            for aj in range(A):
                if s == caught:
                    T[s, ai, aj, s] = 1.0
                    continue
                for (di, pi) in _displacements(ai):
                    for (dj, pj) in _displacements(aj):
                        nxt = (dr + dj[0] - di[0], dc + dj[1] - di[1])
                        T[s, ai, aj, index.get(nxt, s)] += pi * pj
    O = np.zeros((S, A, A, 4))
    for s, (dr, dc) in enumerate(rel):
        O[s, 4, :] = _sense_row(_sense(dr, dc))
        O[s, :4, :] = 0.25
    # capture pays once on entry; the captured state is absorbing and free
    R = CAPTURE_REWARD * T[:, :, :, caught] + STEP_COST * (1 - T[:, :, :, caught])
    R[caught] = 0.0
    states = tuple(f"({dr},{dc})" for dr, dc in rel)
    subject = Frame(f"uav{n}", "subject", states, UAV_ACTIONS, UAV_OBS,
                    T, O, R, other_actions=UAV_ACTIONS)

    cells = [(r, c) for r in range(n) for c in range(n)]
    cidx = {p: k for k, p in enumerate(cells)}
    home = cidx[(0, n - 1)]  # safe house in the north-east corner
    hr, hc = cells[home]
    S0 = len(cells)
    T0 = np.zeros((S0, A, S0))
    for s, (r, c) in enumerate(cells):
        for a in range(A):
            if s == home:
                T0[s, a, s] = 1.0
                continue
            for (d, p) in _displacements(a):
                T0[s, a, cidx.get((r + d[0], c + d[1]), s)] += p
    O0 = np.zeros((S0, A, 4))
    for s, (r, c) in enumerate(cells):
        near = abs(r - hr) + abs(c - hc) <= 1
        O0[s, 4] = _sense_row(_sense(hr - r, hc - c) if near else None)
        O0[s, :4] = 0.25
    R0 = FUGITIVE_HOME_REWARD * T0[:, :, home] + FUGITIVE_STEP_COST * (1 - T0[:, :, home])
    R0[home] = 0.0
    fugitive = Frame(f"fugitive{n}", "other", tuple(f"({r},{c})" for r, c in cells),
                     UAV_ACTIONS, UAV_OBS, T0, O0, R0)
    south = tuple(1.0 / n if r == n - 1 else 0.0 for r, _ in cells)
    center = tuple(1.0 if (r, c) == (n // 2, n // 2) else 0.0 for r, c in cells)
    below_home = tuple(0.5 if (r, c) in ((1, n - 1), (1, n - 2)) else 0.0 for r, c in cells)
    return DomainSpec(f"uav{n}", subject, fugitive,
                      default_beliefs=(south, center, below_home),
                      shared_state=False, symmetric=False,
                      metadata={"relative_positions": rel, "cells": cells, "safe_house": home})


BUILDERS = {
    "tiger": build_tiger,
    "mm": build_machine_maintenance,
    "machine-maintenance": build_machine_maintenance,
    "uav3": lambda: build_uav_grid(3),
    "uav5": lambda: build_uav_grid(5),
}


def builtin(name: str) -> DomainSpec:
    try:
        return BUILDERS[name]()
    except KeyError:
        raise ValueError(f"unknown domain {name!r}; choose from {sorted(BUILDERS)}") from None


def sample_simplex(rng: np.random.Generator, n_states: int, count: int) -> np.ndarray:
    return rng.dirichlet(np.ones(n_states), size=count)


def default_model_space(spec: DomainSpec, beliefs: Sequence | int | None = None,
                        seed: int = 0) -> ModelSpace:
    """Level-0 models of the other agent, from explicit beliefs or a seeded sample."""
    frame = spec.other_frame
    if beliefs is None:
        beliefs = spec.default_beliefs
    if isinstance(beliefs, (int, np.integer)):
        if beliefs < 1:
            raise ValueError("need at least one model")
        rows = sample_simplex(np.random.default_rng(seed), frame.n_states, int(beliefs))
    else:
        rows = [np.asarray(b, dtype=float) for b in beliefs]
        if not rows:
            raise ValueError("empty belief list")
        if frame.n_states == 2:
            rows = [np.array([r.item(), 1 - r.item()]) if r.size == 1 else r for r in rows]
    return ModelSpace(tuple(Model(Belief(r), frame, 0, k) for k, r in enumerate(rows)))


def nested_model_space(spec: DomainSpec, level: int, beliefs: Sequence | int | None = None,
                       seed: int = 0, inner: Sequence | int | None = None) -> ModelSpace:
    """Models of the other agent at ``level - 1`` for a subject at ``level``.

    For a level-2 subject the other agent's level-1 models share one space of
    level-0 models of the subject; each pairs a state belief with a uniform
    distribution over that space.
    """
    if level == 1:
        return default_model_space(spec, beliefs, seed)
    if level != 2:
        raise ValueError("only levels 1 and 2 are supported")
    if not spec.symmetric:
        raise ValueError(f"domain {spec.name!r} has no level-1 frame for the other agent")
    inner_space = default_model_space(spec, inner, seed + 1)
    states = default_model_space(spec, beliefs, seed)
    frame = spec.frame(1, "other")
    n = len(inner_space)
    models = []
    for m in states:
        joint = np.outer(m.belief.probs, np.full(n, 1.0 / n))
        models.append(Model(InteractiveBelief(joint, inner_space.ids), frame, 1, m.id, inner_space))
    return ModelSpace(tuple(models))
