"""Shared domain types: frames, beliefs, models, interactive beliefs and the
model-update table."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

TOL = 1e-9
# probabilities at or below this are treated as zero when pruning branches
ZERO_PROB = 1e-14


class ValidationError(ValueError):
    pass


class UndefinedConditionalError(ValueError):
    pass


class ImpossibleObservationError(ValueError):
    pass


def _frozen(a: Any, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Frame:
    """Everything about an agent's decision problem except its belief.

    Level-0 frames have no ``other_actions`` and tables keyed on
    ``(s, a)``; otherwise every table carries an extra other-action axis
    right after the own-action axis.

    transition:     (S, A, [A_o,] S')
    observation_fn: (S', A, [A_o,] O)
    reward:         (S, A, [A_o])
    """

    name: str
    agent_role: str
    states: tuple[str, ...]
    actions: tuple[str, ...]
    observations: tuple[str, ...]
    transition: np.ndarray
    observation_fn: np.ndarray
    reward: np.ndarray
    other_actions: tuple[str, ...] = ()

    def __post_init__(self):
        if self.agent_role not in ("subject", "other"):
            raise ValueError(f"unknown agent role {self.agent_role!r}")
        for name in ("states", "actions", "observations", "other_actions"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        for name in ("transition", "observation_fn", "reward"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        S, A, O = len(self.states), len(self.actions), len(self.observations)
        mid = (len(self.other_actions),) if self.other_actions else ()
        want = {
            "transition": (S, A, *mid, S),
            "observation_fn": (S, A, *mid, O),
            "reward": (S, A, *mid),
        }
        for name, shape in want.items():
            got = getattr(self, name).shape
            if got != shape:
                raise ValidationError(f"{self.name}: {name} has shape {got}, expected {shape}")

    @property
    def is_level0(self) -> bool:
        return not self.other_actions

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    @property
    def n_observations(self) -> int:
        return len(self.observations)

    def with_role(self, role: str) -> "Frame":
        return Frame(self.name, role, self.states, self.actions, self.observations,
                     self.transition, self.observation_fn, self.reward, self.other_actions)


def _row_problems(table: np.ndarray, label: str, frame: Frame) -> list[str]:
    out = []
    rows = table.reshape(-1, table.shape[-1])
    keys = np.ndindex(*table.shape[:-1])
    for key, row in zip(keys, rows):
        if np.any(row < 0) or abs(row.sum() - 1.0) > TOL or not np.all(np.isfinite(row)):
            s = frame.states[key[0]]
            a = frame.actions[key[1]]
            extra = f", {frame.other_actions[key[2]]}" if len(key) > 2 else ""
            out.append(f"{label} row (s={s}, a={a}{extra}) sums to {row.sum():.12g}"
                       + (" and has negative entries" if np.any(row < 0) else ""))
    return out


def validate_frame(frame: Frame) -> list[str]:
    """Diagnostics for every bad transition/observation row; empty when valid."""
    out = _row_problems(frame.transition, "transition", frame)
    out += _row_problems(frame.observation_fn, "observation", frame)
    if not np.all(np.isfinite(frame.reward)):
        out.append("reward table has non-finite entries")
    return out


def require_valid(frame: Frame) -> Frame:
    problems = validate_frame(frame)
    if problems:
        raise ValidationError(f"frame {frame.name!r} is invalid: " + "; ".join(problems))
    return frame


def check_distribution(p: np.ndarray, what: str = "distribution") -> None:
    if p.ndim == 0 or np.any(p < -0.0) or not np.all(np.isfinite(p)):
        raise ValidationError(f"{what} has negative or non-finite entries")
    if abs(float(p.sum()) - 1.0) > TOL:
        raise ValidationError(f"{what} sums to {float(p.sum())!r}, not 1")


@dataclass(frozen=True, eq=False)
class Belief:
    probs: np.ndarray

    def __post_init__(self):
        p = _frozen(self.probs)
        if p.ndim != 1:
            raise ValidationError("belief must be a vector")
        check_distribution(p, "belief")
        object.__setattr__(self, "probs", p)

    def __len__(self) -> int:
        return len(self.probs)

    def __eq__(self, other):
        return isinstance(other, Belief) and np.array_equal(self.probs, other.probs)

    def __hash__(self):
        return hash(self.probs.tobytes())


def as_probs(b) -> np.ndarray:
    if isinstance(b, Belief):
        return b.probs
    if isinstance(b, InteractiveBelief):
        return b.joint
    return np.asarray(b, dtype=float)


@dataclass(frozen=True, eq=False)
class InteractiveBelief:
    """Joint distribution over physical state and the other agent's models.

    ``joint[s, k]`` is the probability of state ``s`` together with the model
    whose id is ``model_ids[k]``.
    """

    joint: np.ndarray
    model_ids: tuple[int, ...]

    def __post_init__(self):
        j = _frozen(self.joint)
        ids = tuple(int(i) for i in self.model_ids)
        if j.ndim != 2 or j.shape[1] != len(ids):
            raise ValidationError(f"joint shape {j.shape} does not match {len(ids)} model ids")
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate model ids in interactive belief")
        check_distribution(j, "interactive belief")
        object.__setattr__(self, "joint", j)
        object.__setattr__(self, "model_ids", ids)

    @classmethod
    def from_conditional(cls, state_marginal, conditional, model_ids) -> "InteractiveBelief":
        """Build from Pr(s) and a (S, M) table of Pr(m | s)."""
        pm = np.asarray(state_marginal, dtype=float)
        cond = np.asarray(conditional, dtype=float)
        if cond.ndim == 1:
            cond = np.broadcast_to(cond, (len(pm), len(cond)))
        return cls(pm[:, None] * cond, tuple(model_ids))

    @classmethod
    def independent(cls, state_marginal, model_probs, model_ids) -> "InteractiveBelief":
        return cls.from_conditional(state_marginal, model_probs, model_ids)

    @property
    def n_states(self) -> int:
        return self.joint.shape[0]

    def state_marginal(self) -> Belief:
        return Belief(self.joint.sum(axis=1))

    def column(self, model_id: int) -> int:
        return self.model_ids.index(model_id)

    def conditional(self, s: int) -> np.ndarray:
        ps = self.joint[s].sum()
        if ps <= 0:
            raise UndefinedConditionalError(f"Pr(s={s}) is zero; Pr(model | s) is undefined")
        return self.joint[s] / ps

    def __eq__(self, other):
        return (isinstance(other, InteractiveBelief) and self.model_ids == other.model_ids
                and np.array_equal(self.joint, other.joint))

    def __hash__(self):
        return hash((self.model_ids, self.joint.tobytes()))


def conditional_model_dist(b: InteractiveBelief, s: int) -> dict[int, float]:
    cond = b.conditional(s)
    return {mid: float(p) for mid, p in zip(b.model_ids, cond)}


@dataclass(frozen=True, eq=False)
class ActionDistribution:
    probs: np.ndarray

    def __post_init__(self):
        p = _frozen(self.probs)
        check_distribution(p, "action distribution")
        object.__setattr__(self, "probs", p)

    @classmethod
    def uniform_over(cls, actions: Iterable[int], n_actions: int) -> "ActionDistribution":
        acts = sorted(set(int(a) for a in actions))
        if not acts:
            raise ValueError("empty optimal action set")
        p = np.zeros(n_actions)
        p[acts] = 1.0 / len(acts)
        return cls(p)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(int(a) for a in np.flatnonzero(self.probs > 0))

    def close_to(self, other: "ActionDistribution", tol: float = TOL) -> bool:
        return self.probs.shape == other.probs.shape and bool(
            np.max(np.abs(self.probs - other.probs)) <= tol)

    def __eq__(self, other):
        return isinstance(other, ActionDistribution) and np.array_equal(self.probs, other.probs)

    def __hash__(self):
        return hash(self.probs.tobytes())


@dataclass(frozen=True, eq=False)
class Model:
    """A candidate model of an agent: a belief paired with a frame.

    Level-0 models hold a :class:`Belief`.  Higher-level models hold an
    :class:`InteractiveBelief` over the models in ``other_space``; once the
    solver has expanded that space, ``expansion`` and ``step`` locate the
    belief's columns in the expanded structure.
    """

    belief: Any
    frame: Frame
    level: int = 0
    id: int = 0
    other_space: "ModelSpace | None" = None
    step: int = 0
    expansion: Any = field(default=None, repr=False)

    def __post_init__(self):
        if self.level < 0:
            raise ValueError("model level must be nonnegative")
        if self.level == 0:
            if not self.frame.is_level0:
                raise ValidationError("a level-0 model needs a level-0 frame")
            if not isinstance(self.belief, Belief):
                object.__setattr__(self, "belief", Belief(self.belief))
            if len(self.belief) != self.frame.n_states:
                raise ValidationError("belief length does not match the frame's states")
        else:
            if self.frame.is_level0:
                raise ValidationError("a nested model needs a frame with other-agent actions")
            if not isinstance(self.belief, InteractiveBelief):
                raise ValidationError("a nested model needs an interactive belief")
            if self.other_space is None and self.expansion is None:
                raise ValidationError("a nested model needs the other agent's model space")

    @property
    def vector(self) -> np.ndarray:
        """Flat belief vector, used for distances between models."""
        return as_probs(self.belief).ravel()

    def with_id(self, new_id: int) -> "Model":
        return Model(self.belief, self.frame, self.level, new_id, self.other_space,
                     self.step, self.expansion)


@dataclass(frozen=True)
class ModelSpace:
    models: tuple[Model, ...]
    owner: str = "other"

    def __post_init__(self):
        models = tuple(self.models)
        ids = [m.id for m in models]
        if len(set(ids)) != len(ids):
            raise ValidationError("model ids must be unique")
        object.__setattr__(self, "models", models)

    def __len__(self) -> int:
        return len(self.models)

    def __iter__(self):
        return iter(self.models)

    @property
    def ids(self) -> tuple[int, ...]:
        return tuple(m.id for m in self.models)

    def get(self, model_id: int) -> Model:
        for m in self.models:
            if m.id == model_id:
                return m
        raise KeyError(model_id)

    def subset(self, ids: Iterable[int]) -> "ModelSpace":
        keep = set(ids)
        return ModelSpace(tuple(m for m in self.models if m.id in keep), self.owner)


@dataclass(frozen=True, eq=False)
class ModCPT:
    """Model-update table: (source, other action, other observation) -> next ids.

    Each row is a distribution over ``targets``.  Rows for branches that were
    pruned (zero likelihood) are simply absent.
    """

    sources: tuple[int, ...]
    targets: tuple[int, ...]
    rows: Mapping[tuple[int, int, int], np.ndarray]

    def __post_init__(self):
        rows = {}
        n = len(self.targets)
        for key, row in self.rows.items():
            r = _frozen(row)
            if r.shape != (n,):
                raise ValidationError(f"row {key} has {r.shape} entries, expected {n}")
            check_distribution(r, f"Mod row {key}")
            rows[tuple(int(k) for k in key)] = r
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "sources", tuple(self.sources))
        object.__setattr__(self, "targets", tuple(self.targets))

    @classmethod
    def deterministic(cls, sources, targets, mapping: Mapping[tuple[int, int, int], int]) -> "ModCPT":
        idx = {t: k for k, t in enumerate(targets)}
        rows = {}
        for key, tgt in mapping.items():
            r = np.zeros(len(targets))
            r[idx[tgt]] = 1.0
            rows[key] = r
        return cls(tuple(sources), tuple(targets), rows)

    def row(self, source: int, a: int, o: int) -> np.ndarray | None:
        return self.rows.get((source, a, o))

    def target_of(self, source: int, a: int, o: int) -> int | None:
        """Single target of a deterministic row, else None."""
        r = self.rows.get((source, a, o))
        if r is None:
            return None
        nz = np.flatnonzero(r)
        if len(nz) == 1 and r[nz[0]] == 1.0:
            return self.targets[nz[0]]
        return None

    def is_deterministic(self) -> bool:
        return all(np.count_nonzero(r) == 1 for r in self.rows.values())

    def dense(self, n_actions: int, n_obs: int) -> np.ndarray:
        """Array indexed (source position, a, o, target position)."""
        src = {s: k for k, s in enumerate(self.sources)}
        out = np.zeros((len(self.sources), n_actions, n_obs, len(self.targets)))
        for (s, a, o), r in self.rows.items():
            out[src[s], a, o] = r
        return out

    @classmethod
    def from_dense(cls, sources, targets, dense: np.ndarray) -> "ModCPT":
        rows = {}
        for k, a, o in np.ndindex(*dense.shape[:3]):
            r = dense[k, a, o]
            if r.sum() > 0:
                rows[(sources[k], a, o)] = r
        return cls(tuple(sources), tuple(targets), rows)


def uniform_interactive_belief(n_states: int, model_ids: Sequence[int]) -> InteractiveBelief:
    n = len(model_ids)
    return InteractiveBelief(np.full((n_states, n), 1.0 / (n_states * n)), tuple(model_ids))
