"""Exact finite-horizon solver for single-agent (level-0) models."""

from __future__ import annotations

import weakref

import numpy as np

from .core import (TOL, ZERO_PROB, ActionDistribution, Belief, Frame,
                   ImpossibleObservationError, Model, as_probs)
from .policy_tree import PolicyTree

MEMO_DECIMALS = 12


def memo_key(p: np.ndarray) -> bytes:
    # adding 0.0 folds -0.0 into 0.0 so equal beliefs share a key
    return (np.round(p, MEMO_DECIMALS) + 0.0).tobytes()


def _require_level0(frame: Frame) -> None:
    if not frame.is_level0:
        raise ValueError(f"frame {frame.name!r} is not a level-0 frame")


def observation_probs(frame: Frame, b, a: int) -> np.ndarray:
    """Pr(o | b, a) for every observation."""
    p = as_probs(b)
    pred = p @ frame.transition[:, a, :]
    return pred @ frame.observation_fn[:, a, :]


def _posterior(frame: Frame, p: np.ndarray, a: int) -> tuple[np.ndarray, np.ndarray]:
    """Unnormalized posteriors (S', O) and their masses Pr(o | b, a)."""
    pred = p @ frame.transition[:, a, :]
    joint = pred[:, None] * frame.observation_fn[:, a, :]
    return joint, joint.sum(axis=0)


def belief_update(frame: Frame, b, a: int, o: int) -> Belief:
    _require_level0(frame)
    joint, po = _posterior(frame, as_probs(b), a)
    if po[o] <= ZERO_PROB:
        raise ImpossibleObservationError(
            f"observation {frame.observations[o]!r} is impossible after action "
            f"{frame.actions[a]!r} from this belief")
    return Belief(joint[:, o] / po[o])


def alpha_vector(tree: PolicyTree, frame: Frame) -> np.ndarray:
    """Value of executing ``tree`` from each state."""
    _require_level0(frame)
    tree.check_arity(frame.n_actions, frame.n_observations)
    memo: dict[int, np.ndarray] = {}

    def rec(node: PolicyTree) -> np.ndarray:
        hit = memo.get(id(node))
        if hit is not None:
            return hit
        a = node.action
        vals = frame.reward[:, a].astype(float).copy()
        if node.children:
            kids = np.stack([rec(c) for c in node.children], axis=1)  # (S', O)
            future = (frame.observation_fn[:, a, :] * kids).sum(axis=1)
            vals += frame.transition[:, a, :] @ future
        memo[id(node)] = vals
        return vals

    return rec(tree)


class Level0Solver:
    """Depth-first look-ahead with memoization on (rounded belief, horizon).

    Each memo entry holds the chosen tree and its alpha-vector, so returned
    values are always alpha . b for the caller's exact belief.
    """

    def __init__(self, frame: Frame, tie_tol: float = TOL):
        _require_level0(frame)
        self.frame = frame
        self.tie_tol = tie_tol
        self._memo: dict[tuple[bytes, int], tuple[PolicyTree, np.ndarray, np.ndarray]] = {}
        self._uniform = np.full(frame.n_states, 1.0 / frame.n_states)

    def _node(self, p: np.ndarray, n: int):
        key = (memo_key(p), n)
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        f = self.frame
        A, O = f.n_actions, f.n_observations
        alphas = np.empty((A, f.n_states))
        kids_per_action = []
        unreachable_per_action = []
        for a in range(A):
            alpha = f.reward[:, a].astype(float).copy()
            kids, dead = [], set()
            if n > 1:
                joint, po = _posterior(f, p, a)
                child_alpha = np.empty((f.n_states, O))
                for o in range(O):
                    if po[o] > ZERO_PROB:
                        post = joint[:, o] / po[o]
                    else:
                        post = self._uniform
                        dead.add(o)
                    tree_o, alpha_o, _ = self._node(post, n - 1)
                    kids.append(tree_o)
                    child_alpha[:, o] = alpha_o
                alpha += f.transition[:, a, :] @ (f.observation_fn[:, a, :] * child_alpha).sum(axis=1)
            alphas[a] = alpha
            kids_per_action.append(kids)
            unreachable_per_action.append(dead)
        q = alphas @ p
        best = int(np.flatnonzero(q >= q.max() - self.tie_tol)[0])
        tree = PolicyTree(best, kids_per_action[best], frozenset(unreachable_per_action[best]))
        out = (tree, alphas[best], q)
        self._memo[key] = out
        return out

    def solve(self, b, horizon: int) -> tuple[PolicyTree, float]:
        if horizon < 1:
            raise ValueError("horizon must be at least 1")
        p = as_probs(b)
        tree, alpha, _ = self._node(p, horizon)
        return tree, float(alpha @ p)

    def q_values(self, b, horizon: int) -> np.ndarray:
        if horizon < 1:
            raise ValueError("horizon must be at least 1")
        return self._node(as_probs(b), horizon)[2].copy()

    def tree_alpha(self, b, horizon: int) -> np.ndarray:
        return self._node(as_probs(b), horizon)[1]


_solvers: "weakref.WeakKeyDictionary[Frame, dict[float, Level0Solver]]" = weakref.WeakKeyDictionary()


def solver_for(frame: Frame, tie_tol: float = TOL) -> Level0Solver:
    per_frame = _solvers.setdefault(frame, {})
    s = per_frame.get(tie_tol)
    if s is None:
        s = per_frame[tie_tol] = Level0Solver(frame, tie_tol)
    return s


def solve_policy_tree(model: Model, horizon: int, tie_tol: float = TOL) -> tuple[PolicyTree, float]:
    if model.level != 0:
        raise ValueError("solve_policy_tree takes level-0 models; use solver.solve for nested ones")
    return solver_for(model.frame, tie_tol).solve(model.belief, horizon)


def opt_action_set(model: Model, horizon: int, tie_tol: float = TOL) -> ActionDistribution:
    """Uniform distribution over root actions within ``tie_tol`` of the best Q."""
    q = solver_for(model.frame).q_values(model.belief, horizon)
    best = np.flatnonzero(q >= q.max() - tie_tol)
    return ActionDistribution.uniform_over(best, model.frame.n_actions)
