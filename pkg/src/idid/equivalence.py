"""Behavioral and action equivalence over model spaces, plus the k-means baseline."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .core import (TOL, ActionDistribution, InteractiveBelief, ModCPT, Model, ModelSpace,
                   as_probs)
from .policy_tree import PolicyTree


class MissingTreeError(KeyError):
    pass


class UnreachableClassError(ValueError):
    pass


@dataclass(frozen=True)
class Partition:
    """Disjoint classes of model ids, each with a representative member.

    ``classes`` is ordered by representative id; the representative of a BE
    class is its lowest id.
    """

    classes: tuple[tuple[int, ...], ...]
    representatives: tuple[int, ...]

    def __post_init__(self):
        seen: set[int] = set()
        for cls, rep in zip(self.classes, self.representatives):
            if rep not in cls:
                raise ValueError(f"representative {rep} is not in its class")
            if seen & set(cls):
                raise ValueError("classes overlap")
            seen |= set(cls)

    @property
    def mass_map(self) -> dict[int, int]:
        """Member id -> representative id."""
        return {m: rep for cls, rep in zip(self.classes, self.representatives) for m in cls}

    def __len__(self) -> int:
        return len(self.classes)

    def minimal_space(self, space: ModelSpace) -> ModelSpace:
        return space.subset(self.representatives)


BEPartition = Partition


def partition_by_key(ids: Sequence[int], keys: Sequence) -> Partition:
    groups: dict = {}
    for mid, k in zip(ids, keys):
        groups.setdefault(k, []).append(mid)
    classes = sorted((tuple(sorted(g)) for g in groups.values()), key=lambda c: c[0])
    return Partition(tuple(classes), tuple(c[0] for c in classes))


def group_be(space: ModelSpace, trees: Mapping[int, PolicyTree]) -> Partition:
    """Group models whose canonical policy trees are structurally identical."""
    keys = []
    for m in space:
        if m.id not in trees:
            raise MissingTreeError(f"no policy tree for model {m.id}")
        keys.append(trees[m.id])
    horizons = {t.horizon for t in keys}
    if len(horizons) > 1:
        raise ValueError("trees must share a horizon")
    return partition_by_key(space.ids, keys)


def aggregate_belief(b: InteractiveBelief, mapping: Mapping[int, int],
                     targets: Sequence[int] | None = None) -> InteractiveBelief:
    """Move each model's mass onto ``mapping[model]`` (summing per state)."""
    if targets is None:
        targets = sorted(set(mapping.values()))
    col = {t: k for k, t in enumerate(targets)}
    out = np.zeros((b.n_states, len(targets)))
    for k, mid in enumerate(b.model_ids):
        if mid not in mapping:
            raise KeyError(f"model {mid} is not covered by the partition")
        out[:, col[mapping[mid]]] += b.joint[:, k]
    return InteractiveBelief(out, tuple(targets))


def aggregate_belief_be(b: InteractiveBelief, p: Partition) -> InteractiveBelief:
    """Sum the mass of each class onto its representative; state marginal unchanged."""
    return aggregate_belief(b, p.mass_map, list(p.representatives))


@dataclass(frozen=True)
class AEClass:
    members: tuple[int, ...]
    action_dist: ActionDistribution
    t: int

    @property
    def representative(self) -> int:
        return self.members[0]


def ae_partition(space: ModelSpace | Sequence[int], action_dists: Mapping[int, ActionDistribution],
                 t: int = 0, tol: float = TOL) -> list[AEClass]:
    """Group models whose action distributions at step t agree within ``tol``."""
    ids = space.ids if isinstance(space, ModelSpace) else tuple(space)
    groups: list[tuple[ActionDistribution, list[int]]] = []
    for mid in ids:
        d = action_dists[mid]
        for rep, members in groups:
            if rep.close_to(d, tol):
                members.append(mid)
                break
        else:
            groups.append((d, [mid]))
    return [AEClass(tuple(m), d, t) for d, m in groups]


class AEUpdate(NamedTuple):
    cpt: ModCPT
    exact: bool
    max_divergence: float


def ae_mod_cpt(classes: Sequence[AEClass], prior: InteractiveBelief, base_tau: ModCPT,
               targets: Sequence[int] | None = None, class_ids: Sequence[int] | None = None,
               tol: float = TOL) -> AEUpdate:
    """Class-level update rows from per-model rows, weighted by Pr(m | s).

    For each class and (a, o) the row is computed separately for every state
    with positive mass in the class.  If all those rows agree within ``tol``
    the grouping is exact; otherwise their unweighted mean is used and the
    largest entrywise spread is reported.
    """
    targets = tuple(base_tau.targets if targets is None else targets)
    if class_ids is None:
        class_ids = list(range(len(classes)))
    tcol = {t: k for k, t in enumerate(targets)}
    col = {mid: k for k, mid in enumerate(prior.model_ids)}
    ps = prior.joint.sum(axis=1)
    live_states = np.flatnonzero(ps > 0)
    cond = prior.joint[live_states] / ps[live_states, None]

    keys_by_source: dict[int, set[tuple[int, int]]] = {}
    for (src, a, o) in base_tau.rows:
        keys_by_source.setdefault(src, set()).add((a, o))

    rows: dict[tuple[int, int, int], np.ndarray] = {}
    exact, worst = True, 0.0
    for cid, cls in zip(class_ids, classes):
        cls = cls.members if isinstance(cls, AEClass) else tuple(cls)
        w = cond[:, [col[m] for m in cls]]  # (live S, members)
        if not np.any(w.sum(axis=1) > 0):
            raise UnreachableClassError(f"class {cid} has no mass in any state")
        branch_keys = set().union(*(keys_by_source.get(m, set()) for m in cls))
        for (a, o) in sorted(branch_keys):
            mat = np.zeros((len(cls), len(targets)))
            has = np.zeros(len(cls), dtype=bool)
            for k, m in enumerate(cls):
                r = base_tau.row(m, a, o)
                if r is not None:
                    has[k] = True
                    for bt, p in zip(base_tau.targets, r):
                        if p:
                            mat[k, tcol[bt]] += p
            ww = w * has
            tot = ww.sum(axis=1)
            ok = tot > 0
            if not np.any(ok):
                continue
            per_state = (ww[ok] @ mat) / tot[ok, None]
            spread = float(np.max(per_state.max(axis=0) - per_state.min(axis=0)))
            worst = max(worst, spread)
            if spread > tol:
                exact = False
            row = per_state.mean(axis=0)
            rows[(cid, a, o)] = row / row.sum()
    return AEUpdate(ModCPT(tuple(class_ids), targets, rows), exact, worst)


def l1(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.abs(np.asarray(a) - np.asarray(b)).sum())


def epsilon_neighbor(b, solved: Sequence, eps: float) -> int | None:
    """Index of the L1-closest solved belief if it is within ``eps``."""
    if eps < 0:
        raise ValueError("epsilon must be nonnegative")
    p = as_probs(b).ravel()
    best, best_d = None, np.inf
    for k, q in enumerate(solved):
        q = as_probs(q).ravel()
        if q.shape != p.shape:
            continue
        d = l1(p, q)
        if d < best_d:
            best, best_d = k, d
    # slack absorbs rounding in the distance itself (|0.70 - 0.75| * 2 > 0.1 in floats)
    if best is not None and best_d <= eps + 1e-12:
        return best
    return None


class Clustering(NamedTuple):
    space: ModelSpace
    partition: Partition


def _farthest_point_init(X: np.ndarray, K: int, rng: np.random.Generator) -> list[int]:
    chosen = [int(rng.integers(len(X)))]
    dist = np.abs(X - X[chosen[0]]).sum(axis=1)
    while len(chosen) < K:
        d = dist.copy()
        d[chosen] = -1.0
        nxt = int(np.flatnonzero(d == d.max())[0])
        chosen.append(nxt)
        dist = np.minimum(dist, np.abs(X - X[nxt]).sum(axis=1))
    return chosen


def mc_cluster(space: ModelSpace, K: int, seed: int = 0, max_iter: int = 100) -> Clustering:
    """k-means over belief vectors (L1 assignment, arithmetic means).

    Each final cluster keeps the member nearest its mean (lowest id on
    ties); the partition maps every member to that retained model.
    """
    if K <= 0:
        raise ValueError("K must be positive")
    if K > len(space):
        raise ValueError(f"K={K} exceeds the {len(space)} models available")
    models = list(space)
    X = np.stack([m.vector for m in models])
    rng = np.random.default_rng(seed)
    centers = X[_farthest_point_init(X, K, rng)].copy()
    assign = None
    for _ in range(max_iter):
        d = np.abs(X[:, None, :] - centers[None, :, :]).sum(axis=2)
        new = d.argmin(axis=1)
        if assign is not None and np.array_equal(new, assign):
            break
        assign = new
        for k in range(K):
            members = X[assign == k]
            if len(members):
                centers[k] = members.mean(axis=0)
    keys, retained = [], {}
    for k in range(K):
        idx = np.flatnonzero(assign == k)
        if len(idx) == 0:
            continue
        d = np.abs(X[idx] - centers[k]).sum(axis=1)
        near = idx[np.flatnonzero(d <= d.min() + 1e-15)]
        retained[k] = min(models[i].id for i in near)
    mapping = {models[i].id: retained[int(assign[i])] for i in range(len(models))}
    groups: dict[int, list[int]] = {}
    for mid, rep in mapping.items():
        groups.setdefault(rep, []).append(mid)
    reps = sorted(groups)
    part = Partition(tuple(tuple(sorted(groups[r])) for r in reps), tuple(reps))
    return Clustering(space.subset(reps), part)
