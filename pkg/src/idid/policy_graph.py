"""Policy graphs: policy trees merged bottom-up with shared identical subtrees."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import TOL, Frame, as_probs
from .policy_tree import PolicyTree


class FinalLayerError(ValueError):
    pass


@dataclass(frozen=True)
class Vertex:
    id: int
    layer: int
    action: int
    children: tuple[int, ...]  # successor vertex per observation; empty in the final layer


@dataclass(frozen=True, eq=False)
class PolicyGraph:
    vertices: tuple[Vertex, ...]
    horizon: int
    n_observations: int
    roots: Mapping[int, int]
    alphas: np.ndarray | None = None  # (|V|, S) when a frame was supplied
    comparisons: int = 0

    def vertex(self, v: int) -> Vertex:
        return self.vertices[v]

    def layer(self, t: int) -> list[int]:
        return [v.id for v in self.vertices if v.layer == t]

    def root_vertices(self) -> list[int]:
        return sorted(set(self.roots.values()))

    def __len__(self) -> int:
        return len(self.vertices)


class GraphBuilder:
    """Incremental hash-consing of subtrees into layered vertices.

    A vertex is keyed on (layer, action, successor ids).  Successor ids are
    already canonical, so two keys are equal exactly when the subtrees are
    structurally identical, and each interning step costs one key comparison.
    """

    def __init__(self, horizon: int, n_observations: int):
        self.horizon = horizon
        self.n_observations = n_observations
        self.vertices: list[Vertex] = []
        self._index: dict[tuple[int, int, tuple[int, ...]], int] = {}
        self._by_node: dict[int, int] = {}
        self._keep: list[PolicyTree] = []
        self.comparisons = 0

    def _intern(self, layer: int, action: int, kids: tuple[int, ...]) -> int:
        key = (layer, action, kids)
        self.comparisons += 1
        v = self._index.get(key)
        if v is None:
            v = len(self.vertices)
            self.vertices.append(Vertex(v, layer, action, kids))
            self._index[key] = v
        return v

    def add_trees(self, trees: Sequence[PolicyTree]) -> list[int]:
        """Intern trees layer by layer from the leaves up, in input order."""
        levels: list[list[list[PolicyTree]]] = []
        for tree in trees:
            if tree.horizon > self.horizon:
                raise ValueError("tree is deeper than the graph")
            if tree.children and len(tree.children) != self.n_observations:
                raise ValueError("tree arity does not match the graph")
            per_depth = [[tree]]
            while per_depth[-1][0].children:
                per_depth.append([c for n in per_depth[-1] for c in n.children])
            levels.append(per_depth)
            self._keep.append(tree)
        deepest = max((len(p) for p in levels), default=0)
        for depth in range(deepest - 1, -1, -1):
            for tree, per_depth in zip(trees, levels):
                if depth >= len(per_depth):
                    continue
                for node in per_depth[depth]:
                    if id(node) in self._by_node:
                        continue
                    if node.children and len(node.children) != self.n_observations:
                        raise ValueError("tree arity does not match the graph")
                    kids = tuple(self._by_node[id(c)] for c in node.children)
                    layer = self.horizon - node.horizon
                    self._by_node[id(node)] = self._intern(layer, node.action, kids)
        return [self._by_node[id(t)] for t in trees]

    def add_tree(self, tree: PolicyTree) -> int:
        return self.add_trees([tree])[0]

    def build(self, roots: Mapping[int, int], frame: Frame | None = None) -> PolicyGraph:
        alphas = graph_alphas(self.vertices, frame) if frame is not None else None
        return PolicyGraph(tuple(self.vertices), self.horizon, self.n_observations,
                           dict(roots), alphas, self.comparisons)


def graph_alphas(vertices: Sequence[Vertex], frame: Frame) -> np.ndarray:
    if not frame.is_level0:
        raise ValueError("alpha-vectors are computed for level-0 frames")
    out = np.zeros((len(vertices), frame.n_states))
    # successors always have larger layer, so deepest layers first
    for v in sorted(vertices, key=lambda v: -v.layer):
        a = v.action
        vals = frame.reward[:, a].astype(float).copy()
        if v.children:
            kids = out[list(v.children)].T  # (S', O)
            vals += frame.transition[:, a, :] @ (frame.observation_fn[:, a, :] * kids).sum(axis=1)
        out[v.id] = vals
    return out


def merge_trees(trees: Sequence[PolicyTree] | Mapping[int, PolicyTree],
                frame: Frame | None = None) -> PolicyGraph:
    """Merge equal-horizon trees; a list is keyed by position."""
    if isinstance(trees, Mapping):
        ids, items = list(trees.keys()), list(trees.values())
    else:
        items = list(trees)
        ids = list(range(len(items)))
    if not items:
        raise ValueError("nothing to merge")
    horizon = items[0].horizon
    if any(t.horizon != horizon for t in items):
        raise ValueError("all trees must share one horizon")
    arity = next((t.arity() for t in items if t.children), 0)
    b = GraphBuilder(horizon, arity)
    roots = b.add_trees(items)
    return b.build(dict(zip(ids, roots)), frame)


def transition(pg: PolicyGraph, v: int, o: int) -> int:
    vert = pg.vertices[v]
    if not vert.children:
        raise FinalLayerError(f"vertex {v} is in the final layer and has no successors")
    return vert.children[o]


def expand(pg: PolicyGraph, v: int) -> PolicyTree:
    """Rebuild the policy tree rooted at vertex ``v``."""
    memo: dict[int, PolicyTree] = {}

    def rec(u: int) -> PolicyTree:
        hit = memo.get(u)
        if hit is None:
            vert = pg.vertices[u]
            hit = memo[u] = PolicyTree(vert.action, [rec(c) for c in vert.children])
        return hit

    return rec(v)


def optimal_root(pg: PolicyGraph, b, tol: float = TOL) -> int:
    """Root vertex whose alpha-vector is best for ``b``; lowest index on ties."""
    if pg.alphas is None:
        raise ValueError("graph was merged without a frame; no alpha-vectors")
    roots = pg.root_vertices()
    if not roots:
        raise ValueError("graph has no roots")
    vals = pg.alphas[roots] @ as_probs(b)
    best = np.flatnonzero(vals >= vals.max() - tol)[0]
    return roots[int(best)]
