"""Expansion and solution of nested (level >= 1) decision models.

An expansion unrolls the other agent's candidate models over the horizon:
per step it holds the surviving models (or action-equivalence classes),
their action distributions, and the dense update table into the next step.
The subject's look-ahead then runs over joint beliefs on (state, model).
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .core import (TOL, ZERO_PROB, ActionDistribution, Frame, ImpossibleObservationError,
                   InteractiveBelief, ModCPT, Model, ModelSpace, uniform_interactive_belief)
from .equivalence import (ae_mod_cpt, ae_partition, aggregate_belief, epsilon_neighbor,
                          group_be, mc_cluster)
from .level0 import belief_update, memo_key, observation_probs, solver_for
from .policy_graph import GraphBuilder, PolicyGraph
from .policy_tree import Behavior, PolicyTree

log = logging.getLogger(__name__)

METHODS = ("exact", "exact-be", "dmu", "ae", "mc")
_ALIASES = {"exactbe": "exact-be", "exact_be": "exact-be", "be": "exact-be"}


def normalize_method(name: str) -> str:
    key = name.strip().lower()
    key = _ALIASES.get(key, key)
    if key not in METHODS:
        raise ValueError(f"unknown method {name!r}; choose from {', '.join(METHODS)}")
    return key


@dataclass(frozen=True)
class SolverConfig:
    method: str = "exact-be"
    horizon: int = 2
    K: int | None = None  # None means "all initial models"
    epsilon: float = 0.0
    seed: int = 0
    tie_tol: float = TOL

    def __post_init__(self):
        object.__setattr__(self, "method", normalize_method(self.method))
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if self.K is not None and self.K < 1:
            raise ValueError("K must be at least 1")


# ------------------------------------------------------------------ trace

@dataclass(frozen=True)
class UpdateRecord:
    """One Mod-table row: (source, a, o) at step t routed to ``target`` at t+1.

    kind is "new" when the row created its target, "transfer" when it was
    pointed at a model created earlier, and "class" for class-level rows.
    """

    t: int
    source: int
    action: int
    observation: int
    target: int
    kind: str
    prob: float = 1.0


@dataclass(frozen=True)
class MassTransfer:
    """Mass of model ``source`` merged into ``target`` within step t."""

    t: int
    source: int
    target: int
    reason: str


@dataclass
class ExpansionTrace:
    method: str
    horizon: int
    initial_count: int = 0
    counts: list[int] = field(default_factory=list)
    model_counts: list[int] = field(default_factory=list)
    updates: list[UpdateRecord] = field(default_factory=list)
    transfers: list[MassTransfer] = field(default_factory=list)
    exact_flags: list[bool] = field(default_factory=list)
    divergence: list[float] = field(default_factory=list)
    state_mass: list[list[float]] = field(default_factory=list)
    solved_initial: int = 0
    skipped: list[tuple[int, int]] = field(default_factory=list)

    def updates_at(self, t: int) -> list[UpdateRecord]:
        return [u for u in self.updates if u.t == t]

    def route(self, t: int, source: int, a: int, o: int) -> UpdateRecord | None:
        for u in self.updates:
            if (u.t, u.source, u.action, u.observation) == (t, source, a, o):
                return u
        return None


# -------------------------------------------------------------- expansion

@dataclass(eq=False)
class Expansion:
    method: str
    horizon: int
    frame: Frame  # the owner's nested frame
    other_frame: Frame
    ids: list[tuple[int, ...]]
    action_probs: list[np.ndarray]  # per step, (n_t, A_other)
    tau: list[np.ndarray]  # per step t < T-1, (n_t, A_other, O_other, n_t+1)
    initial_map: dict[int, int]
    trace: ExpansionTrace
    models: list[list[Model]] | None = None  # None when steps hold classes
    likelihood: list[np.ndarray] | None = None  # private-state domains: (n_t, A_other, O_other)
    graph: PolicyGraph | None = None
    classes: list[list] | None = None
    behaviors: list[list[Behavior]] | None = None  # DMU: solution of each model
    base: "Expansion | None" = None  # AE: the model-level expansion it coarsens
    _routing: dict = field(default_factory=dict, repr=False)
    _dp: dict = field(default_factory=dict, repr=False)

    @property
    def shared_state(self) -> bool:
        return self.likelihood is None

    def count(self, t: int) -> int:
        return len(self.ids[t])

    def action_dist(self, t: int) -> dict[int, ActionDistribution]:
        return {i: ActionDistribution(p) for i, p in zip(self.ids[t], self.action_probs[t])}

    def mod_cpt(self, t: int) -> ModCPT:
        return ModCPT.from_dense(self.ids[t], self.ids[t + 1], self.tau[t])

    def mod_cpts(self) -> list[ModCPT]:
        return [self.mod_cpt(t) for t in range(self.horizon - 1)]

    def routing(self, t: int, a_own: int) -> np.ndarray:
        """G[s', a_other, m, m'] = sum_o Pr(o | s', a_other, ...) tau[m, a_other, o, m']."""
        key = (t, a_own if not self.other_frame.is_level0 else None)
        g = self._routing.get(key)
        if g is None:
            tau = self.tau[t]
            if self.likelihood is not None:
                core = np.einsum("mao,maon->amn", self.likelihood[t], tau)
                g = np.broadcast_to(core, (self.frame.n_states, *core.shape))
            else:
                obs = self.other_frame.observation_fn
                if not self.other_frame.is_level0:
                    obs = obs[:, :, a_own, :]
                g = np.einsum("tao,maon->tamn", obs, tau)
            self._routing[key] = g
        return g

    def mean_routing(self, t: int) -> np.ndarray:
        if self.other_frame.is_level0 or self.likelihood is not None:
            return self.routing(t, 0)
        return np.mean([self.routing(t, a) for a in range(self.frame.n_actions)], axis=0)


def _own_transition_marginal(frame: Frame) -> np.ndarray:
    """Owner's transition with its own action averaged out: (S, A_other, S')."""
    return frame.transition.mean(axis=1)


def propagate_mass(exp: Expansion, prior: np.ndarray) -> list[np.ndarray]:
    """Joint (state, model) mass per step under a uniform owner policy."""
    Tbar = _own_transition_marginal(exp.frame)
    out = [prior]
    J = prior
    for t in range(exp.horizon - 1):
        W = J[:, :, None] * exp.action_probs[t][None]
        X = np.einsum("sma,sat->tma", W, Tbar)
        J = np.einsum("tma,tamn->tn", X, exp.mean_routing(t))
        out.append(J)
    return out


def state_mass_check(exp: Expansion, prior: np.ndarray) -> list[list[float]]:
    """Per step and state: total model mass divided by the model-free state mass."""
    Tbar = _own_transition_marginal(exp.frame)
    res = [[1.0 if p > 0 else 1.0 for p in prior.sum(axis=1)]]
    J = prior
    for t in range(exp.horizon - 1):
        W = J[:, :, None] * exp.action_probs[t][None]
        X = np.einsum("sma,sat->tma", W, Tbar)
        ps = X.sum(axis=(1, 2))
        J = np.einsum("tma,tamn->tn", X, exp.mean_routing(t))
        tot = J.sum(axis=1)
        res.append([float(a / b) if b > 0 else 1.0 for a, b in zip(tot, ps)])
    return res


# ----------------------------------------------- operations on other models

class _Ops:
    """Solve/update primitives for the other agent's models at any level."""

    def __init__(self, cfg: SolverConfig):
        self.cfg = cfg
        self._inner: dict = {}
        self._behaviors: dict = {}
        self._interned: dict[Behavior, Behavior] = {}

    def attach(self, m: Model) -> Model:
        """Give a nested model its own expanded structure (step 0)."""
        if m.level == 0 or m.expansion is not None:
            return m
        key = (id(m.other_space), m.frame, self.cfg)
        if self.cfg.method == "ae":
            key += (m.belief.joint.tobytes(),)
        exp = self._inner.get(key)
        if exp is None:
            exp = expand(m.other_space, m.frame, self.cfg, prior=m.belief)
            self._inner[key] = exp
        b0 = aggregate_belief(m.belief, exp.initial_map, exp.ids[0])
        return Model(b0, m.frame, m.level, m.id, m.other_space, 0, exp)

    def _dp(self, m: Model) -> "InteractiveDP":
        return dp_for(m.expansion, self.cfg.tie_tol)

    def tree(self, m: Model, n: int) -> PolicyTree:
        if m.level == 0:
            return solver_for(m.frame, self.cfg.tie_tol).solve(m.belief, n)[0]
        if m.expansion.horizon - m.step != n:
            raise ValueError("nested model horizon does not match its expansion")
        return self._dp(m).node(m.step, m.belief.joint)[0]

    def q(self, m: Model, n: int) -> np.ndarray:
        if m.level == 0:
            return solver_for(m.frame, self.cfg.tie_tol).q_values(m.belief, n)
        return self._dp(m).node(m.step, m.belief.joint)[2]

    def opt(self, m: Model, n: int) -> np.ndarray:
        q = self.q(m, n)
        best = np.flatnonzero(q >= q.max() - self.cfg.tie_tol)
        return ActionDistribution.uniform_over(best, len(q)).probs

    def behavior(self, m: Model, n: int) -> Behavior:
        """Tie-aware solution of ``m`` over the remaining ``n`` steps, hash-consed."""
        owner = m.frame if m.level == 0 else m.expansion
        key = (owner, m.step, memo_key(m.vector), n)
        hit = self._behaviors.get(key)
        if hit is not None:
            return hit
        acts = [int(a) for a in np.flatnonzero(self.opt(m, n) > 0)]
        kids = []
        if n > 1:
            for a in acts:
                po = self.obs_probs(m, a)
                kids.append([self.behavior(self.update(m, a, o, m.id), n - 1) if po[o] > ZERO_PROB else None
                             for o in range(len(po))])
        b = Behavior(acts, kids, n)
        b = self._interned.setdefault(b, b)
        self._behaviors[key] = b
        return b

    def obs_probs(self, m: Model, a: int) -> np.ndarray:
        if m.level == 0:
            return observation_probs(m.frame, m.belief, a)
        _, po = self._dp(m).predict(m.step, m.belief.joint, a)
        return po

    def update(self, m: Model, a: int, o: int, new_id: int) -> Model:
        if m.level == 0:
            return Model(belief_update(m.frame, m.belief, a, o), m.frame, 0, new_id)
        dp = self._dp(m)
        nxt, po = dp.predict(m.step, m.belief.joint, a)
        if po[o] <= ZERO_PROB or nxt[o].sum() <= 0:
            raise ImpossibleObservationError(f"observation {o} impossible for model {m.id}")
        b = InteractiveBelief(nxt[o] / nxt[o].sum(), m.expansion.ids[m.step + 1])
        return Model(b, m.frame, m.level, new_id, None, m.step + 1, m.expansion)


def _other_frame(space: ModelSpace) -> Frame:
    frames = {id(m.frame): m.frame for m in space}
    if len(frames) != 1:
        raise ValueError("all models in a space must share one frame")
    return next(iter(frames.values()))


def _shared_state(frame: Frame, other: Frame) -> bool:
    return tuple(frame.states) == tuple(other.states)


def _default_prior(space: ModelSpace, frame: Frame) -> InteractiveBelief:
    return uniform_interactive_belief(frame.n_states, space.ids)


def _finish(exp: Expansion, ops: _Ops, prior: InteractiveBelief) -> Expansion:
    """Fill the private-state likelihoods, counts and the mass diagnostics."""
    if not _shared_state(exp.frame, exp.other_frame):
        if exp.models is None:
            raise ValueError("class-level expansions fill their own likelihoods")
        A, O = exp.other_frame.n_actions, exp.other_frame.n_observations
        exp.likelihood = [
            np.array([[ops.obs_probs(m, a) for a in range(A)] for m in models]).reshape(len(models), A, O)
            for models in exp.models]
    exp.trace.counts = [len(i) for i in exp.ids]
    b0 = aggregate_belief(prior, exp.initial_map, exp.ids[0]).joint
    exp.trace.state_mass = state_mass_check(exp, b0)
    return exp


def _dense_tau(rows: Mapping[tuple[int, int, int], int], src: Sequence[int], tgt: Sequence[int],
               A: int, O: int) -> np.ndarray:
    si = {s: k for k, s in enumerate(src)}
    ti = {t: k for k, t in enumerate(tgt)}
    tau = np.zeros((len(src), A, O, len(tgt)))
    for (s, a, o), t in rows.items():
        tau[si[s], a, o, ti[t]] = 1.0
    return tau


def _expand_by_solving(space: ModelSpace, frame: Frame, cfg: SolverConfig,
                       prior: InteractiveBelief, minimize: str | None) -> Expansion:
    """Exact expansion; ``minimize`` is None, "be" or "cluster"."""
    T = cfg.horizon
    ops = _Ops(cfg)
    other = _other_frame(space)
    A, O = other.n_actions, other.n_observations
    trace = ExpansionTrace(cfg.method, T, initial_count=len(space))
    current = [ops.attach(m) for m in space]

    def reduce(models: list[Model], t: int):
        """Apply the step's minimization; returns kept models and id remap."""
        if minimize is None or not models:
            return models, {m.id: m.id for m in models}
        if minimize == "be":
            behaviors = {m.id: ops.behavior(m, T - t) for m in models}
            part = group_be(ModelSpace(tuple(models)), behaviors)
            reason = "be"
        else:
            k = min(cfg.K or len(models), len(models))
            part = mc_cluster(ModelSpace(tuple(models)), k, cfg.seed + t).partition
            reason = "cluster"
        mapping = part.mass_map
        # keep representatives in ascending id and renumber them densely
        reps = sorted(part.representatives)
        renum = {r: (k if t > 0 else r) for k, r in enumerate(reps)}
        by_id = {m.id: m for m in models}
        kept = [by_id[r].with_id(renum[r]) for r in reps]
        for mid in sorted(mapping):
            if mapping[mid] != mid:
                trace.transfers.append(MassTransfer(t, mid, renum[mapping[mid]], reason))
        return kept, {mid: renum[mapping[mid]] for mid in mapping}

    current, init_map = reduce(current, 0)
    ids = [tuple(m.id for m in current)]
    models = [current]
    probs, taus = [], []
    for t in range(T):
        probs.append(np.array([ops.opt(m, T - t) for m in current]).reshape(len(current), A))
        if t == T - 1:
            break
        candidates: list[Model] = []
        rows: dict[tuple[int, int, int], int] = {}
        for m, p in zip(current, probs[-1]):
            for a in np.flatnonzero(p > 0):
                po = ops.obs_probs(m, int(a))
                for o in range(O):
                    if po[o] <= ZERO_PROB:
                        continue
                    new = ops.update(m, int(a), o, len(candidates))
                    rows[(m.id, int(a), o)] = new.id
                    candidates.append(new)
        kept, remap = reduce(candidates, t + 1)
        routed = {}
        seen = set()
        # rows were created in candidate order, so the first row to reach a
        # kept model is the one that created it
        for key, cand in rows.items():
            tgt = remap[cand]
            routed[key] = tgt
            trace.updates.append(UpdateRecord(t, key[0], key[1], key[2], tgt,
                                              "transfer" if tgt in seen else "new"))
            seen.add(tgt)
        taus.append(_dense_tau(routed, ids[-1], [m.id for m in kept], A, O))
        current = kept
        ids.append(tuple(m.id for m in current))
        models.append(current)
    trace.model_counts = [len(i) for i in ids]
    exp = Expansion(cfg.method, T, frame, other, ids, probs, taus, init_map, trace, models=models)
    return _finish(exp, ops, prior)


def expand_exact(space: ModelSpace, frame: Frame, cfg: SolverConfig,
                 prior: InteractiveBelief | None = None, be: bool | None = None) -> Expansion:
    """Full expansion over every optimal action and possible observation.

    With ``be`` (default: method is exact-be) models with identical policy
    trees are merged at every step onto the lowest id.
    """
    if be is None:
        be = cfg.method == "exact-be"
    prior = prior or _default_prior(space, frame)
    return _expand_by_solving(space, frame, cfg, prior, "be" if be else None)


def expand_mc(space: ModelSpace, frame: Frame, cfg: SolverConfig,
              prior: InteractiveBelief | None = None) -> Expansion:
    prior = prior or _default_prior(space, frame)
    return _expand_by_solving(space, frame, cfg, prior, "cluster")


def _select_and_solve(space: list[Model], ops: _Ops, cfg: SolverConfig, trace: ExpansionTrace
                      ) -> dict[int, tuple[PolicyTree, Behavior]]:
    """Solve K random models, then every other model without an epsilon-neighbor.

    A model with a neighbor borrows the neighbor's tree and behavior.
    """
    n = len(space)
    K = n if cfg.K is None else cfg.K
    if K > n:
        warnings.warn(f"K={K} exceeds the {n} initial models; using K={n}", stacklevel=3)
        K = n
    rng = np.random.default_rng(cfg.seed)
    picked = sorted(int(k) for k in rng.choice(n, size=K, replace=False))
    T = cfg.horizon
    sol: dict[int, tuple[PolicyTree, Behavior]] = {}
    for k in picked:
        sol[space[k].id] = (ops.tree(space[k], T), ops.behavior(space[k], T))
    anchors = [space[k].vector for k in picked]
    solved = len(picked)
    for m in space:
        if m.id in sol:
            continue
        j = epsilon_neighbor(m.vector, anchors, cfg.epsilon)
        if j is None:
            sol[m.id] = (ops.tree(m, T), ops.behavior(m, T))
            solved += 1
        else:
            sol[m.id] = sol[space[picked[j]].id]
            trace.skipped.append((m.id, space[picked[j]].id))
    trace.solved_initial = solved
    return sol


def _dmu_structure(space: ModelSpace, frame: Frame, cfg: SolverConfig, ops: _Ops,
                   trace: ExpansionTrace):
    """Per-step models, keyed on their solutions so that only updates into
    solutions not met before at that step create a model."""
    T = cfg.horizon
    other = _other_frame(space)
    A, O = other.n_actions, other.n_observations
    current = [ops.attach(m) for m in space]
    sol = _select_and_solve(current, ops, cfg, trace)
    builder = GraphBuilder(T, O if T > 1 else 0)
    roots = builder.add_trees([sol[m.id][0] for m in current])
    graph = builder.build({m.id: v for m, v in zip(current, roots)},
                          other if other.is_level0 else None)

    # step 0: models with one solution are behaviorally equivalent
    first: dict[Behavior, int] = {}
    init_map = {}
    kept = []
    for m in current:
        beh = sol[m.id][1]
        if beh in first:
            init_map[m.id] = first[beh]
            trace.transfers.append(MassTransfer(0, m.id, first[beh], "be"))
        else:
            first[beh] = m.id
            init_map[m.id] = m.id
            kept.append((m, beh))
    steps = [kept]
    probs, taus = [], []
    for t in range(T):
        p = np.zeros((len(kept), A))
        for k, (_, beh) in enumerate(kept):
            p[k, list(beh.actions)] = 1.0 / len(beh.actions)
        probs.append(p)
        if t == T - 1:
            break
        encountered: dict[Behavior, int] = {}
        nxt: list[tuple[Model, Behavior]] = []
        rows = {}
        for m, beh in kept:
            for a in beh.actions:
                po = ops.obs_probs(m, a)
                for o in range(O):
                    if po[o] <= ZERO_PROB:
                        continue
                    child = beh.child(a, o)
                    new = None
                    if child is None:
                        # borrowed solution never reaches this branch: solve it
                        new = ops.update(m, a, o, len(nxt))
                        child = ops.behavior(new, T - t - 1)
                    if child in encountered:
                        rows[(m.id, a, o)] = encountered[child]
                        trace.updates.append(UpdateRecord(t, m.id, a, o, encountered[child], "transfer"))
                        continue
                    if new is None:
                        new = ops.update(m, a, o, len(nxt))
                    encountered[child] = new.id
                    nxt.append((new, child))
                    rows[(m.id, a, o)] = new.id
                    trace.updates.append(UpdateRecord(t, m.id, a, o, new.id, "new"))
        taus.append(_dense_tau(rows, [m.id for m, _ in kept], [m.id for m, _ in nxt], A, O))
        kept = nxt
        steps.append(kept)
    return graph, steps, probs, taus, init_map


def expand_dmu(space: ModelSpace, frame: Frame, cfg: SolverConfig,
               prior: InteractiveBelief | None = None) -> Expansion:
    """Discriminative expansion: update a model only into unseen graph vertices."""
    prior = prior or _default_prior(space, frame)
    ops = _Ops(cfg)
    trace = ExpansionTrace(cfg.method, cfg.horizon, initial_count=len(space))
    graph, steps, probs, taus, init_map = _dmu_structure(space, frame, cfg, ops, trace)
    ids = [tuple(m.id for m, _ in s) for s in steps]
    trace.model_counts = [len(i) for i in ids]
    exp = Expansion(cfg.method, cfg.horizon, frame, _other_frame(space), ids, probs, taus,
                    init_map, trace, models=[[m for m, _ in s] for s in steps], graph=graph,
                    behaviors=[[b for _, b in s] for s in steps])
    return _finish(exp, ops, prior)


def expand_ae(space: ModelSpace, frame: Frame, cfg: SolverConfig,
              prior: InteractiveBelief | None = None) -> Expansion:
    """Group models by their action at each step and route mass between classes."""
    prior = prior or _default_prior(space, frame)
    base = expand_dmu(space, frame, cfg, prior)
    T = cfg.horizon
    A, O = base.other_frame.n_actions, base.other_frame.n_observations
    trace = ExpansionTrace(cfg.method, T, initial_count=len(space),
                           solved_initial=base.trace.solved_initial, skipped=base.trace.skipped)
    trace.model_counts = list(base.trace.model_counts)
    b0 = aggregate_belief(prior, base.initial_map, base.ids[0]).joint
    joints = propagate_mass(base, b0)

    classes, class_ids, member_of = [], [], []
    for t in range(T):
        cls = ae_partition(base.ids[t], base.action_dist(t), t)
        classes.append(cls)
        class_ids.append(tuple(range(len(cls))))
        member_of.append({m: k for k, c in enumerate(cls) for m in c.members})

    probs = [np.array([c.action_dist.probs for c in cls]).reshape(len(cls), A) for cls in classes]
    taus = []
    for t in range(T - 1):
        ib = InteractiveBelief(_class_weights(joints[t], classes[t], base.ids[t]), base.ids[t])
        upd = ae_mod_cpt(classes[t], ib, base.mod_cpt(t), class_ids=class_ids[t])
        trace.exact_flags.append(upd.exact)
        trace.divergence.append(upd.max_divergence)
        tau = np.zeros((len(classes[t]), A, O, len(classes[t + 1])))
        for (p, a, o), row in upd.cpt.rows.items():
            for m, w in zip(upd.cpt.targets, row):
                if w:
                    tau[p, a, o, member_of[t + 1][m]] += w
        for p, a, o in zip(*np.nonzero(tau.sum(axis=3))):
            for q in np.flatnonzero(tau[p, a, o]):
                trace.updates.append(UpdateRecord(t, int(p), int(a), int(o), int(q), "class",
                                                  float(tau[p, a, o, q])))
        taus.append(tau)
    for m, c in member_of[0].items():
        trace.transfers.append(MassTransfer(0, m, c, "ae"))
    init_map = {orig: member_of[0][rep] for orig, rep in base.initial_map.items()}

    likelihood = None
    if base.likelihood is not None:
        likelihood = []
        for t in range(T):
            ps = joints[t].sum(axis=0)
            L = np.zeros((len(classes[t]), A, O))
            for k, c in enumerate(classes[t]):
                cols = [base.ids[t].index(m) for m in c.members]
                w = ps[cols]
                w = w / w.sum() if w.sum() > 0 else np.full(len(cols), 1.0 / len(cols))
                L[k] = np.tensordot(w, base.likelihood[t][cols], axes=1)
            likelihood.append(L)
    exp = Expansion(cfg.method, T, frame, base.other_frame, class_ids, probs, taus, init_map,
                    trace, models=None, likelihood=likelihood, graph=base.graph, classes=classes)
    exp.trace.counts = [len(c) for c in class_ids]
    exp.trace.state_mass = state_mass_check(exp, aggregate_belief(prior, init_map, class_ids[0]).joint)
    exp.base = base
    return exp


def _class_weights(J: np.ndarray, classes, ids) -> np.ndarray:
    """Joint mass for class-level weighting; a class the prior never reaches
    gets a small uniform weight so its rows are still defined."""
    J = J.copy()
    col = {m: k for k, m in enumerate(ids)}
    for c in classes:
        cols = [col[m] for m in c.members]
        if J[:, cols].sum() <= 0:
            J[:, cols] = 1e-9 / J.size
    return _normalized(J)


def _normalized(J: np.ndarray) -> np.ndarray:
    s = J.sum()
    return J / s if s > 0 else np.full(J.shape, 1.0 / J.size)


def expand(space: ModelSpace, frame: Frame, cfg: SolverConfig,
           prior: InteractiveBelief | None = None) -> Expansion:
    if len(space) == 0:
        raise ValueError("the other agent's model space is empty")
    if prior is not None and set(prior.model_ids) != set(space.ids):
        raise ValueError("prior does not cover exactly the model space")
    m = cfg.method
    if m in ("exact", "exact-be"):
        return expand_exact(space, frame, cfg, prior)
    if m == "dmu":
        return expand_dmu(space, frame, cfg, prior)
    if m == "ae":
        return expand_ae(space, frame, cfg, prior)
    return expand_mc(space, frame, cfg, prior)


# ------------------------------------------------------ subject look-ahead

class InteractiveDP:
    """Look-ahead over joint beliefs (S x models at step t) of an expansion.

    Memo entries hold the chosen tree, its alpha table over (s, m) and the
    Q-values, keyed on the step and the rounded joint belief.
    """

    def __init__(self, exp: Expansion, tie_tol: float = TOL):
        self.exp = exp
        self.tie_tol = tie_tol
        f = exp.frame
        self.A = f.n_actions
        self.O = f.n_observations
        # M[a][s, a_other, s', o] = T(s'|s,a,a_other) O(o|s',a,a_other)
        self._step = [f.transition[:, a, :, :, None] * f.observation_fn[None, :, a, :, :].transpose(0, 2, 1, 3)
                      for a in range(self.A)]
        self._memo: dict = {}

    def predict(self, t: int, B: np.ndarray, a: int) -> tuple[np.ndarray, np.ndarray]:
        """Unnormalized next joints per observation (O, S', n') and Pr(o | B, a)."""
        exp = self.exp
        W = B[:, :, None] * exp.action_probs[t][None]
        X = np.einsum("sma,sato->tmao", W, self._step[a])
        po = X.sum(axis=(0, 1, 2))
        nxt = np.einsum("tmao,tamn->otn", X, exp.routing(t, a))
        return nxt, po

    def node(self, t: int, B: np.ndarray):
        key = (t, memo_key(B))
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        exp, f = self.exp, self.exp.frame
        P = exp.action_probs[t]
        last = t == exp.horizon - 1
        alphas, kids, dead_sets = [], [], []
        for a in range(self.A):
            alpha = np.einsum("ma,sa->sm", P, f.reward[:, a, :])
            children, dead = [], set()
            if not last:
                nxt, po = self.predict(t, B, a)
                n_next = exp.count(t + 1)
                child_alpha = np.empty((self.O, f.n_states, n_next))
                for o in range(self.O):
                    mass = nxt[o].sum()
                    if po[o] > ZERO_PROB and mass > 0:
                        post = nxt[o] / mass
                    else:
                        post = np.full((f.n_states, n_next), 1.0 / (f.n_states * n_next))
                        dead.add(o)
                    tr, al, _ = self.node(t + 1, post)
                    children.append(tr)
                    child_alpha[o] = al
                Z = np.einsum("tamn,otn->tamo", exp.routing(t, a), child_alpha)
                Z2 = np.einsum("sato,tamo->sam", self._step[a], Z)
                alpha = alpha + np.einsum("ma,sam->sm", P, Z2)
            alphas.append(alpha)
            kids.append(children)
            dead_sets.append(dead)
        q = np.array([(al * B).sum() for al in alphas])
        best = int(np.flatnonzero(q >= q.max() - self.tie_tol)[0])
        out = (PolicyTree(best, kids[best], frozenset(dead_sets[best])), alphas[best], q)
        self._memo[key] = out
        return out


def dp_for(exp: Expansion, tie_tol: float = TOL) -> InteractiveDP:
    dp = exp._dp.get(tie_tol)
    if dp is None:
        dp = exp._dp[tie_tol] = InteractiveDP(exp, tie_tol)
    return dp


# ------------------------------------------------------------- public API

def interactive_belief_update(b: InteractiveBelief, a_i: int, o_i: int,
                              frames: tuple[Frame, Frame], mod_cpt: ModCPT,
                              action_dists: Mapping[int, ActionDistribution],
                              other_likelihood: Mapping[int, np.ndarray] | None = None
                              ) -> InteractiveBelief:
    """Bayes update of a joint (state, model) belief after the owner acts and observes.

    ``other_likelihood`` maps model id -> (A_other, O_other) table and is only
    needed when the other agent's observations live on a private state space.
    """
    frame, other = frames
    ids = b.model_ids
    A = other.n_actions
    P = np.array([action_dists[m].probs for m in ids]).reshape(len(ids), A)
    cpt = ModCPT(ids, mod_cpt.targets, {k: v for k, v in mod_cpt.rows.items() if k[0] in ids})
    tau = cpt.dense(A, other.n_observations)
    lik = None
    if other_likelihood is not None:
        lik = [np.array([other_likelihood[m] for m in ids])]
    exp = Expansion("update", 2, frame, other, [ids, cpt.targets], [P, np.zeros((len(cpt.targets), A))],
                    [tau], {}, ExpansionTrace("update", 2), likelihood=lik)
    if lik is None and not _shared_state(frame, other):
        raise ValueError("private-state other agents need other_likelihood")
    nxt, po = InteractiveDP(exp).predict(0, b.joint, a_i)
    mass = nxt[o_i].sum()
    if po[o_i] <= ZERO_PROB or mass <= 0:
        raise ImpossibleObservationError(
            f"observation {frame.observations[o_i]!r} is impossible after {frame.actions[a_i]!r}")
    return InteractiveBelief(nxt[o_i] / mass, cpt.targets)


def solve(model: Model, config: SolverConfig) -> tuple[PolicyTree, float, ExpansionTrace]:
    """Best-response policy tree and expected utility for ``model``."""
    if model.level == 0:
        tree, value = solver_for(model.frame, config.tie_tol).solve(model.belief, config.horizon)
        return tree, value, ExpansionTrace(config.method, config.horizon)
    exp = solve_expansion(model, config)
    B0 = aggregate_belief(model.belief, exp.initial_map, exp.ids[0]).joint
    tree, alpha, _ = dp_for(exp, config.tie_tol).node(0, B0)
    return tree, float((alpha * B0).sum()), exp.trace


def solve_expansion(model: Model, config: SolverConfig) -> Expansion:
    if model.other_space is None:
        raise ValueError("nested model has no model space for the other agent")
    if set(model.belief.model_ids) != set(model.other_space.ids):
        raise ValueError("belief columns do not match the other agent's model ids")
    log.info("expanding %d models with %s over %d steps",
             len(model.other_space), config.method, config.horizon)
    return expand(model.other_space, model.frame, config, prior=model.belief)


def q_values(model: Model, config: SolverConfig) -> np.ndarray:
    """Root Q-values of the subject (for inspection and tests)."""
    exp = solve_expansion(model, config)
    B0 = aggregate_belief(model.belief, exp.initial_map, exp.ids[0]).joint
    return dp_for(exp, config.tie_tol).node(0, B0)[2].copy()


def reward_range(frame: Frame) -> float:
    return float(frame.reward.max() - frame.reward.min())


def prediction_error_bound(eps: float, T: int, frame_j: Frame, one_step: bool = False) -> float:
    """Worst-case prediction loss from assigning epsilon-close models a neighbor's policy.

    The full bound grows with T**2; ``one_step`` gives the per-association
    term that grows with T.
    """
    if eps < 0:
        raise ValueError("epsilon must be nonnegative")
    if T < 1:
        raise ValueError("horizon must be at least 1")
    return reward_range(frame_j) * (T if one_step else T * T) * eps
