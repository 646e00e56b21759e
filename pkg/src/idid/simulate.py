"""Co-execution of the subject's policy against sampled true models of the other agent."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import TOL, InteractiveBelief, Model, ModelSpace
from .domains import DomainSpec
from .io import SCHEMA_REPORT, dump_json, load_json, read_csv, sidecar, write_csv
from .policy_tree import PolicyTree
from .solver import SolverConfig, solve


@dataclass
class SimulationReport:
    runs: int
    seed: int
    mean_reward: float
    std_dev: float
    run_seeds: list[int]
    model_ids: list[int]
    rewards: list[float]
    trajectories: list[list[tuple]] | None = field(default=None, repr=False)

    @classmethod
    def from_runs(cls, seed: int, run_seeds, model_ids, rewards, trajectories=None) -> "SimulationReport":
        r = np.asarray(rewards, dtype=float)
        # population std (ddof=0) so a constant reward gives exactly 0
        return cls(len(r), seed, float(r.mean()), float(r.std()), list(run_seeds),
                   list(model_ids), [float(x) for x in r], trajectories)

    def recomputed(self) -> tuple[float, float]:
        r = np.asarray(self.rewards, dtype=float)
        return float(r.mean()), float(r.std())


def _other_tree(model: Model, horizon: int, cfg: SolverConfig) -> PolicyTree:
    if model.level == 0:
        return solve(model, cfg)[0]
    # nested true models are solved with the lossless DMU setting
    exact = SolverConfig("dmu", horizon, K=None, epsilon=0.0, seed=cfg.seed, tie_tol=cfg.tie_tol)
    return solve(model, exact)[0]


def _draw(rng: np.random.Generator, p: np.ndarray) -> int:
    return int(rng.choice(len(p), p=p / p.sum()))


def simulate(policy: PolicyTree, spec: DomainSpec, b0: InteractiveBelief, space: ModelSpace,
             runs: int = 200, seed: int = 0, tie_tol: float = TOL,
             keep_trajectories: bool = False) -> SimulationReport:
    """Average subject reward over ``runs`` episodes of the policy's length.

    Each run draws (state, true model) from ``b0``, solves that model for the
    other agent's policy and executes both policies against the subject's
    frame.  When the other agent's frame is on a private state space its own
    state is drawn from its belief and evolves under its own frame.
    """
    if runs < 1:
        raise ValueError("runs must be at least 1")
    fi = spec.subject_frame
    T = policy.horizon
    policy.check_arity(fi.n_actions, fi.n_observations)
    if set(b0.model_ids) != set(space.ids):
        raise ValueError("belief columns do not match the model space")
    cfg = SolverConfig("exact", T, tie_tol=tie_tol)
    trees: dict[int, PolicyTree] = {}
    children = np.random.SeedSequence(seed).spawn(runs)
    run_seeds = [int(c.generate_state(1)[0]) for c in children]
    flat = b0.joint.ravel()
    model_ids, rewards, trajs = [], [], []
    for rs in run_seeds:
        rng = np.random.default_rng(rs)
        s, k = divmod(_draw(rng, flat), len(b0.model_ids))
        mid = b0.model_ids[k]
        mj = space.get(mid)
        if mid not in trees:
            trees[mid] = _other_tree(mj, T, cfg)
        ti, tj = policy, trees[mid]
        fj = mj.frame
        private = not spec.shared_state
        sj = _draw(rng, mj.belief.probs) if private and mj.level == 0 else None
        total, traj = 0.0, []
        for step in range(T):
            ai, aj = ti.action, tj.action
            total += float(fi.reward[s, ai, aj])
            s2 = _draw(rng, fi.transition[s, ai, aj])
            oi = _draw(rng, fi.observation_fn[s2, ai, aj])
            if private and sj is not None:
                sj = _draw(rng, fj.transition[sj, aj])
                oj = _draw(rng, fj.observation_fn[sj, aj])
            elif fj.is_level0:
                oj = _draw(rng, fj.observation_fn[s2, aj])
            else:
                oj = _draw(rng, fj.observation_fn[s2, aj, ai])
            if keep_trajectories:
                traj.append((step, s, ai, aj, oi, oj))
            s = s2
            if step < T - 1:
                ti, tj = ti.child(oi), tj.child(oj)
        model_ids.append(mid)
        rewards.append(total)
        trajs.append(traj)
    return SimulationReport.from_runs(seed, run_seeds, model_ids, rewards,
                                      trajs if keep_trajectories else None)


REPORT_COLUMNS = ("run", "seed", "model_id", "reward")


def save_report(report: SimulationReport, path: str | Path) -> tuple[Path, Path]:
    p = Path(path)
    rows = [{"run": k, "seed": s, "model_id": m, "reward": repr(r)}
            for k, (s, m, r) in enumerate(zip(report.run_seeds, report.model_ids, report.rewards))]
    write_csv(p, REPORT_COLUMNS, rows)
    side = sidecar(p)
    doc = {"schema": SCHEMA_REPORT, "runs": report.runs, "seed": report.seed,
           "mean_reward": report.mean_reward, "std_dev": report.std_dev}
    if report.trajectories is not None:
        doc["trajectories"] = [[list(x) for x in t] for t in report.trajectories]
    dump_json(doc, side)
    return p, side


def load_report(path: str | Path) -> SimulationReport:
    p = Path(path)
    meta = load_json(sidecar(p), SCHEMA_REPORT)
    rows = read_csv(p)
    trajs = meta.get("trajectories")
    return SimulationReport(
        meta["runs"], meta["seed"], meta["mean_reward"], meta["std_dev"],
        [int(r["seed"]) for r in rows], [int(r["model_id"]) for r in rows],
        [float(r["reward"]) for r in rows],
        [[tuple(x) for x in t] for t in trajs] if trajs is not None else None)
