"""File formats: JSON documents with a schema tag, CSV plus a JSON sidecar for
traces and simulation reports."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .core import Belief, Frame, InteractiveBelief, Model, ModelSpace, ValidationError
from .domains import DomainSpec
from .policy_graph import PolicyGraph, Vertex
from .policy_tree import PolicyTree
from .solver import ExpansionTrace, MassTransfer, UpdateRecord

SCHEMA_DOMAIN = "idid.domain/1"
SCHEMA_POLICY = "idid.policy/1"
SCHEMA_GRAPH = "idid.graph/1"
SCHEMA_TRACE = "idid.trace/1"
SCHEMA_REPORT = "idid.report/1"


class FormatError(ValueError):
    pass


def dump_json(doc: dict, path: str | Path) -> None:
    # fixed key order and repr floats keep repeated runs byte-identical
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def load_json(path: str | Path, schema: str | None = None) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: not valid JSON ({e})") from None
    if not isinstance(doc, dict):
        raise FormatError(f"{path}: expected a JSON object")
    if schema is not None and doc.get("schema") != schema:
        raise FormatError(f"{path}: schema is {doc.get('schema')!r}, expected {schema!r}")
    return doc


# ------------------------------------------------------------------ frames

def frame_to_dict(f: Frame) -> dict:
    return {
        "name": f.name,
        "agent_role": f.agent_role,
        "states": list(f.states),
        "actions": list(f.actions),
        "other_actions": list(f.other_actions),
        "observations": list(f.observations),
        "transition": f.transition.tolist(),
        "observation_fn": f.observation_fn.tolist(),
        "reward": f.reward.tolist(),
    }


def frame_from_dict(d: dict) -> Frame:
    try:
        return Frame(d["name"], d["agent_role"], d["states"], d["actions"], d["observations"],
                     np.array(d["transition"], dtype=float), np.array(d["observation_fn"], dtype=float),
                     np.array(d["reward"], dtype=float), d.get("other_actions", ()))
    except KeyError as e:
        raise FormatError(f"frame is missing field {e}") from None


def domain_to_dict(spec: DomainSpec) -> dict:
    return {
        "schema": SCHEMA_DOMAIN,
        "name": spec.name,
        "subject_frame": frame_to_dict(spec.subject_frame),
        "other_frame": frame_to_dict(spec.other_frame),
        "default_beliefs": [list(b) for b in spec.default_beliefs],
        "shared_state": spec.shared_state,
        "symmetric": spec.symmetric,
    }


def domain_from_dict(d: dict) -> DomainSpec:
    if d.get("schema") != SCHEMA_DOMAIN:
        raise FormatError(f"domain schema is {d.get('schema')!r}, expected {SCHEMA_DOMAIN!r}")
    return DomainSpec(d["name"], frame_from_dict(d["subject_frame"]), frame_from_dict(d["other_frame"]),
                      tuple(tuple(b) for b in d.get("default_beliefs", ())),
                      bool(d.get("shared_state", True)), bool(d.get("symmetric", True)))


def save_domain(spec: DomainSpec, path: str | Path) -> None:
    dump_json(domain_to_dict(spec), path)


def load_domain(path: str | Path) -> DomainSpec:
    return domain_from_dict(load_json(path, SCHEMA_DOMAIN))


# ------------------------------------------------------------ trees, graphs

def graph_to_dict(g: PolicyGraph) -> dict:
    return {
        "schema": SCHEMA_GRAPH,
        "horizon": g.horizon,
        "n_observations": g.n_observations,
        "vertices": [[v.layer, v.action, list(v.children)] for v in g.vertices],
        "roots": [[k, v] for k, v in sorted(g.roots.items())],
        "comparisons": g.comparisons,
    }


def graph_from_dict(d: dict) -> PolicyGraph:
    verts = tuple(Vertex(k, layer, a, tuple(kids)) for k, (layer, a, kids) in enumerate(d["vertices"]))
    return PolicyGraph(verts, d["horizon"], d["n_observations"], {k: v for k, v in d["roots"]},
                       None, d.get("comparisons", 0))


# ------------------------------------------------------------ model spaces

class _Frames:
    """Resolves frame roles to one shared Frame object each (solver caches key on identity)."""

    def __init__(self, spec: DomainSpec):
        self.spec = spec
        self._other1: Frame | None = None

    def get(self, level: int) -> Frame:
        if level == 0:
            return self.spec.other_frame
        if level == 1:
            if self._other1 is None:
                self._other1 = self.spec.frame(1, "other")
            return self._other1
        raise FormatError(f"unsupported model level {level}")


def space_to_dict(space: ModelSpace) -> list[dict]:
    out = []
    for m in space:
        if m.level == 0:
            out.append({"id": m.id, "level": 0, "belief": m.belief.probs.tolist()})
        else:
            out.append({"id": m.id, "level": m.level, "joint": m.belief.joint.tolist(),
                        "model_ids": list(m.belief.model_ids),
                        "other_space": space_to_dict(m.other_space)})
    return out


def space_from_dict(items: list[dict], spec: DomainSpec, frames: _Frames | None = None,
                    shared: dict | None = None) -> ModelSpace:
    frames = frames or _Frames(spec)
    shared = {} if shared is None else shared
    key = json.dumps(items, sort_keys=True)
    if key in shared:
        return shared[key]
    models = []
    for d in items:
        level = int(d["level"])
        if level == 0:
            models.append(Model(Belief(d["belief"]), frames.get(0), 0, int(d["id"])))
        else:
            inner = space_from_dict(d["other_space"], spec, frames, shared)
            b = InteractiveBelief(np.array(d["joint"], dtype=float), tuple(d["model_ids"]))
            models.append(Model(b, frames.get(level), level, int(d["id"]), inner))
    space = ModelSpace(tuple(models))
    shared[key] = space
    return space


# ----------------------------------------------------------------- policies

def policy_to_dict(tree: PolicyTree, value: float, model: Model, spec: DomainSpec,
                   config) -> dict:
    return {
        "schema": SCHEMA_POLICY,
        "domain": spec.name,
        "level": model.level,
        "horizon": tree.horizon,
        "method": config.method,
        "K": config.K,
        "epsilon": config.epsilon,
        "seed": config.seed,
        "expected_utility": value,
        "actions": list(model.frame.actions),
        "observations": list(model.frame.observations),
        "tree": tree.to_dict(),
        "belief": {"joint": model.belief.joint.tolist(), "model_ids": list(model.belief.model_ids)},
        "models": space_to_dict(model.other_space),
    }


def save_policy(path: str | Path, tree: PolicyTree, value: float, model: Model, spec: DomainSpec,
                config) -> None:
    dump_json(policy_to_dict(tree, value, model, spec, config), path)


def load_policy(path: str | Path) -> dict:
    doc = load_json(path, SCHEMA_POLICY)
    for k in ("tree", "belief", "models", "level"):
        if k not in doc:
            raise FormatError(f"{path}: policy file has no {k!r} field")
    doc["tree"] = PolicyTree.from_dict(doc["tree"])
    return doc


def policy_model(doc: dict, spec: DomainSpec) -> Model:
    """Rebuild the subject's model recorded in a policy file."""
    frames = _Frames(spec)
    space = space_from_dict(doc["models"], spec, frames)
    b = InteractiveBelief(np.array(doc["belief"]["joint"], dtype=float),
                          tuple(doc["belief"]["model_ids"]))
    if b.n_states != spec.subject_frame.n_states:
        raise ValidationError("policy belief does not match the domain's states")
    return Model(b, spec.subject_frame, int(doc["level"]), 0, space)


# ------------------------------------------------------------------- traces

TRACE_COLUMNS = ("t", "count", "model_count", "updates", "transfers", "exact", "divergence",
                 "state_mass_min", "state_mass_max")


def trace_to_dict(trace: ExpansionTrace) -> dict:
    return {
        "schema": SCHEMA_TRACE,
        "method": trace.method,
        "horizon": trace.horizon,
        "initial_count": trace.initial_count,
        "counts": trace.counts,
        "model_counts": trace.model_counts,
        "updates": [asdict(u) for u in trace.updates],
        "transfers": [asdict(x) for x in trace.transfers],
        "exact_flags": trace.exact_flags,
        "divergence": trace.divergence,
        "state_mass": trace.state_mass,
        "solved_initial": trace.solved_initial,
        "skipped": [list(p) for p in trace.skipped],
    }


def trace_from_dict(d: dict) -> ExpansionTrace:
    if d.get("schema") != SCHEMA_TRACE:
        raise FormatError(f"trace schema is {d.get('schema')!r}, expected {SCHEMA_TRACE!r}")
    return ExpansionTrace(
        d["method"], d["horizon"], d["initial_count"], list(d["counts"]), list(d["model_counts"]),
        [UpdateRecord(**u) for u in d["updates"]], [MassTransfer(**x) for x in d["transfers"]],
        list(d["exact_flags"]), list(d["divergence"]), [list(r) for r in d["state_mass"]],
        d["solved_initial"], [tuple(p) for p in d["skipped"]])


def trace_rows(trace: ExpansionTrace) -> list[dict]:
    rows = []
    for t in range(len(trace.counts)):
        mass = trace.state_mass[t] if t < len(trace.state_mass) else []
        rows.append({
            "t": t,
            "count": trace.counts[t],
            "model_count": trace.model_counts[t] if t < len(trace.model_counts) else trace.counts[t],
            "updates": sum(1 for u in trace.updates if u.t == t),
            "transfers": sum(1 for x in trace.transfers if x.t == t),
            "exact": "" if t >= len(trace.exact_flags) else int(trace.exact_flags[t]),
            "divergence": "" if t >= len(trace.divergence) else repr(trace.divergence[t]),
            "state_mass_min": repr(min(mass)) if mass else "",
            "state_mass_max": repr(max(mass)) if mass else "",
        })
    return rows


def write_csv(path: str | Path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def read_csv(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def sidecar(path: str | Path) -> Path:
    p = Path(path)
    return p.with_name(p.stem + ".json") if p.suffix == ".csv" else p.with_suffix(p.suffix + ".json")


def save_trace(trace: ExpansionTrace, path: str | Path) -> tuple[Path, Path]:
    """Write the per-step CSV at ``path`` and the full record beside it."""
    p = Path(path)
    write_csv(p, TRACE_COLUMNS, trace_rows(trace))
    side = sidecar(p)
    dump_json(trace_to_dict(trace), side)
    return p, side


def load_trace(path: str | Path) -> ExpansionTrace:
    """Load from the JSON record, or from a CSV via its sidecar."""
    p = Path(path)
    if p.suffix == ".csv":
        p = sidecar(p)
    if not p.exists():
        raise FormatError(f"{p}: trace record not found")
    return trace_from_dict(load_json(p, SCHEMA_TRACE))
