import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import subject_model
from idid.core import Frame
from idid.domains import builtin, nested_model_space
from idid.io import (FormatError, domain_from_dict, domain_to_dict, graph_from_dict, graph_to_dict,
                     load_domain, load_json, load_policy, load_trace, policy_model, read_csv,
                     save_domain, save_policy, save_trace, sidecar, space_from_dict, space_to_dict)
from idid.policy_graph import expand as unroll
from idid.policy_tree import PolicyTree
from idid.solver import SolverConfig, expand, solve


def _frames_equal(a: Frame, b: Frame) -> bool:
    return (a.name == b.name and a.states == b.states and a.actions == b.actions
            and a.observations == b.observations and tuple(a.other_actions) == tuple(b.other_actions)
            and np.array_equal(a.transition, b.transition)
            and np.array_equal(a.observation_fn, b.observation_fn)
            and np.array_equal(a.reward, b.reward))


@pytest.mark.parametrize("name", ["tiger", "mm", "uav3"])
def test_domain_roundtrip(tmp_path, name):
    spec = builtin(name)
    save_domain(spec, tmp_path / "d.json")
    back = load_domain(tmp_path / "d.json")
    assert _frames_equal(spec.subject_frame, back.subject_frame)
    assert _frames_equal(spec.other_frame, back.other_frame)
    assert back.shared_state == spec.shared_state and back.symmetric == spec.symmetric
    assert domain_to_dict(back) == domain_to_dict(spec)


def test_domain_schema_checked():
    d = domain_to_dict(builtin("tiger"))
    d["schema"] = "idid.domain/9"
    with pytest.raises(FormatError):
        domain_from_dict(d)


def test_bad_json_is_format_error(tmp_path):
    p = tmp_path / "x.json"
    p.write_text("{not json")
    with pytest.raises(FormatError):
        load_json(p)
    p.write_text("[1, 2]")
    with pytest.raises(FormatError):
        load_json(p)


def _trees(depth: int, A: int, O: int):
    if depth == 1:
        return st.builds(PolicyTree, st.integers(0, A - 1))
    return st.builds(PolicyTree, st.integers(0, A - 1), st.lists(_trees(depth - 1, A, O),
                                                                min_size=O, max_size=O))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 3).flatmap(lambda d: _trees(d, 3, 2)))
def test_tree_roundtrip(tree):
    d = json.loads(json.dumps(tree.to_dict()))
    assert PolicyTree.from_dict(d) == tree


def test_graph_roundtrip(tiger):
    model = subject_model(tiger, [0.1, 0.5, 0.9])
    exp = expand(model.other_space, model.frame, SolverConfig("dmu", 3), model.belief)
    g = exp.graph
    back = graph_from_dict(json.loads(json.dumps(graph_to_dict(g))))
    assert back.roots == g.roots and len(back) == len(g)
    for v in g.root_vertices():
        assert unroll(back, v) == unroll(g, v)


def test_nested_space_roundtrip_shares_inner_space(tiger):
    space = nested_model_space(tiger, 2, [0.2, 0.7], inner=[0.3, 0.6])
    back = space_from_dict(json.loads(json.dumps(space_to_dict(space))), tiger)
    assert back.ids == space.ids
    inner = [m.other_space for m in back]
    assert inner[0] is inner[1]
    assert back.models[0].frame is back.models[1].frame
    for a, b in zip(space, back):
        assert np.array_equal(a.belief.joint, b.belief.joint)


def test_policy_roundtrip(tmp_path, tiger):
    model = subject_model(tiger, [0.2, 0.5])
    cfg = SolverConfig("dmu", 2)
    tree, value, _ = solve(model, cfg)
    save_policy(tmp_path / "p.json", tree, value, model, tiger, cfg)
    doc = load_policy(tmp_path / "p.json")
    assert doc["tree"] == tree and doc["expected_utility"] == value and doc["method"] == "dmu"
    again = policy_model(doc, tiger)
    assert solve(again, cfg)[:2] == (tree, value)


def test_policy_missing_field(tmp_path):
    (tmp_path / "p.json").write_text(json.dumps({"schema": "idid.policy/1", "tree": {}}))
    with pytest.raises(FormatError):
        load_policy(tmp_path / "p.json")


@pytest.mark.parametrize("method", ["exact", "dmu", "ae"])
def test_trace_roundtrip(tmp_path, tiger, method):
    model = subject_model(tiger, [0.01, 0.05, 0.5, 0.95])
    trace = solve(model, SolverConfig(method, 3))[2]
    csv_path, side = save_trace(trace, tmp_path / "t.csv")
    assert side == tmp_path / "t.json"
    assert load_trace(csv_path) == trace
    assert load_trace(side) == trace
    rows = read_csv(csv_path)
    assert [int(r["count"]) for r in rows] == trace.counts
    assert sum(int(r["updates"]) for r in rows) == len(trace.updates)


def test_trace_missing_record(tmp_path):
    with pytest.raises(FormatError):
        load_trace(tmp_path / "nothing.csv")


def test_sidecar_names():
    assert sidecar("a/b.csv").name == "b.json"
    assert sidecar("a/b.txt").name == "b.txt.json"
