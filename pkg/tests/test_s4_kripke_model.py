import json

import pytest

from src.errors import EmptyInitialError, SchemaError, TotalityError
from src.s3_flowgraph import BRANCH, ENTRY, ERROR, EXIT, build_cfg, method_names
from src.s4_kripke_model import KripkeStructure, check_model, emit, from_cfg, is_proposition, load


def small_model_json(**overrides):
    document = {
        "version": 1,
        "states": [{"id": 0, "labels": ["entry"]}, {"id": 1, "labels": ["exit", "terminated"]}],
        "initial": [0],
        "transitions": [[0, 1], [1, 1]],
    }
    document.update(overrides)
    return json.dumps(document)


def test_history_model_structure(history_cfg, history_model):
    assert history_model.states == tuple(range(10))
    assert history_model.initial == frozenset({0})
    expected = {(e.source, e.target) for e in history_cfg.edges} | {(7, 7), (9, 9)}
    assert history_model.transitions == frozenset(expected)


def test_history_model_labels(history_model):
    assert history_model.labels(0) == frozenset({"entry"})
    assert history_model.labels(1) == frozenset({
        "action:isUserAuthorized", "call:Auth.isUserAuthorized", "advice:AccessControl.before", "aspect:AccessControl",
    })
    assert history_model.labels(2) == frozenset({
        "action:branch:isUserAuthorized", "advice:AccessControl.before", "aspect:AccessControl",
    })
    assert history_model.labels(4) == frozenset({"action:fetch", "call:Database.fetch", "prop:sensitive"})
    assert history_model.labels(5) >= {"action:encrypt", "advice:Encryption.around", "prop:encrypted"}
    assert history_model.labels(7) == frozenset({"exit", "terminated"})
    assert history_model.labels(8) == frozenset({
        "action:throw:UnauthorizedAccessException", "advice:AccessControl.before", "aspect:AccessControl",
    })
    assert history_model.labels(9) == frozenset({"error", "terminated"})


def test_action_states(history_model):
    assert [s for s in history_model.states if history_model.is_action_state(s)] == [1, 3, 4, 5, 6, 8]


def test_every_corpus_model_is_total(corpus_woven):
    for name in method_names(corpus_woven.program):
        model = from_cfg(build_cfg(corpus_woven, name))
        check_model(model)
        assert all(model.successors(s) for s in model.states)
        assert all(is_proposition(p) for s in model.states for p in model.labels(s))


def test_advice_states_carry_advice_labels(corpus_woven):
    cfg_ = build_cfg(corpus_woven, "Clinic.consult")
    model = from_cfg(cfg_)
    for node in cfg_.nodes:
        if node.origin.is_advice:
            assert f"advice:{node.origin.aspect}.{node.origin.kind}" in model.labels(node.id)


MARKERS = {ENTRY: {"entry"}, EXIT: {"exit", "terminated"}, ERROR: {"error", "terminated"}}


def node_labels(node):
    """Every label a state may carry, read off its CFG node."""
    if node.kind in MARKERS:
        return MARKERS[node.kind]
    labels = {f"prop:{name}" for name in node.props}
    if node.origin.is_advice:
        labels |= {f"advice:{node.origin.aspect}.{node.origin.kind}", f"aspect:{node.origin.aspect}"}
    if node.kind == BRANCH:
        return labels | {f"action:branch:{node.label}"}
    labels.add(f"action:{node.label}")
    if node.call:
        labels.add(f"call:{node.call}")
    return labels


def test_label_soundness_on_corpus(corpus_woven):
    for name in method_names(corpus_woven.program):
        cfg_ = build_cfg(corpus_woven, name)
        model = from_cfg(cfg_)
        assert model.states == tuple(n.id for n in cfg_.nodes)
        for node in cfg_.nodes:
            labels = model.labels(node.id)
            assert labels == node_labels(node), (name, node.id)
            advice = {p for p in labels if p.startswith("advice:")}
            if node.origin.is_advice:
                assert advice == {f"advice:{node.origin.aspect}.{node.origin.kind}"}
            else:
                assert advice == set()


def test_json_round_trip(corpus_woven):
    for name in method_names(corpus_woven.program):
        model = from_cfg(build_cfg(corpus_woven, name))
        text = emit(model, "json")
        assert load(text) == model
        assert emit(load(text), "json") == text


def test_json_layout(history_model):
    document = json.loads(emit(history_model))
    assert list(document) == ["version", "states", "initial", "transitions"]
    assert document["states"][0] == {"id": 0, "labels": ["entry"]}
    assert document["transitions"][:2] == [[0, 1], [1, 2]]
    assert [7, 7] in document["transitions"]


def test_dot_output(history_model):
    dot = emit(history_model, "dot", "HealthService.requestHistory")
    assert dot.startswith('digraph "health_service_request_history" {')
    assert '    0 [shape=doublecircle, label="0\\nentry"];' in dot
    assert "    9 -> 9;" in dot


def test_unknown_format(history_model):
    with pytest.raises(ValueError):
        emit(history_model, "xml")


def test_load_minimal_model():
    model = load(small_model_json())
    assert model.states == (0, 1)
    assert model.successors(1) == [1]
    assert model.predecessors(1) == [0, 1]
    assert model.vocabulary == frozenset({"entry", "exit", "terminated"})


@pytest.mark.parametrize("text", [
    "not json",
    "[]",
    json.dumps({"version": 1, "states": [], "initial": [0]}),
    small_model_json(extra=True),
    small_model_json(version=2),
    small_model_json(states=[{"id": "0", "labels": []}, {"id": 1, "labels": []}]),
    small_model_json(states=[{"id": True, "labels": []}, {"id": 1, "labels": []}]),
    small_model_json(states=[{"id": 0, "labels": ["bogus:thing"]}, {"id": 1, "labels": []}]),
    small_model_json(states=[{"id": 0, "labels": []}, {"id": 0, "labels": []}]),
    small_model_json(initial=[5]),
    small_model_json(transitions=[[0, 1], [1, 1], [1, 7]]),
    small_model_json(transitions=[[0, 1, 2]]),
])
def test_load_rejects_malformed_models(text):
    with pytest.raises(SchemaError):
        load(text)


def test_load_rejects_missing_initial():
    with pytest.raises(EmptyInitialError):
        load(small_model_json(initial=[]))


def test_load_rejects_dead_ends():
    with pytest.raises(TotalityError) as err:
        load(small_model_json(transitions=[[0, 1]]))
    assert err.value.state == 1


def test_check_model_on_structures():
    dead_end = KripkeStructure((0, 1), frozenset({0}), frozenset({(0, 1)}), {0: frozenset(), 1: frozenset()})
    with pytest.raises(TotalityError):
        check_model(dead_end)
    bad_labeling = KripkeStructure((0,), frozenset({0}), frozenset({(0, 0)}), {})
    with pytest.raises(SchemaError):
        check_model(bad_labeling)


@pytest.mark.parametrize("label, expected", [
    ("entry", True),
    ("terminated", True),
    ("action:fetch", True),
    ("call:Database.fetch", True),
    ("prop:", False),
    ("fetch", False),
    ("state:3", False),
])
def test_is_proposition(label, expected):
    assert is_proposition(label) is expected
