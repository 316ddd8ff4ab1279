"""
Translate CFGs into state-labeled Kripke structures with a total transition relation, and read/write
models as JSON or DOT.
"""
import json
import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import networkx as nx

from Config import DevConfig, ModelConfig
from src.errors import EmptyInitialError, SchemaError, TotalityError
from src.s1_aop_frontend import load_program
from src.s2_weaver import weave
from src.s3_flowgraph import BRANCH, ENTRY, ERROR, EXIT, build_cfg, dot_graph_name, method_names
from src.utils import corpus_sources, get_data_dir, write_text

LOGGER = logging.getLogger(__name__)

NAMESPACES = ("action", "call", "advice", "aspect", "prop", "node")
MARKERS = ("entry", "exit", "error", "terminated")
BRANCH_PREFIX = "action:branch:"


@dataclass(frozen=True)
class KripkeStructure:
    states: tuple  # ascending state ids
    initial: frozenset
    transitions: frozenset  # {(source, target)}
    labeling: dict  # state id -> frozenset of atomic propositions

    @cached_property
    def graph(self):
        graph = nx.DiGraph()
        graph.add_nodes_from(self.states)
        graph.add_edges_from(sorted(self.transitions))
        return graph

    def successors(self, state):
        return sorted(self.graph.successors(state))

    def predecessors(self, state):
        return sorted(self.graph.predecessors(state))

    def labels(self, state):
        return self.labeling[state]

    @cached_property
    def vocabulary(self):
        return frozenset().union(*self.labeling.values()) if self.labeling else frozenset()

    def is_action_state(self, state):
        return any(p.startswith("action:") and not p.startswith(BRANCH_PREFIX) for p in self.labeling[state])


def check_model(model):
    """
    Raises
    -------
    EmptyInitialError
        If there is no initial state.
    TotalityError
        If some state has no successor.
    SchemaError
        If initial states, transitions or labels refer to unknown states.
    """
    states = set(model.states)
    if not model.initial:
        raise EmptyInitialError()
    if not model.initial <= states:
        raise SchemaError(f"initial states {sorted(model.initial - states)} are not states")
    if set(model.labeling) != states:
        raise SchemaError("labeling must be defined on exactly the states")
    for source, target in model.transitions:
        if source not in states or target not in states:
            raise SchemaError(f"transition {source}->{target} refers to an unknown state")
    with_successor = {source for source, _ in model.transitions}
    for state in model.states:
        if state not in with_successor:
            raise TotalityError(state)


def _origin_labels(node):
    labels = {f"prop:{name}" for name in node.props}
    if node.origin.is_advice:
        labels.add(f"advice:{node.origin.aspect}.{node.origin.kind}")
        labels.add(f"aspect:{node.origin.aspect}")
    return labels


def state_labels(node):
    if node.kind == ENTRY:
        return frozenset({"entry"})
    if node.kind == EXIT:
        return frozenset({"exit", "terminated"})
    if node.kind == ERROR:
        return frozenset({"error", "terminated"})
    if node.kind == BRANCH:
        return frozenset({BRANCH_PREFIX + node.label} | _origin_labels(node))
    labels = {f"action:{node.label}"} | _origin_labels(node)
    if node.call:
        labels.add(f"call:{node.call}")
    return frozenset(labels)


def from_cfg(cfg_):
    """
    One state per CFG node (same ids), one transition per CFG edge with guards dropped, and a
    self-loop on every terminal state so the relation is total.

    Parameters
    ----------
    cfg_: Cfg
    Returns
    -------
    model_: KripkeStructure
    """
    transitions = {(edge.source, edge.target) for edge in cfg_.edges}
    transitions |= {(node.id, node.id) for node in cfg_.nodes if node.kind in (EXIT, ERROR)}
    model_ = KripkeStructure(
        states=tuple(node.id for node in cfg_.nodes),
        initial=frozenset({cfg_.entry_id}),
        transitions=frozenset(transitions),
        labeling={node.id: state_labels(node) for node in cfg_.nodes},
    )
    check_model(model_)
    return model_


def to_json(model):
    document = {
        "version": ModelConfig.FORMAT_VERSION,
        "states": [{"id": state, "labels": sorted(model.labeling[state])} for state in model.states],
        "initial": sorted(model.initial),
        "transitions": [list(pair) for pair in sorted(model.transitions)],
    }
    return json.dumps(document, indent=2) + "\n"


def to_kripke_dot(model, name="kripke"):
    lines = [f'digraph "{dot_graph_name(name)}" {{']
    for state in model.states:
        text = "\\n".join([str(state)] + sorted(model.labeling[state])).replace('"', '\\"')
        shape = "doublecircle" if state in model.initial else "box"
        lines.append(f'    {state} [shape={shape}, label="{text}"];')
    for source, target in sorted(model.transitions):
        lines.append(f"    {source} -> {target};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def emit(model, fmt="json", name="kripke"):
    """
    Serialize a model deterministically (states ascending, labels and transitions sorted).

    Parameters
    ----------
    model: KripkeStructure
    fmt: str
        "json" or "dot". DOT draws initial states as double circles.
    name: str
        Graph name used by DOT output.
    Returns
    -------
    str
    """
    if fmt == "json":
        return to_json(model)
    if fmt == "dot":
        return to_kripke_dot(model, name)
    raise ValueError(f"unknown model format {fmt!r}")


_TOP_FIELDS = {"version", "states", "initial", "transitions"}


def _require(condition, message):
    if not condition:
        raise SchemaError(message)


def load(text):
    """
    Read a model from its JSON form.

    Parameters
    ----------
    text: str
    Returns
    -------
    KripkeStructure
    Raises
    -------
    SchemaError
        Malformed JSON, a missing or unknown field, or a field of the wrong type.
    TotalityError, EmptyInitialError
    """
    try:
        document = json.loads(text)
    except json.JSONDecodeError as err:
        raise SchemaError(f"model is not valid JSON: {err}") from err
    _require(isinstance(document, dict), "model must be a JSON object")
    missing = _TOP_FIELDS - set(document)
    unknown = set(document) - _TOP_FIELDS
    _require(not missing, f"missing field(s): {', '.join(sorted(missing))}")
    _require(not unknown, f"unknown field(s): {', '.join(sorted(unknown))}")
    _require(document["version"] == ModelConfig.FORMAT_VERSION, f"unsupported version {document['version']!r}")
    labeling = {}
    for entry in _typed_list(document["states"], "states"):
        _require(isinstance(entry, dict), "each state must be an object")
        _require(set(entry) == {"id", "labels"}, "each state needs exactly the fields id and labels")
        state, labels = entry["id"], entry["labels"]
        _require(_is_int(state), "state id must be an integer")
        _require(state not in labeling, f"duplicate state id {state}")
        _require(isinstance(labels, list) and all(is_proposition(p) for p in labels), f"state {state} has a malformed label")
        labeling[state] = frozenset(labels)
    initial = _typed_list(document["initial"], "initial")
    _require(all(_is_int(s) for s in initial), "initial states must be integers")
    transitions = []
    for pair in _typed_list(document["transitions"], "transitions"):
        _require(isinstance(pair, list) and len(pair) == 2 and all(_is_int(s) for s in pair), "transition must be [int, int]")
        transitions.append(tuple(pair))
    model = KripkeStructure(
        states=tuple(sorted(labeling)),
        initial=frozenset(initial),
        transitions=frozenset(transitions),
        labeling=labeling,
    )
    check_model(model)
    return model


def is_proposition(text):
    """A bare marker, or `ns:name` with a known namespace and a nonempty name."""
    if not isinstance(text, str):
        return False
    if text in MARKERS:
        return True
    namespace, _, name = text.partition(":")
    return namespace in NAMESPACES and bool(name)


def _typed_list(value, name):
    _require(isinstance(value, list), f"{name} must be a list")
    return value


def _is_int(value):
    return isinstance(value, int) and not isinstance(value, bool)


# if __name__ == "__main__":
def run_kripke_process(sources=None, out_dir=None):
    # Translate every method CFG of the corpus and output the models.
    # ************************************************************************************
    woven = weave(load_program(sources or corpus_sources()))
    out_dir = Path(out_dir or get_data_dir(DevConfig.DIR_NAME_INTERIM)) / DevConfig.INTERIM_DIR_KRIPKE
    models = {}
    for name in method_names(woven.program):
        models[name] = from_cfg(build_cfg(woven, name))
        write_text(out_dir / f"{name}.json", emit(models[name], "json"))
        LOGGER.info("%s: %d states, %d transitions", name, len(models[name].states), len(models[name].transitions))
    return models
