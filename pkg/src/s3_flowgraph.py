"""
Build per-method control-flow graphs from a woven program. Matched advice is expanded at every call
join point and in-program callees are inlined, so one method yields one finite graph.
"""
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import inflection
import networkx as nx

from Config import DevConfig, ModelConfig
from src.errors import DepthError, InlineRecursionError, UnknownMethod
from src.s1_aop_frontend import Atomic, Call, If, Proceed, Return, Throw, While, load_program
from src.s2_weaver import advice_owner, execution_order, weave
from src.utils import corpus_sources, get_data_dir, write_text

LOGGER = logging.getLogger(__name__)

ENTRY = "Entry"
EXIT = "Exit"
ERROR = "Error"
ACTION = "Action"
BRANCH = "Branch"

EPSILON = ""
THEN = "then"
ELSE = "else"
_GUARD_ORDER = {THEN: 0, ELSE: 1, EPSILON: 2}


@dataclass(frozen=True)
class Origin:
    aspect: Optional[str] = None  # None for base code
    kind: Optional[str] = None

    @property
    def is_advice(self):
        return self.aspect is not None


BASE = Origin()


@dataclass(frozen=True)
class CfgNode:
    id: int
    kind: str
    label: str = ""
    origin: Origin = BASE
    call: Optional[str] = None  # "Receiver.method" when the action is a call
    props: frozenset = field(default=frozenset())


@dataclass(frozen=True, order=True)
class CfgEdge:
    source: int
    target: int
    guard: str = EPSILON


@dataclass(frozen=True)
class Cfg:
    name: str
    nodes: tuple
    edges: tuple
    entry_id: int
    exit_id: Optional[int]  # None when no path completes normally
    error_id: Optional[int] = None

    def node(self, node_id):
        return self.nodes[node_id]

    def out_edges(self, node_id):
        return [e for e in self.edges if e.source == node_id]

    def to_networkx(self):
        graph = nx.MultiDiGraph(name=self.name)
        for node in self.nodes:
            graph.add_node(node.id, kind=node.kind, label=node.label)
        for edge in self.edges:
            graph.add_edge(edge.source, edge.target, guard=edge.guard)
        return graph


@dataclass
class _Frame:
    owner: str  # join point owner used to look up bindings
    origin: Origin
    props: frozenset
    proceed: Optional[object] = None
    returns: list = field(default_factory=list)


class _CfgBuilder:
    def __init__(self, woven, depth_limit):
        self.woven = woven
        self.depth_limit = depth_limit
        self.nodes = {}
        self.succ = defaultdict(list)
        self.methods = []
        self.advice_stack = []
        self.entry = self.new_node(ENTRY)
        self.exit = self.new_node(EXIT)
        self.error = self.new_node(ERROR)

    def new_node(self, kind, label="", origin=BASE, call=None, props=frozenset()):
        key = len(self.nodes)
        self.nodes[key] = (kind, label, origin, call, frozenset(props))
        return key

    def attach(self, frontier, key):
        for source, guard in frontier:
            if (key, guard) not in self.succ[source]:
                self.succ[source].append((key, guard))

    def action(self, frontier, frame, label, call=None):
        key = self.new_node(ACTION, label, frame.origin, call, frame.props)
        self.attach(frontier, key)
        return key

    def build(self, qualified_name):
        type_name, _, method_name = qualified_name.partition(".")
        method = self.woven.program.find_method(type_name, method_name)
        if method is None:
            raise UnknownMethod(qualified_name)
        self.methods.append(qualified_name)
        frame = _Frame(qualified_name, BASE, method.annotations)
        out = self.block(method.body, [(self.entry, EPSILON)], frame, ())
        self.attach(out + frame.returns, self.exit)
        return self.finish(qualified_name)

    def block(self, stmts, frontier, frame, prefix):
        for index, stmt in enumerate(stmts):
            frontier = self.stmt(stmt, frontier, frame, prefix + (index,))
        return frontier

    def stmt(self, stmt, frontier, frame, path):
        if isinstance(stmt, Atomic):
            return [(self.action(frontier, frame, stmt.label), EPSILON)]
        if isinstance(stmt, Call):
            return self.join_point(stmt, frontier, frame, path)
        if isinstance(stmt, If):
            branch = self.condition(stmt.cond, frontier, frame)[1]
            then_out = self.block(stmt.then_body, [(branch, THEN)], frame, path + (0,))
            else_out = self.block(stmt.else_body or (), [(branch, ELSE)], frame, path + (1,))
            return then_out + else_out
        if isinstance(stmt, While):
            head, branch = self.condition(stmt.cond, frontier, frame)
            body_out = self.block(stmt.body, [(branch, THEN)], frame, path + (0,))
            self.attach(body_out, head)
            return [(branch, ELSE)]
        if isinstance(stmt, Throw):
            key = self.action(frontier, frame, f"throw:{stmt.exception}")
            self.attach([(key, EPSILON)], self.error)
            return []
        if isinstance(stmt, Return):
            frame.returns.extend(frontier)
            return []
        if isinstance(stmt, Proceed):
            return frame.proceed(frontier)
        raise TypeError(f"unexpected statement {stmt!r}")

    def condition(self, cond, frontier, frame):
        # A call condition is an action followed by the branch on its outcome.
        if isinstance(cond, Call):
            head = self.action(frontier, frame, cond.method, f"{cond.receiver}.{cond.method}")
            branch = self.new_node(BRANCH, cond.method, frame.origin, None, frame.props)
            self.attach([(head, EPSILON)], branch)
            return head, branch
        branch = self.new_node(BRANCH, cond, frame.origin, None, frame.props)
        self.attach(frontier, branch)
        return branch, branch

    def join_point(self, call, frontier, frame, path):
        befores, arounds, afters = execution_order(self.woven.bindings_at(frame.owner, path))
        for binding in befores:
            frontier = self.advice(binding, frontier, None)
        frontier = self.around_chain(call, arounds, frontier, frame)
        for binding in afters:
            frontier = self.advice(binding, frontier, None)
        return frontier

    def around_chain(self, call, arounds, frontier, frame):
        if not arounds:
            return self.invoke(call, frontier, frame)
        at_join_point = list(self.advice_stack)

        def proceed(proceed_frontier):
            # proceed() resumes the advised call, which is not part of the advice body.
            inside_advice, self.advice_stack = self.advice_stack, list(at_join_point)
            try:
                return self.around_chain(call, arounds[1:], proceed_frontier, frame)
            finally:
                self.advice_stack = inside_advice

        return self.advice(arounds[0], frontier, proceed)

    def advice(self, binding, frontier, proceed):
        owner = advice_owner(binding.aspect, binding.ordinal)
        if owner in self.advice_stack:
            raise InlineRecursionError(self.advice_stack[self.advice_stack.index(owner):] + [owner])
        decl = self.woven.program.aspect(binding.aspect).advice[binding.ordinal]
        frame = _Frame(owner, Origin(binding.aspect, binding.kind), decl.annotations, proceed)
        self.advice_stack.append(owner)
        out = self.block(decl.body, frontier, frame, ())
        self.advice_stack.pop()
        return out + frame.returns

    def invoke(self, call, frontier, frame):
        callee = self.woven.program.find_method(call.receiver, call.method)
        qualified_name = f"{call.receiver}.{call.method}"
        if callee is None:
            return [(self.action(frontier, frame, call.method, qualified_name), EPSILON)]
        if qualified_name in self.methods:
            raise InlineRecursionError(self.methods[self.methods.index(qualified_name):] + [qualified_name])
        if len(self.methods) > self.depth_limit:
            raise DepthError(self.depth_limit, self.methods + [qualified_name])
        self.methods.append(qualified_name)
        callee_frame = _Frame(qualified_name, BASE, callee.annotations)
        out = self.block(callee.body, frontier, callee_frame, ())
        self.methods.pop()
        return out + callee_frame.returns

    def finish(self, name):
        # Number reachable nodes in depth-first preorder from entry; then-edges before else-edges.
        def ordered_succ(key):
            return sorted(self.succ[key], key=lambda item: _GUARD_ORDER[item[1]])

        ids, stack = {}, [self.entry]
        while stack:
            key = stack.pop()
            if key in ids:
                continue
            ids[key] = len(ids)
            stack.extend(target for target, _ in reversed(ordered_succ(key)) if target not in ids)
        nodes = []
        for key, new_id in sorted(ids.items(), key=lambda item: item[1]):
            kind, label, origin, call, props = self.nodes[key]
            nodes.append(CfgNode(new_id, kind, label, origin, call, props))
        edges = sorted(
            CfgEdge(ids[source], ids[target], guard)
            for source in ids
            for target, guard in self.succ[source]
        )
        return Cfg(name, tuple(nodes), tuple(edges), ids[self.entry], ids.get(self.exit), ids.get(self.error))


def build_cfg(woven, method, inline_depth_limit=ModelConfig.INLINE_DEPTH_LIMIT):
    """
    Control-flow graph of one method with advice expanded and in-program callees inlined.

    Parameters
    ----------
    woven: WovenProgram
    method: str
        Qualified name "Type.method".
    inline_depth_limit: int
        Maximum nesting of inlined callees.
    Returns
    -------
    cfg_: Cfg
    Raises
    -------
    UnknownMethod
    InlineRecursionError
        When inlining revisits a method (or an advice) already being expanded.
    DepthError
    """
    if inline_depth_limit < 1:
        raise ValueError("inline depth limit must be positive")
    cfg_ = _CfgBuilder(woven, inline_depth_limit).build(method)
    check_cfg(cfg_)
    LOGGER.debug("cfg %s: %d nodes, %d edges", method, len(cfg_.nodes), len(cfg_.edges))
    return cfg_


def check_cfg(cfg_):
    """
    Test the structural invariants of a CFG.
    Raises
    -------
    AssertionError
        If entry has incoming edges, a node is unreachable, a terminal node has successors, or a
        Branch does not have exactly one then-edge and one else-edge.
    """
    graph = cfg_.to_networkx()
    assert graph.in_degree(cfg_.entry_id) == 0, "Entry must have no incoming edges."
    reachable = nx.descendants(graph, cfg_.entry_id) | {cfg_.entry_id}
    assert reachable == set(graph.nodes), "Every node must be reachable from entry."
    for node in cfg_.nodes:
        guards = sorted(e.guard for e in cfg_.out_edges(node.id))
        if node.kind in (EXIT, ERROR):
            assert not guards, f"{node.kind} node {node.id} must have no successors."
        elif node.kind == BRANCH:
            assert guards == [ELSE, THEN], f"Branch node {node.id} must have one then-edge and one else-edge."
        else:
            assert guards and set(guards) == {EPSILON}, f"Node {node.id} must have only unguarded successors."


def _quote(text):
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def dot_graph_name(name):
    return inflection.parameterize(inflection.underscore(name), separator="_") or "graph"


def to_dot(cfg_):
    """
    DOT rendering of a CFG: nodes by ascending id, edges in (source, target, guard) order.
    Advice nodes carry a `group` attribute naming their aspect.
    """
    lines = [f"digraph {_quote(dot_graph_name(cfg_.name))} {{", "    node [shape=box];"]
    for node in cfg_.nodes:
        if node.kind in (ENTRY, EXIT, ERROR):
            attrs = [f"label={_quote(node.kind.lower())}", "shape=circle"]
        elif node.kind == BRANCH:
            attrs = [f"label={_quote(node.label)}", "shape=diamond"]
        else:
            attrs = [f"label={_quote('call:' + node.call if node.call else node.label)}"]
        if node.origin.is_advice:
            attrs.append(f"group={_quote(node.origin.aspect)}")
        lines.append(f"    {node.id} [{', '.join(attrs)}];")
    for edge in cfg_.edges:
        suffix = f" [label={_quote(edge.guard)}]" if edge.guard else ""
        lines.append(f"    {edge.source} -> {edge.target}{suffix};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def method_names(program_):
    return [f"{t.name}.{m.name}" for t in program_.types for m in t.methods]


# if __name__ == "__main__":
def run_cfg_process(sources=None, out_dir=None):
    # Build and output the CFG of every method in the corpus.
    # ************************************************************************************
    woven = weave(load_program(sources or corpus_sources()))
    out_dir = Path(out_dir or get_data_dir(DevConfig.DIR_NAME_INTERIM)) / DevConfig.INTERIM_DIR_CFG
    cfgs = {}
    for name in method_names(woven.program):
        cfgs[name] = build_cfg(woven, name)
        write_text(out_dir / f"{name}.dot", to_dot(cfgs[name]))
    return cfgs
