"""
Run the whole verification pipeline (parse, weave, CFG, Kripke model, check) against a property file,
check observed execution traces against a method model and draw the concern-dependency graph.
"""
import json
import logging
import re
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

import networkx as nx
import pandas as pd

from Config import DevConfig, ModelConfig
from src.errors import AliasError, EmptyTrace, FormulaParseError, PropertyFileError
from src.s1_aop_frontend import IDENTIFIER_PATTERN, load_program
from src.s2_weaver import presence_valuation, weave
from src.s3_flowgraph import build_cfg
from src.s4_kripke_model import from_cfg
from src.s5_logic_checker import AND, IMPLIES, Atom, Binary, check_config, check_ctl, parse_ctl, parse_prop
from src.utils import corpus_props, corpus_sources, expand_sources, get_data_dir, read_text, write_text

LOGGER = logging.getLogger(__name__)

CONFIG = "config"
CTL = "ctl"


# ------- Property files ---------

@dataclass(frozen=True)
class PropertyEntry:
    name: str
    kind: str  # CONFIG or CTL
    target: Optional[str]  # "Type.method", ctl entries only
    text: str
    formula: object


@dataclass(frozen=True)
class PropertySpec:
    aliases: dict = field(default_factory=dict)
    entries: tuple = ()

    def config_formulas(self):
        return [(e.name, e.formula) for e in self.entries if e.kind == CONFIG]


_ALIAS_RE = re.compile(rf"alias\s+(?P<aspect>{IDENTIFIER_PATTERN})\s*=\s*(?P<concern>{IDENTIFIER_PATTERN})$")
_CONFIG_RE = re.compile(rf"config\s+(?P<name>{IDENTIFIER_PATTERN})\s*:(?P<formula>.*)$")
_CTL_RE = re.compile(
    rf"ctl\s+(?P<name>{IDENTIFIER_PATTERN})\s*@\s*(?P<target>{IDENTIFIER_PATTERN}\.{IDENTIFIER_PATTERN})"
    r"\s*:(?P<formula>.*)$"
)


def parse_property_spec(text, source_name=None):
    """
    Parse a property file: `alias <Aspect> = <Concern>`, `config <name>: <formula>` and
    `ctl <name> @ <Type.method>: <formula>` lines; `#` starts a comment.

    Parameters
    ----------
    text: str
    source_name: str, optional
        File name used in diagnostics.
    Returns
    -------
    PropertySpec
    Raises
    -------
    PropertyFileError
        On an unrecognized line, a malformed formula or a repeated entry name.
    """
    aliases, entries, names = {}, [], set()
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        alias = _ALIAS_RE.match(line)
        if alias:
            aliases[alias.group("aspect")] = alias.group("concern")
            continue
        config, ctl = _CONFIG_RE.match(line), _CTL_RE.match(line)
        entry_match = config or ctl
        if entry_match is None:
            raise PropertyFileError(line_no, f"cannot read property line {line!r}", source_name)
        name, formula_text = entry_match.group("name"), entry_match.group("formula").strip()
        if name in names:
            raise PropertyFileError(line_no, f"property {name} defined twice", source_name)
        names.add(name)
        try:
            formula = parse_prop(formula_text) if config else parse_ctl(formula_text)
        except FormulaParseError as err:
            raise PropertyFileError(line_no, str(err), source_name) from err
        entries.append(PropertyEntry(
            name, CONFIG if config else CTL, ctl.group("target") if ctl else None, formula_text, formula,
        ))
    return PropertySpec(aliases, tuple(entries))


def read_property_spec(path):
    return parse_property_spec(read_text(path), source_name=str(path))


def parse_alias_args(items):
    """Turn repeated `Aspect=Concern` command-line values into an alias dict."""
    aliases = {}
    for item in items or ():
        aspect, sep, concern = item.partition("=")
        if not sep or not aspect.strip() or not concern.strip():
            raise AliasError(f"alias {item!r} is not of the form AspectName=ConcernId")
        aliases[aspect.strip()] = concern.strip()
    return aliases


# ------- Pipeline ---------

@dataclass
class EntryResult:
    entry: PropertyEntry
    result: object  # SatResult


@dataclass
class Report:
    results: list
    stats: dict  # target -> {"states": n, "transitions": n}
    warnings: list
    models: dict = field(default_factory=dict, repr=False)

    @property
    def passed(self):
        return all(r.result.holds for r in self.results)

    @property
    def status(self):
        return "pass" if self.passed else "fail"

    def as_dict(self):
        return {
            "version": ModelConfig.FORMAT_VERSION,
            "entries": [
                {
                    "name": r.entry.name,
                    "kind": r.entry.kind,
                    "target": r.entry.target,
                    "holds": r.result.holds,
                    "evidence": r.result.evidence_dict(self.models.get(r.entry.target)),
                }
                for r in self.results
            ],
            "stats": {target: dict(values) for target, values in sorted(self.stats.items())},
            "warnings": list(self.warnings),
            "status": self.status,
        }

    def to_json(self):
        return json.dumps(self.as_dict(), indent=2) + "\n"


def run_pipeline(sources, spec, aliases=None, strict_atoms=ModelConfig.STRICT_ATOMS,
                 inline_depth_limit=ModelConfig.INLINE_DEPTH_LIMIT):
    """
    Parse, weave, model and check a program against a property spec.

    Parameters
    ----------
    sources: iterable of str or Path
        .osm files and/or directories.
    spec: PropertySpec
    aliases: dict, optional
        Extra aliases (from --alias). Unlike the property file's aliases these must name declared aspects.
    strict_atoms: bool
    inline_depth_limit: int
    Returns
    -------
    Report
    Raises
    -------
    OsmError, OSError
        Any upstream error; nothing is reported in that case.
    """
    woven = weave(load_program(sources))
    warnings = []
    declared = {a.name for a in woven.program.aspects}
    for name, concern in sorted((aliases or {}).items()):
        if name not in declared:
            raise AliasError(f"alias {name}={concern} names an undeclared aspect")
    valuation = presence_valuation(woven, {**spec.aliases, **(aliases or {})}, strict=False, warnings=warnings)
    LOGGER.info("concern valuation: %s", valuation.as_dict())

    models, results = {}, []
    for entry in spec.entries:
        if entry.kind == CONFIG:
            result = check_config([(entry.name, entry.formula)], valuation)[0]
        else:
            if entry.target not in models:
                models[entry.target] = from_cfg(build_cfg(woven, entry.target, inline_depth_limit))
            result = check_ctl(models[entry.target], entry.formula, strict_atoms, warnings)
        LOGGER.info("%s %s: %s", entry.kind, entry.name, "holds" if result.holds else "fails")
        results.append(EntryResult(entry, result))
    stats = {
        target: {"states": len(model.states), "transitions": len(model.transitions)}
        for target, model in models.items()
    }
    return Report(results, stats, warnings, models)


# ------- Traces ---------

def read_trace(path):
    """Event labels of a trace file, one per line; blank lines and `#` comments are skipped."""
    lines = (line.split("#", 1)[0].strip() for line in read_text(path).splitlines())
    return tuple(line for line in lines if line)


def next_actions(model, starts):
    """
    Action-bearing states reachable from `starts` through non-action states only; an action-bearing
    start state is its own answer.
    """
    found, seen, queue = set(), set(starts), deque(sorted(starts))
    while queue:
        state = queue.popleft()
        if model.is_action_state(state):
            found.add(state)
            continue
        for succ in model.successors(state):
            if succ not in seen:
                seen.add(succ)
                queue.append(succ)
    return found


@dataclass(frozen=True)
class TraceVerdict:
    conforming: bool
    divergence: Optional[int] = None  # index of the first unmatched event

    @property
    def verdict(self):
        return "conforming" if self.conforming else "non-conforming"


def check_trace(model, trace):
    """
    Decide whether some path from an initial state visits action-bearing states carrying
    `action:<event>` for every event in order. Non-action states are skipped.

    Parameters
    ----------
    model: KripkeStructure
    trace: sequence of str
    Returns
    -------
    TraceVerdict
    Raises
    -------
    EmptyTrace
    """
    if not trace:
        raise EmptyTrace()
    candidates = next_actions(model, model.initial)
    for index, event in enumerate(trace):
        matched = {s for s in candidates if f"action:{event}" in model.labels(s)}
        if not matched:
            return TraceVerdict(False, index)
        candidates = next_actions(model, {succ for s in matched for succ in model.successors(s)})
    return TraceVerdict(True)


@dataclass
class TraceReport:
    sources: list
    verdicts: list
    warnings: list

    @property
    def conforming(self):
        return sum(v.conforming for v in self.verdicts)

    @property
    def total(self):
        return len(self.verdicts)

    @property
    def fraction(self):
        return Fraction(self.conforming, self.total) if self.total else None

    @property
    def status(self):
        return "pass" if self.conforming == self.total else "fail"

    def as_dict(self):
        return {
            "version": ModelConfig.FORMAT_VERSION,
            "traces": [
                {"source": source, "verdict": v.verdict, "divergence": v.divergence}
                for source, v in zip(self.sources, self.verdicts)
            ],
            "conforming": self.conforming,
            "total": self.total,
            "fraction": None if self.fraction is None else str(self.fraction),
            "warnings": list(self.warnings),
            "status": self.status,
        }

    def to_json(self):
        return json.dumps(self.as_dict(), indent=2) + "\n"

    def to_frame(self):
        return pd.DataFrame(self.as_dict()["traces"], columns=["source", "verdict", "divergence"])


def check_trace_set(model, traces, sources=None):
    """
    Check every trace and count the conforming ones; the fraction is exact and undefined (with a
    warning) for an empty set.

    Parameters
    ----------
    model: KripkeStructure
    traces: sequence of traces
    sources: list of str, optional
        Names reported next to each verdict; defaults to the trace index.
    Returns
    -------
    TraceReport
    Raises
    -------
    EmptyTrace
        Carrying the index of the first empty trace.
    """
    for index, trace in enumerate(traces):
        if not trace:
            raise EmptyTrace(index)
    warnings = []
    if not traces:
        message = "no traces given; conforming fraction 0/0 is undefined"
        LOGGER.warning(message)
        warnings.append(message)
    verdicts = [check_trace(model, trace) for trace in traces]
    names = list(sources) if sources is not None else [str(i) for i in range(len(traces))]
    return TraceReport(names, verdicts, warnings)


# ------- Concern graph ---------

def _conjuncts(f):
    if isinstance(f, Binary) and f.op == AND:
        return _conjuncts(f.left) + _conjuncts(f.right)
    return [f]


def concern_graph(formulas, warnings=None):
    """
    Dependency digraph X -> Yi for every formula shaped X -> (Y1 & ... & Yn) over atoms; any other
    shape is skipped with a warning.
    """
    graph = nx.DiGraph()
    for name, f in formulas:
        is_dependency = (
            isinstance(f, Binary) and f.op == IMPLIES and isinstance(f.left, Atom)
            and all(isinstance(y, Atom) for y in _conjuncts(f.right))
        )
        if not is_dependency:
            message = f"{name}: not a dependency of the form X -> (Y1 & ... & Yn); skipped in the concern graph"
            LOGGER.warning(message)
            if warnings is not None:
                warnings.append(message)
            continue
        graph.add_edges_from((f.left.name, y.name) for y in _conjuncts(f.right))
    return graph


def emit_concern_graph(formulas, warnings=None):
    """
    DOT text of the concern-dependency graph, nodes and edges sorted.

    Parameters
    ----------
    formulas: list of (name, formula)
    warnings: list, optional
        Collector for skipped-formula warnings.
    Returns
    -------
    str
    """
    graph = concern_graph(formulas, warnings)
    lines = ["digraph concerns {"]
    lines.extend(f'    "{node}";' for node in sorted(graph.nodes))
    lines.extend(f'    "{source}" -> "{target}";' for source, target in sorted(graph.edges))
    lines.append("}")
    return "\n".join(lines) + "\n"


# if __name__ == "__main__":
def run_check_process(sources=None, props=None, traces_dir=None, out_dir=None):
    # Check the corpus against its property file, check the observed traces and output the reports.
    # ************************************************************************************
    sources = sources or corpus_sources()
    spec = read_property_spec(props or corpus_props())
    out_dir = Path(out_dir or get_data_dir(DevConfig.DIR_NAME_PROCESSED))

    report = run_pipeline(sources, spec)
    write_text(out_dir / DevConfig.PROCESSED_JSON_REPORT, report.to_json())
    LOGGER.info("check report: %s", report.status)

    trace_files = expand_sources(
        [traces_dir or get_data_dir(DevConfig.DIR_NAME_RAW) / DevConfig.DIR_TRACES], ModelConfig.TRACE_SUFFIX
    )
    model = from_cfg(build_cfg(weave(load_program(sources)), DevConfig.TRACE_TARGET))
    trace_report = check_trace_set(model, [read_trace(p) for p in trace_files], [p.name for p in trace_files])
    write_text(out_dir / DevConfig.PROCESSED_JSON_TRACE_REPORT, trace_report.to_json())
    trace_report.to_frame().to_csv(out_dir / DevConfig.PROCESSED_CSV_TRACE_REPORT, index=False)

    write_text(out_dir / DevConfig.PROCESSED_DOT_CONCERN_GRAPH, emit_concern_graph(spec.config_formulas()))
    return report, trace_report
