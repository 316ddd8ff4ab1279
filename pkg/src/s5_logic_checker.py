"""
Propositional configuration formulas evaluated on concern valuations, and CTL model checking over
Kripke structures by fixpoint labeling, with counterexample and witness extraction.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import pyparsing as pp

from src.errors import FormulaParseError, UnknownAtom

LOGGER = logging.getLogger(__name__)

AND, OR, IMPLIES, IFF = "&", "|", "->", "<->"
TEMPORAL_OPS = ("EX", "AX", "EF", "AF", "EG", "AG")


# ------- Formula trees ---------

@dataclass(frozen=True)
class Const:
    value: bool


@dataclass(frozen=True)
class Atom:
    name: str


@dataclass(frozen=True)
class Not:
    arg: object


@dataclass(frozen=True)
class Binary:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Temporal:
    op: str  # one of TEMPORAL_OPS
    arg: object


@dataclass(frozen=True)
class Until:
    quantifier: str  # "A" or "E"
    left: object
    right: object


TRUE = Const(True)
FALSE = Const(False)


def format_formula(f):
    """Render a formula in the ASCII syntax; binary connectives are always parenthesized."""
    if isinstance(f, Const):
        return "true" if f.value else "false"
    if isinstance(f, Atom):
        return f.name
    if isinstance(f, Not):
        return "!" + format_formula(f.arg)
    if isinstance(f, Binary):
        return f"({format_formula(f.left)} {f.op} {format_formula(f.right)})"
    if isinstance(f, Temporal):
        return f"{f.op} {format_formula(f.arg)}"
    return f"{f.quantifier}[{format_formula(f.left)} U {format_formula(f.right)}]"


def atoms_of(f):
    if isinstance(f, Atom):
        return {f.name}
    if isinstance(f, Const):
        return set()
    if isinstance(f, (Not, Temporal)):
        return atoms_of(f.arg)
    return atoms_of(f.left) | atoms_of(f.right)


# ------- Parser ---------

# infix_notation re-parses each operand once per precedence level without memoization.
pp.ParserElement.enable_packrat()

_ATOM_PATTERN = r"[A-Za-z_](?:[A-Za-z0-9_.:]|-(?!>))*"


def _unary(tokens):
    op, arg = tokens[0]
    return Not(arg) if op == "!" else Temporal(op, arg)


def _fold_left(tokens):
    members = list(tokens[0])
    f = members[0]
    for op, right in zip(members[1::2], members[2::2]):
        f = Binary(op, f, right)
    return f


def _fold_right(tokens):
    members = list(tokens[0])
    f = members[-1]
    for left, op in zip(members[-3::-2], members[-2::-2]):
        f = Binary(op, left, f)
    return f


class _FormulaGrammar:
    """
    pyparsing grammar of one formula dialect. Every terminal reports its failures so that a syntax
    error points at the furthest column the parse reached, with the terminals expected there.
    """

    def __init__(self, temporal):
        self.furthest = 0
        self.expected = set()
        reserved = {"true", "false"} | (set(TEMPORAL_OPS) if temporal else set())

        atom = self.terminal(pp.Regex(_ATOM_PATTERN), "atom")
        atom.add_condition(lambda t: t[0] not in reserved, call_during_try=True)
        atom.add_parse_action(lambda t: Atom(t[0]))
        constant = self.terminal(pp.Keyword("true"), "'true'") | self.terminal(pp.Keyword("false"), "'false'")
        constant.set_parse_action(lambda t: TRUE if t[0] == "true" else FALSE)

        formula = pp.Forward()
        operand = atom | constant
        prefix = self.terminal(pp.Literal("!"), "'!'")
        if temporal:
            quantifier = self.terminal(pp.Keyword("A"), "'A'") | self.terminal(pp.Keyword("E"), "'E'")
            until = (
                quantifier + self.terminal(pp.Suppress("["), "'['") + formula
                + self.terminal(pp.Suppress(pp.Keyword("U")), "'U'") + formula
                + self.terminal(pp.Suppress("]"), "']'")
            )
            until.set_parse_action(lambda t: Until(t[0], t[1], t[2]))
            operand = until | operand
            prefix = prefix | self.terminal(pp.one_of(TEMPORAL_OPS, as_keyword=True), "temporal operator")

        formula <<= pp.infix_notation(
            operand,
            [
                (prefix, 1, pp.OpAssoc.RIGHT, _unary),
                (self.terminal(pp.Literal(AND), "'&'"), 2, pp.OpAssoc.LEFT, _fold_left),
                (self.terminal(pp.Literal(OR), "'|'"), 2, pp.OpAssoc.LEFT, _fold_left),
                (self.terminal(pp.Literal(IMPLIES), "'->'"), 2, pp.OpAssoc.RIGHT, _fold_right),
                (self.terminal(pp.Literal(IFF), "'<->'"), 2, pp.OpAssoc.RIGHT, _fold_right),
            ],
            lpar=self.terminal(pp.Suppress("("), "'('"),
            rpar=self.terminal(pp.Suppress(")"), "')'"),
        )
        self.grammar = (formula + self.terminal(pp.StringEnd(), "end of formula")).parse_with_tabs()

    def terminal(self, element, name):
        return element.set_name(name).set_fail_action(self.record_failure)

    def record_failure(self, text, loc, expr, err):
        if loc > self.furthest:
            self.furthest, self.expected = loc, set()
        if loc == self.furthest:
            self.expected.add(expr.name)

    def parse(self, text):
        self.furthest, self.expected = 0, set()
        try:
            return self.grammar.parse_string(text)[0]
        except pp.ParseBaseException as err:
            position = self.furthest if self.expected else err.loc
            raise FormulaParseError(position, self.expected or {"formula"}, text) from None


_PROP_GRAMMAR = _FormulaGrammar(temporal=False)
_CTL_GRAMMAR = _FormulaGrammar(temporal=True)


def parse_prop(text):
    """
    Parse a propositional formula. Precedence, tightest first: `!`, `&`, `|`, `->`, `<->`; the
    last two associate to the right.
    Raises
    -------
    FormulaParseError
    """
    return _PROP_GRAMMAR.parse(text)


def parse_ctl(text):
    """Parse a CTL formula: the propositional syntax plus EX AX EF AF EG AG (binding like `!`), A[f U g], E[f U g]."""
    return _CTL_GRAMMAR.parse(text)


# ------- Evidence ---------

@dataclass(frozen=True)
class Assignment:
    valuation: object

    def to_dict(self, model=None):
        return {"type": "assignment", "valuation": self.valuation.as_dict()}


@dataclass(frozen=True)
class FinitePath:
    states: Tuple[int, ...]

    def to_dict(self, model=None):
        document = {"type": "path", "states": list(self.states)}
        if model is not None:
            document["labels"] = [sorted(model.labels(s)) for s in self.states]
        return document


@dataclass(frozen=True)
class Lasso:
    prefix: Tuple[int, ...]
    cycle: Tuple[int, ...]  # last state steps back to the first

    def to_dict(self, model=None):
        document = {"type": "lasso", "prefix": list(self.prefix), "cycle": list(self.cycle)}
        if model is not None:
            document["labels"] = {str(s): sorted(model.labels(s)) for s in sorted(set(self.prefix + self.cycle))}
        return document


@dataclass(frozen=True)
class SatResult:
    holds: bool
    evidence: Optional[object] = None

    def evidence_dict(self, model=None):
        return None if self.evidence is None else self.evidence.to_dict(model)


# ------- Propositional evaluation ---------

def eval_prop(f, valuation):
    """
    Truth value of a propositional formula under a concern valuation.
    Raises
    -------
    UnknownAtom
        If an atom is not a key of the valuation.
    """
    if isinstance(f, Const):
        return f.value
    if isinstance(f, Atom):
        if f.name not in valuation:
            raise UnknownAtom(f.name)
        return bool(valuation[f.name])
    if isinstance(f, Not):
        return not eval_prop(f.arg, valuation)
    if isinstance(f, Binary):
        left, right = eval_prop(f.left, valuation), eval_prop(f.right, valuation)
        if f.op == AND:
            return left and right
        if f.op == OR:
            return left or right
        if f.op == IMPLIES:
            return (not left) or right
        return left == right
    raise TypeError(f"temporal operator in a configuration formula: {format_formula(f)}")


def check_config(formulas, valuation):
    """
    Evaluate named configuration formulas; a failing formula carries the valuation as its counterexample.

    Parameters
    ----------
    formulas: list of (name, formula)
    valuation: ConcernValuation
    Returns
    -------
    list of SatResult, in input order
    """
    results_ = []
    for name, f in formulas:
        missing = sorted(atoms_of(f) - set(valuation.keys()))
        if missing:
            raise UnknownAtom(missing[0])
        holds = eval_prop(f, valuation)
        LOGGER.debug("config %s: %s", name, "holds" if holds else "fails")
        results_.append(SatResult(True) if holds else SatResult(False, Assignment(valuation)))
    return results_


# ------- CTL labeling ---------

class _Labeler:
    def __init__(self, model, strict_atoms, warnings):
        self.model = model
        self.all = frozenset(model.states)
        self.strict_atoms = strict_atoms
        self.warnings = warnings
        self.memo = {}

    def pre(self, states):
        return frozenset(p for s in states for p in self.model.graph.predecessors(s))

    def sat(self, f):
        if f not in self.memo:
            self.memo[f] = self.compute(f)
        return self.memo[f]

    def compute(self, f):
        if isinstance(f, Const):
            return self.all if f.value else frozenset()
        if isinstance(f, Atom):
            if f.name not in self.model.vocabulary:
                if self.strict_atoms:
                    raise UnknownAtom(f.name)
                message = f"atom {f.name} labels no state; treated as false"
                LOGGER.warning(message)
                if self.warnings is not None and message not in self.warnings:
                    self.warnings.append(message)
            return frozenset(s for s in self.model.states if f.name in self.model.labeling[s])
        if isinstance(f, Not):
            return self.all - self.sat(f.arg)
        if isinstance(f, Binary):
            left, right = self.sat(f.left), self.sat(f.right)
            if f.op == AND:
                return left & right
            if f.op == OR:
                return left | right
            if f.op == IMPLIES:
                return (self.all - left) | right
            return (left & right) | ((self.all - left) & (self.all - right))
        if isinstance(f, Until):
            if f.quantifier == "E":
                return self.exists_until(self.sat(f.left), self.sat(f.right))
            # A[p U q] = !(E[!q U (!p & !q)] | EG !q)
            not_left, not_right = self.all - self.sat(f.left), self.all - self.sat(f.right)
            return self.all - (self.exists_until(not_right, not_left & not_right) | self.exists_globally(not_right))
        body = self.sat(f.arg)
        if f.op == "EX":
            return self.pre(body)
        if f.op == "AX":
            return self.all - self.pre(self.all - body)
        if f.op == "EF":
            return self.exists_until(self.all, body)
        if f.op == "AG":
            return self.all - self.exists_until(self.all, self.all - body)
        if f.op == "EG":
            return self.exists_globally(body)
        return self.all - self.exists_globally(self.all - body)  # AF

    def exists_until(self, left, right):
        # least fixpoint of X = right | (left & pre(X))
        result = set(right)
        frontier = list(right)
        while frontier:
            state = frontier.pop()
            for p in self.model.graph.predecessors(state):
                if p in left and p not in result:
                    result.add(p)
                    frontier.append(p)
        return frozenset(result)

    def exists_globally(self, body):
        # greatest fixpoint of X = body & pre(X)
        result = frozenset(body)
        while True:
            shrunk = result & self.pre(result)
            if shrunk == result:
                return result
            result = shrunk


def sat_set(model, f, strict_atoms=False, warnings=None):
    """
    Set of states satisfying a CTL formula.

    Parameters
    ----------
    model: KripkeStructure
    f: formula
    strict_atoms: bool
        Raise UnknownAtom for atoms outside the model's label vocabulary instead of warning.
    warnings: list, optional
        Collector for warning messages.
    Returns
    -------
    frozenset of state ids
    """
    return _Labeler(model, strict_atoms, warnings).sat(f)


def shortest_path(model, sources, targets, through=None):
    """
    BFS-shortest path from any source to any target, moving only through `through` states before the
    target (all states when None). Ties go to the smallest state id.
    Returns
    -------
    tuple of state ids, or None
    """
    parent = {s: None for s in sorted(sources) if through is None or s in through or s in targets}
    layer = sorted(parent)
    while layer:
        hits = [s for s in layer if s in targets]
        if hits:
            path, state = [], min(hits)
            while state is not None:
                path.append(state)
                state = parent[state]
            return tuple(reversed(path))
        next_layer = []
        for state in layer:
            if through is not None and state not in through:
                continue
            for succ in model.successors(state):
                if succ not in parent:
                    parent[succ] = state
                    next_layer.append(succ)
        layer = sorted(next_layer)
    return None


def lasso_within(model, start, region):
    """
    Walk from `start` inside `region` (every member must have a successor in it), always taking the
    smallest successor, until a state repeats.
    """
    order, seen, state = [], {}, start
    while state not in seen:
        seen[state] = len(order)
        order.append(state)
        state = min(s for s in model.successors(state) if s in region)
    return Lasso(tuple(order[:seen[state]]), tuple(order[seen[state]:]))


def _witness(model, labeler, f, start):
    """Evidence that `start` satisfies an existential formula, or None for other shapes."""
    if isinstance(f, Temporal) and f.op == "EX":
        body = labeler.sat(f.arg)
        return FinitePath((start, min(s for s in model.successors(start) if s in body)))
    if isinstance(f, Temporal) and f.op == "EF":
        return FinitePath(shortest_path(model, [start], labeler.sat(f.arg)))
    if isinstance(f, Until) and f.quantifier == "E":
        return FinitePath(shortest_path(model, [start], labeler.sat(f.right), labeler.sat(f.left)))
    if isinstance(f, Temporal) and f.op == "EG":
        return lasso_within(model, start, labeler.sat(f))
    return None


def check_ctl(model, f, strict_atoms=False, warnings=None):
    """
    Decide whether every initial state satisfies `f` and attach evidence for the top-level operator:
    a shortest path to a violating state for failing AG, a witness path for EF, E[U] and EX, a lasso
    for failing AF and holding EG, and the witness of the negated existential for failing !EX, !EF,
    !E[U] and !EG.

    Parameters
    ----------
    model: KripkeStructure
    f: formula
    strict_atoms: bool
    warnings: list, optional
    Returns
    -------
    SatResult
    """
    labeler = _Labeler(model, strict_atoms, warnings)
    satisfied = labeler.sat(f)
    failing = sorted(model.initial - satisfied)
    holds = not failing
    evidence = None
    if holds:
        evidence = _witness(model, labeler, f, min(model.initial))
    elif isinstance(f, Temporal) and f.op == "AG":
        evidence = FinitePath(shortest_path(model, model.initial, labeler.all - labeler.sat(f.arg)))
    elif isinstance(f, Temporal) and f.op == "AF":
        evidence = lasso_within(model, failing[0], labeler.sat(Temporal("EG", Not(f.arg))))
    elif isinstance(f, Not):
        evidence = _witness(model, labeler, f.arg, failing[0])
    LOGGER.debug("ctl %s: %s", format_formula(f), "holds" if holds else "fails")
    return SatResult(holds, evidence)
