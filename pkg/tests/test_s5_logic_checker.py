import itertools
import random

import networkx as nx
import pytest

from src.errors import FormulaParseError, UnknownAtom
from src.s2_weaver import ConcernValuation
from src.s4_kripke_model import KripkeStructure
from src.s5_logic_checker import (
    AND, FALSE, IFF, IMPLIES, OR, TRUE, Assignment, Atom, Binary, Const, FinitePath, Lasso, Not, Temporal, Until,
    check_config, check_ctl, eval_prop, format_formula, parse_ctl, parse_prop, sat_set,
)

ATOMS = ["p0", "p1", "p2", "p3"]
UNARY = ["EX", "AX", "EF", "AF", "EG", "AG"]


def kripke(transitions, labels, initial=(0,)):
    states = tuple(sorted(labels))
    return KripkeStructure(states, frozenset(initial), frozenset(transitions), {s: frozenset(labels[s]) for s in states})


# ------- Parsing ---------

@pytest.mark.parametrize("text, expected", [
    ("C -> (A & B)", Binary(IMPLIES, Atom("C"), Binary(AND, Atom("A"), Atom("B")))),
    ("A -> (L & E)", Binary(IMPLIES, Atom("A"), Binary(AND, Atom("L"), Atom("E")))),
    ("a -> b -> c", Binary(IMPLIES, Atom("a"), Binary(IMPLIES, Atom("b"), Atom("c")))),
    ("a <-> b <-> c", Binary(IFF, Atom("a"), Binary(IFF, Atom("b"), Atom("c")))),
    ("a & b | c", Binary(OR, Binary(AND, Atom("a"), Atom("b")), Atom("c"))),
    ("a | b & c", Binary(OR, Atom("a"), Binary(AND, Atom("b"), Atom("c")))),
    ("a <-> b -> c", Binary(IFF, Atom("a"), Binary(IMPLIES, Atom("b"), Atom("c")))),
    ("!a & b", Binary(AND, Not(Atom("a")), Atom("b"))),
    ("a->b", Binary(IMPLIES, Atom("a"), Atom("b"))),
    ("true | false", Binary(OR, TRUE, FALSE)),
    ("P & A & B & C & L & E", Binary(AND, Binary(AND, Binary(AND, Binary(AND, Binary(AND, Atom("P"), Atom("A")),
                                                                        Atom("B")), Atom("C")), Atom("L")), Atom("E"))),
])
def test_parse_prop(text, expected):
    assert parse_prop(text) == expected


@pytest.mark.parametrize("text, expected", [
    ("AG p -> q", Binary(IMPLIES, Temporal("AG", Atom("p")), Atom("q"))),
    ("EF exit", Temporal("EF", Atom("exit"))),
    ("!E[!action:isUserAuthorized U action:fetch]",
     Not(Until("E", Not(Atom("action:isUserAuthorized")), Atom("action:fetch")))),
    ("A[p U q | r]", Until("A", Atom("p"), Binary(OR, Atom("q"), Atom("r")))),
    ("AG (action:fetch -> AF action:log-end)",
     Temporal("AG", Binary(IMPLIES, Atom("action:fetch"), Temporal("AF", Atom("action:log-end"))))),
    ("A & E", Binary(AND, Atom("A"), Atom("E"))),
    ("EX AX p", Temporal("EX", Temporal("AX", Atom("p")))),
])
def test_parse_ctl(text, expected):
    assert parse_ctl(text) == expected


@pytest.mark.parametrize("text, position", [
    ("a &", 3),
    ("(a", 2),
    ("a b", 2),
    ("", 0),
    ("E[a b]", 4),
    ("a $ b", 2),
    ("a -> )", 5),
])
def test_formula_parse_errors(text, position):
    with pytest.raises(FormulaParseError) as err:
        parse_ctl(text)
    assert err.value.position == position
    assert err.value.expected


@pytest.mark.parametrize("text, expected", [
    ("!!a", Not(Not(Atom("a")))),
    ("! EF a", Not(Temporal("EF", Atom("a")))),
    ("true:x", Atom("true:x")),
    ("EX:p", Atom("EX:p")),
    ("EXp & Ef", Binary(AND, Atom("EXp"), Atom("Ef"))),
    ("E[true U false]", Until("E", TRUE, FALSE)),
    ("E[A[a U b] U (c)]", Until("E", Until("A", Atom("a"), Atom("b")), Atom("c"))),
    ("a\t->\tb", Binary(IMPLIES, Atom("a"), Atom("b"))),
])
def test_parse_ctl_keyword_shaped_atoms(text, expected):
    assert parse_ctl(text) == expected


@pytest.mark.parametrize("text, position, expected", [
    ("a &", 3, "atom"),
    ("E[a b]", 4, "'U'"),
    ("(a", 2, "')'"),
    ("a b", 2, "end of formula"),
    ("AG", 2, "atom"),
])
def test_formula_parse_error_expectations(text, position, expected):
    with pytest.raises(FormulaParseError) as err:
        parse_ctl(text)
    assert err.value.position == position
    assert expected in err.value.expected


def test_parser_recovers_after_an_error():
    with pytest.raises(FormulaParseError):
        parse_ctl("E[a b]")
    assert parse_ctl("E[a U b]") == Until("E", Atom("a"), Atom("b"))
    with pytest.raises(FormulaParseError) as err:
        parse_prop("a |")
    assert err.value.position == 3


def test_temporal_operators_are_atoms_in_configuration_formulas():
    assert parse_prop("AG") == Atom("AG")
    with pytest.raises(FormulaParseError):
        parse_prop("AG p")


def random_formula(rng, depth, temporal=True):
    if depth == 0 or rng.random() < 0.2:
        return rng.choice([Atom(rng.choice(ATOMS)), Atom(rng.choice(ATOMS)), TRUE, FALSE])
    roll = rng.random()
    if roll < 0.2:
        return Not(random_formula(rng, depth - 1, temporal))
    if roll < 0.5 or not temporal:
        return Binary(rng.choice([AND, OR, IMPLIES, IFF]),
                      random_formula(rng, depth - 1, temporal), random_formula(rng, depth - 1, temporal))
    if roll < 0.85:
        return Temporal(rng.choice(UNARY), random_formula(rng, depth - 1))
    return Until(rng.choice("AE"), random_formula(rng, depth - 1), random_formula(rng, depth - 1))


def test_printed_formulas_reparse():
    rng = random.Random(11)
    for _ in range(300):
        f = random_formula(rng, 4)
        assert parse_ctl(format_formula(f)) == f, format_formula(f)
        g = random_formula(rng, 4, temporal=False)
        assert parse_prop(format_formula(g)) == g


# ------- Configuration formulas ---------

FULL = ConcernValuation({c: True for c in "PABCLE"})


def test_eval_prop():
    assert eval_prop(parse_prop("C -> (A & B)"), FULL) is True
    assert eval_prop(parse_prop("A -> (L & E)"), ConcernValuation({"A": True, "L": False, "E": True})) is False
    assert eval_prop(TRUE, ConcernValuation({})) is True
    assert eval_prop(parse_prop("C <-> (A & B)"), ConcernValuation({"A": True, "B": False, "C": False})) is True


def test_eval_prop_unknown_atom():
    with pytest.raises(UnknownAtom) as err:
        eval_prop(parse_prop("A & Z"), FULL)
    assert err.value.name == "Z"


def test_check_config():
    formulas = [("p1", parse_prop("P & A & B & C & L & E")), ("p3", parse_prop("A -> (L & E)"))]
    assert [r.holds for r in check_config(formulas, FULL)] == [True, True]
    without_logging = ConcernValuation({**FULL.as_dict(), "L": False})
    results = check_config(formulas, without_logging)
    assert [r.holds for r in results] == [False, False]
    assert results[1].evidence == Assignment(without_logging)
    assert results[1].evidence_dict() == {"type": "assignment", "valuation": without_logging.as_dict()}
    assert check_config([], FULL) == []


# ------- CTL on the corpus model ---------

def test_sat_set_examples(history_model):
    assert sat_set(history_model, parse_ctl("AG true")) == frozenset(history_model.states)
    assert 0 in sat_set(history_model, parse_ctl("EF error"))
    assert 0 in sat_set(history_model, parse_ctl("!E[!action:isUserAuthorized U action:fetch]"))


def test_ag_failure_path(history_model):
    result = check_ctl(history_model, parse_ctl("AG (action:fetch -> false)"))
    assert not result.holds
    assert result.evidence == FinitePath((0, 1, 2, 3, 4))
    assert result.evidence_dict(history_model)["labels"][-1] == ["action:fetch", "call:Database.fetch", "prop:sensitive"]


def test_ef_witness(history_model):
    result = check_ctl(history_model, parse_ctl("EF exit"))
    assert result.holds
    assert result.evidence == FinitePath((0, 1, 2, 3, 4, 5, 6, 7))


def test_ex_witness(history_model):
    result = check_ctl(history_model, parse_ctl("EX action:isUserAuthorized"))
    assert result.holds and result.evidence == FinitePath((0, 1))


def test_af_failure_lasso(history_model):
    result = check_ctl(history_model, parse_ctl("AF exit"))
    assert not result.holds
    assert result.evidence == Lasso((0, 1, 2, 8), (9,))
    assert result.evidence_dict(history_model)["cycle"] == [9]


def test_eg_witness_lasso(history_model):
    result = check_ctl(history_model, parse_ctl("EG !exit"))
    assert result.holds
    assert result.evidence == Lasso((0, 1, 2, 8), (9,))


def test_holding_universal_has_no_evidence(history_model):
    result = check_ctl(history_model, parse_ctl("AG (action:throw:UnauthorizedAccessException -> AX error)"))
    assert result.holds and result.evidence is None


@pytest.mark.parametrize("text, expected", [
    ("!EF bad", FinitePath((0, 2))),
    ("!EX bad", FinitePath((0, 2))),
    ("!E[ok U bad]", FinitePath((0, 2))),
    ("!EG !good", Lasso((0,), (2,))),
])
def test_negated_existential_counterexample(text, expected):
    model = kripke({(0, 1), (0, 2), (1, 1), (2, 2)}, {0: {"ok"}, 1: {"good"}, 2: {"bad"}})
    result = check_ctl(model, parse_ctl(text))
    assert not result.holds
    assert result.evidence == expected


def test_unknown_atoms_warn_or_raise(history_model):
    warnings = []
    result = check_ctl(history_model, parse_ctl("EF action:fecth"), warnings=warnings)
    assert not result.holds
    assert len(warnings) == 1 and "action:fecth" in warnings[0]
    with pytest.raises(UnknownAtom):
        check_ctl(history_model, parse_ctl("EF action:fecth"), strict_atoms=True)


# ------- Differential testing ---------

def random_model(rng):
    n = rng.randint(1, 8)
    labels = {s: {a for a in ATOMS if rng.random() < 0.4} for s in range(n)}
    transitions = {(s, rng.randrange(n)) for s in range(n) for _ in range(rng.randint(1, 3))}
    initial = {s for s in range(n) if rng.random() < 0.3} or {0}
    return kripke(transitions, labels, initial)


def naive_sat(model, f):
    """Satisfaction set straight from the semantics, every fixpoint iterated from its definition."""
    states = set(model.states)

    def some_succ_in(x):
        return {s for s in states if any(t in x for t in model.successors(s))}

    def all_succ_in(x):
        return {s for s in states if all(t in x for t in model.successors(s))}

    def lfp(step):
        x = set()
        while step(x) != x:
            x = step(x)
        return x

    def gfp(step):
        x = set(states)
        while step(x) != x:
            x = step(x)
        return x

    if isinstance(f, Const):
        return set(states) if f.value else set()
    if isinstance(f, Atom):
        return {s for s in states if f.name in model.labels(s)}
    if isinstance(f, Not):
        return states - naive_sat(model, f.arg)
    if isinstance(f, Binary):
        left, right = naive_sat(model, f.left), naive_sat(model, f.right)
        return {s for s in states if {
            AND: lambda a, b: a and b,
            OR: lambda a, b: a or b,
            IMPLIES: lambda a, b: (not a) or b,
            IFF: lambda a, b: a == b,
        }[f.op](s in left, s in right)}
    if isinstance(f, Until):
        left, right = naive_sat(model, f.left), naive_sat(model, f.right)
        succ = some_succ_in if f.quantifier == "E" else all_succ_in
        return lfp(lambda x: right | (left & succ(x)))
    body = naive_sat(model, f.arg)
    return {
        "EX": lambda: some_succ_in(body),
        "AX": lambda: all_succ_in(body),
        "EF": lambda: lfp(lambda x: body | some_succ_in(x)),
        "AF": lambda: lfp(lambda x: body | all_succ_in(x)),
        "EG": lambda: gfp(lambda x: body & some_succ_in(x)),
        "AG": lambda: gfp(lambda x: body & all_succ_in(x)),
    }[f.op]()


def test_sat_set_agrees_with_naive_semantics():
    rng = random.Random(1)
    for _ in range(1000):
        model, f = random_model(rng), random_formula(rng, 4)
        assert sat_set(model, f, warnings=[]) == naive_sat(model, f), format_formula(f)


def test_complement_and_dualities():
    rng = random.Random(2)
    for _ in range(200):
        model, f = random_model(rng), random_formula(rng, 3)
        everything = frozenset(model.states)

        def sat(g):
            return sat_set(model, g, warnings=[])

        assert sat(Not(f)) == everything - sat(f)
        assert sat(Temporal("AG", f)) == everything - sat(Temporal("EF", Not(f)))
        assert sat(Temporal("EF", f)) == sat(Until("E", TRUE, f))
        assert sat(Temporal("AF", f)) == everything - sat(Temporal("EG", Not(f)))


def test_eg_is_the_greatest_closed_subset():
    rng = random.Random(3)
    for _ in range(200):
        model, f = random_model(rng), random_formula(rng, 2, temporal=False)
        body = sat_set(model, f, warnings=[])
        eg = sat_set(model, Temporal("EG", f), warnings=[])
        assert eg <= body
        assert all(any(t in eg for t in model.successors(s)) for s in eg)
        extra = sorted(body - eg)
        for size in range(1, len(extra) + 1):
            for added in itertools.combinations(extra, size):
                bigger = eg | set(added)
                assert not all(any(t in bigger for t in model.successors(s)) for s in bigger)


def test_ag_counterexamples_are_shortest_paths():
    rng = random.Random(4)
    failures = 0
    while failures < 500:
        model, body = random_model(rng), random_formula(rng, 2, temporal=False)
        result = check_ctl(model, Temporal("AG", body), warnings=[])
        if result.holds:
            continue
        failures += 1
        path = result.evidence.states
        assert path[0] in model.initial
        assert all((a, b) in model.transitions for a, b in zip(path, path[1:]))
        violating = set(model.states) - sat_set(model, body, warnings=[])
        assert path[-1] in violating
        assert all(s not in violating for s in path[:-1])
        distances = [
            length
            for start in model.initial
            for target, length in nx.single_source_shortest_path_length(model.graph, start).items()
            if target in violating
        ]
        assert len(path) - 1 == min(distances)


def test_lassos_are_closed_and_reachable():
    rng = random.Random(5)
    checked = 0
    while checked < 200:
        model, body = random_model(rng), random_formula(rng, 2, temporal=False)
        result = check_ctl(model, Temporal("AF", body), warnings=[])
        if result.holds:
            continue
        checked += 1
        lasso = result.evidence
        walk = lasso.prefix + lasso.cycle + lasso.cycle[:1]
        assert walk[0] in model.initial
        assert all((a, b) in model.transitions for a, b in zip(walk, walk[1:]))
        assert not any(s in sat_set(model, body, warnings=[]) for s in walk)
