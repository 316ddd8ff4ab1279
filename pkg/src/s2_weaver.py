"""
Enumerate call join points, match pointcut patterns against call signatures and bind advice
statically. The base program is never modified.
"""
import logging
import re
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from pathlib import Path
from typing import Optional

import pandas as pd

from Config import DevConfig, ModelConfig
from src.errors import AliasError
from src.s1_aop_frontend import Call, If, While, check_precedence_names, load_program
from src.utils import corpus_sources, get_data_dir

LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class Signature:
    receiver: str
    method: str
    arity: int


@dataclass(frozen=True)
class JoinPoint:
    owner: str  # "Type.method" for base code, advice_owner(...) for advice bodies
    path: tuple
    signature: Signature
    aspect: Optional[str] = field(default=None, compare=False)  # aspect owning the advice body, if any


@dataclass(frozen=True)
class AdviceBinding:
    joinpoint: JoinPoint
    aspect: str
    ordinal: int
    kind: str
    rank: int

    @property
    def sort_key(self):
        return self.joinpoint.owner, self.joinpoint.path, self.rank, self.ordinal


@dataclass(frozen=True)
class WovenProgram:
    program: object
    bindings: tuple

    @cached_property
    def _by_site(self):
        index = {}
        for binding in self.bindings:
            index.setdefault((binding.joinpoint.owner, binding.joinpoint.path), []).append(binding)
        return index

    def bindings_at(self, owner, path):
        return tuple(self._by_site.get((owner, tuple(path)), ()))

    def woven_aspects(self):
        return {binding.aspect for binding in self.bindings}


class ConcernValuation:
    """Truth assignment recording which concerns are actually woven into the system."""

    def __init__(self, values):
        self._values = dict(sorted(values.items()))

    def __getitem__(self, concern):
        return self._values[concern]

    def __contains__(self, concern):
        return concern in self._values

    def __eq__(self, other):
        return isinstance(other, ConcernValuation) and self._values == other._values

    def __repr__(self):
        return f"ConcernValuation({self._values!r})"

    def keys(self):
        return self._values.keys()

    def items(self):
        return self._values.items()

    def as_dict(self):
        return dict(self._values)


def advice_owner(aspect, ordinal):
    return f"{aspect}.advice[{ordinal}]"


def _walk_calls(body, prefix=()):
    for index, stmt in enumerate(body):
        path = prefix + (index,)
        if isinstance(stmt, Call):
            yield path, stmt
        elif isinstance(stmt, If):
            yield from _walk_calls(stmt.then_body, path + (0,))
            yield from _walk_calls(stmt.else_body or (), path + (1,))
        elif isinstance(stmt, While):
            yield from _walk_calls(stmt.body, path + (0,))


def enumerate_join_points(program_):
    """
    One JoinPoint per Call statement in every method body and every advice body.

    Parameters
    ----------
    program_: Program
    Returns
    -------
    join_points_: list of JoinPoint
        Methods first in declaration order, then advice bodies in declaration order; within a body
        in statement order.
    """
    join_points_ = []
    for type_decl in program_.types:
        for method in type_decl.methods:
            owner = f"{type_decl.name}.{method.name}"
            join_points_.extend(
                JoinPoint(owner, path, Signature(call.receiver, call.method, call.arg_count))
                for path, call in _walk_calls(method.body)
            )
    for aspect in program_.aspects:
        for ordinal, advice in enumerate(aspect.advice):
            owner = advice_owner(aspect.name, ordinal)
            join_points_.extend(
                JoinPoint(owner, path, Signature(call.receiver, call.method, call.arg_count), aspect.name)
                for path, call in _walk_calls(advice.body)
            )
    return join_points_


@lru_cache(maxsize=1024)
def _glob_re(glob):
    return re.compile(".*".join(re.escape(part) for part in glob.split("*")))


def glob_match(glob, name):
    return _glob_re(glob).fullmatch(name) is not None


def match(pattern, sig):
    """True iff both globs match (`*` = zero or more characters, anchored) and the arity agrees."""
    return (
        glob_match(pattern.receiver_glob, sig.receiver)
        and glob_match(pattern.method_glob, sig.method)
        and (pattern.arity is None or pattern.arity == sig.arity)
    )


def precedence_ranks(program_):
    """
    Rank per aspect, lower = higher precedence: position in the precedence directive, then
    unlisted aspects in declaration order.
    """
    listed = list(program_.precedence or ())
    unlisted = [a.name for a in program_.aspects if a.name not in listed]
    return {name: rank for rank, name in enumerate(listed + unlisted)}


def weave(program_):
    """
    Bind every advice to every join point its pattern matches. An advice never advises join points
    inside its own aspect's advice bodies.

    Parameters
    ----------
    program_: Program
    Returns
    -------
    WovenProgram
        Bindings sorted by (join point owner, path, precedence rank, advice ordinal).
    Raises
    -------
    PrecedenceError
        If the precedence directive names an undeclared aspect.
    """
    if program_.precedence:
        check_precedence_names(program_)
    ranks = precedence_ranks(program_)
    advice_patterns = [
        (aspect.name, ordinal, advice.kind, aspect.pattern_of(advice))
        for aspect in program_.aspects
        for ordinal, advice in enumerate(aspect.advice)
    ]
    bindings = [
        AdviceBinding(jp, aspect_name, ordinal, kind, ranks[aspect_name])
        for jp in enumerate_join_points(program_)
        for aspect_name, ordinal, kind, pattern in advice_patterns
        if aspect_name != jp.aspect and match(pattern, jp.signature)
    ]
    bindings.sort(key=lambda b: b.sort_key)
    LOGGER.debug("woven %d bindings", len(bindings))
    return WovenProgram(program_, tuple(bindings))


def execution_order(bindings):
    """
    Split the bindings of one join point into run order: before-advice by precedence, the around
    chain outermost first, after-advice in reverse precedence.
    """
    ordered = sorted(bindings, key=lambda b: (b.rank, b.ordinal))
    befores = [b for b in ordered if b.kind == "before"]
    arounds = [b for b in ordered if b.kind == "around"]
    afters = [b for b in reversed(ordered) if b.kind == "after"]
    return befores, arounds, afters


def presence_valuation(woven, aliases=None, core_id=ModelConfig.CORE_CONCERN_ID, strict=True, warnings=None):
    """
    Concern valuation of the woven system: a concern is present iff its aspect is woven at least once.

    Parameters
    ----------
    woven: WovenProgram
    aliases: dict
        Aspect name -> concern id. Unaliased aspects are keyed by their own name.
    core_id: str
        Concern id of the core functionality; true iff some class declares a method.
    strict: bool
        Raise AliasError for aliases naming undeclared aspects. Otherwise the concern is recorded as
        absent and a warning is appended to `warnings`.
    warnings: list, optional
        Collector for warning messages.
    Returns
    -------
    ConcernValuation
    Raises
    -------
    AliasError
    """
    aliases = dict(aliases or {})
    declared = [a.name for a in woven.program.aspects]
    woven_names = woven.woven_aspects()
    values = {core_id: any(t.methods for t in woven.program.types)}
    for name, concern in sorted(aliases.items()):
        if name not in declared:
            if strict:
                raise AliasError(f"alias {name}={concern} names an undeclared aspect")
            message = f"alias {name}={concern}: aspect {name} is not in the program; concern {concern} is absent"
            LOGGER.warning(message)
            if warnings is not None:
                warnings.append(message)
            values.setdefault(concern, False)
    for name in declared:
        concern = aliases.get(name, name)
        values[concern] = values.get(concern, False) or name in woven_names
    return ConcernValuation(values)


def binding_frame(woven):
    return pd.DataFrame(
        [
            {
                "owner": b.joinpoint.owner,
                "path": ".".join(map(str, b.joinpoint.path)),
                "call": f"{b.joinpoint.signature.receiver}.{b.joinpoint.signature.method}/{b.joinpoint.signature.arity}",
                "aspect": b.aspect,
                "advice": b.ordinal,
                "kind": b.kind,
                "rank": b.rank,
            }
            for b in woven.bindings
        ],
        columns=["owner", "path", "call", "aspect", "advice", "kind", "rank"],
    )


# if __name__ == "__main__":
def run_weave_process(sources=None, out_dir=None):
    # Weave the corpus and output the advice binding table.
    # ************************************************************************************
    woven = weave(load_program(sources or corpus_sources()))
    out_dir = Path(out_dir or get_data_dir(DevConfig.DIR_NAME_INTERIM))
    binding_frame(woven).to_csv(out_dir / DevConfig.INTERIM_CSV_BINDINGS, index=False)
    return woven
