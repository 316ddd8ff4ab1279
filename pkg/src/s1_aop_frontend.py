"""
Tokenize and parse mini-DSL (.osm) sources into a validated Program AST, print it back in canonical
form, and collect per-aspect metadata with a visitor.
"""
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Tuple, Union

import inflection
import pandas as pd

from Config import DevConfig, ModelConfig
from src.errors import DuplicateName, LexError, ParseError, PrecedenceError, UnknownPointcut
from src.utils import corpus_sources, expand_sources, get_data_dir, read_text

LOGGER = logging.getLogger(__name__)

KEYWORD = "keyword"
IDENTIFIER = "identifier"
INTEGER = "integer"
SYMBOL = "symbol"
END = "end-of-input"

KEYWORDS = frozenset({
    "class", "aspect", "pointcut", "call", "before", "after", "around", "if", "else", "while",
    "throw", "return", "atomic", "proceed", "precedence", "@prop",
})
ADVICE_KINDS = ("before", "after", "around")

# Identifiers may carry interior hyphens (log-start).
IDENTIFIER_PATTERN = r"[A-Za-z_][A-Za-z0-9_]*(?:-[A-Za-z0-9_]+)*"

_TOKEN_RE = re.compile(
    r"(?P<space>[ \t\r\n\f\v]+)"
    r"|(?P<comment>//[^\n]*)"
    r"|(?P<annotation>@prop\b)"
    r"|(?P<integer>[0-9]+)"
    rf"|(?P<name>{IDENTIFIER_PATTERN})"
    r"|(?P<symbol>\.\.|[{}();:,.*])"
)


@dataclass(frozen=True)
class Token:
    kind: str
    lexeme: str
    line: int
    col: int


@dataclass(frozen=True)
class SourcePos:
    line: int
    col: int
    source_name: Optional[str] = None


# ------- AST ---------
# Positions never take part in equality, so a reparsed program compares equal to the original.

@dataclass(frozen=True)
class CallPattern:
    receiver_glob: str
    method_glob: str
    arity: Optional[int] = None  # None matches any arity


@dataclass(frozen=True)
class Call:
    receiver: str
    method: str
    arg_count: int = 0
    pos: Optional[SourcePos] = field(default=None, compare=False)


@dataclass(frozen=True)
class If:
    cond: Union[Call, str]
    then_body: tuple
    else_body: Optional[tuple] = None
    pos: Optional[SourcePos] = field(default=None, compare=False)


@dataclass(frozen=True)
class While:
    cond: Union[Call, str]
    body: tuple
    pos: Optional[SourcePos] = field(default=None, compare=False)


@dataclass(frozen=True)
class Throw:
    exception: str
    pos: Optional[SourcePos] = field(default=None, compare=False)


@dataclass(frozen=True)
class Return:
    pos: Optional[SourcePos] = field(default=None, compare=False)


@dataclass(frozen=True)
class Atomic:
    label: str
    pos: Optional[SourcePos] = field(default=None, compare=False)


@dataclass(frozen=True)
class Proceed:
    pos: Optional[SourcePos] = field(default=None, compare=False)


@dataclass(frozen=True)
class MethodDecl:
    name: str
    arity: int
    annotations: frozenset
    body: tuple
    pos: Optional[SourcePos] = field(default=None, compare=False)


@dataclass(frozen=True)
class TypeDecl:
    name: str
    methods: tuple
    pos: Optional[SourcePos] = field(default=None, compare=False)

    def method(self, name):
        return next((m for m in self.methods if m.name == name), None)


@dataclass(frozen=True)
class PointcutDecl:
    name: str
    pattern: CallPattern
    pos: Optional[SourcePos] = field(default=None, compare=False)


@dataclass(frozen=True)
class AdviceDecl:
    kind: str
    target: Union[str, CallPattern]  # pointcut name or inline pattern
    body: tuple
    annotations: frozenset = frozenset()
    pos: Optional[SourcePos] = field(default=None, compare=False)


@dataclass(frozen=True)
class AspectDecl:
    name: str
    pointcuts: tuple
    advice: tuple
    pos: Optional[SourcePos] = field(default=None, compare=False)

    def pointcut(self, name):
        return next((p for p in self.pointcuts if p.name == name), None)

    def pattern_of(self, advice):
        if isinstance(advice.target, CallPattern):
            return advice.target
        return self.pointcut(advice.target).pattern


@dataclass(frozen=True)
class Program:
    declarations: tuple = ()
    precedence: Optional[Tuple[str, ...]] = None
    precedence_pos: Optional[SourcePos] = field(default=None, compare=False)

    @property
    def types(self):
        return tuple(d for d in self.declarations if isinstance(d, TypeDecl))

    @property
    def aspects(self):
        return tuple(d for d in self.declarations if isinstance(d, AspectDecl))

    def aspect(self, name):
        return next((a for a in self.aspects if a.name == name), None)

    def type_decl(self, name):
        return next((t for t in self.types if t.name == name), None)

    def find_method(self, type_name, method_name):
        type_decl = self.type_decl(type_name)
        return None if type_decl is None else type_decl.method(method_name)


@dataclass(frozen=True)
class AspectInfo:
    name: str
    pointcut_count: int
    advice_counts: tuple  # ((kind, count), ...) for every advice kind

    def count(self, kind):
        return dict(self.advice_counts)[kind]


# ------- Tokenizer ---------

def tokenize(source, source_name=None):
    """
    Split mini-DSL source text into tokens; whitespace and `//` comments are dropped.

    Parameters
    ----------
    source: str
        Source text.
    source_name: str, optional
        File name used in diagnostics.
    Returns
    -------
    tokens_: list of Token
        The last token is always the end-of-input token.
    Raises
    -------
    LexError
        On the first character outside the grammar's alphabet.
    """
    tokens_ = []
    pos, line, line_start = 0, 1, 0
    while pos < len(source):
        match = _TOKEN_RE.match(source, pos)
        if match is None:
            raise LexError(line, pos - line_start + 1, source[pos], source_name)
        group, lexeme = match.lastgroup, match.group()
        col = pos - line_start + 1
        if group == "annotation":
            tokens_.append(Token(KEYWORD, lexeme, line, col))
        elif group == "name":
            tokens_.append(Token(KEYWORD if lexeme in KEYWORDS else IDENTIFIER, lexeme, line, col))
        elif group == "integer":
            tokens_.append(Token(INTEGER, lexeme, line, col))
        elif group == "symbol":
            tokens_.append(Token(SYMBOL, lexeme, line, col))
        newlines = lexeme.count("\n")
        if newlines:
            line += newlines
            line_start = pos + lexeme.rindex("\n") + 1
        pos = match.end()
    # End-of-input sits on the last character so that diagnostics address the input.
    if source:
        last = len(source) - 1
        end_line = source.count("\n", 0, last) + 1
        end_col = last - (source.rfind("\n", 0, last) + 1) + 1
    else:
        end_line, end_col = 1, 1
    tokens_.append(Token(END, "", end_line, end_col))
    return tokens_


# ------- Parser ---------

class _Parser:
    def __init__(self, source, source_name=None):
        self.tokens = tokenize(source, source_name)
        self.index = 0
        self.source_name = source_name

    @property
    def tok(self):
        return self.tokens[self.index]

    def peek(self, offset=1):
        return self.tokens[min(self.index + offset, len(self.tokens) - 1)]

    def at(self, lexeme):
        return self.tok.kind in (KEYWORD, SYMBOL) and self.tok.lexeme == lexeme

    def fail(self, expected, message=None, token=None, error=ParseError):
        token = token or self.tok
        raise error(token.line, token.col, expected, message, self.source_name)

    def pos(self, token=None):
        token = token or self.tok
        return SourcePos(token.line, token.col, self.source_name)

    def advance(self):
        token = self.tok
        if token.kind != END:
            self.index += 1
        return token

    def expect(self, lexeme):
        if not self.at(lexeme):
            self.fail({repr(lexeme)})
        return self.advance()

    def expect_ident(self, what="identifier"):
        if self.tok.kind != IDENTIFIER:
            self.fail({what})
        return self.advance().lexeme

    def accept(self, lexeme):
        if self.at(lexeme):
            return self.advance()
        return None

    def adjacent(self, first, second):
        return first.line == second.line and first.col + len(first.lexeme) == second.col

    # program := (typedecl | aspectdecl | precedence)*
    def program(self):
        declarations = []
        precedence, precedence_pos = None, None
        while self.tok.kind != END:
            if self.at("class"):
                declarations.append(self.type_decl())
            elif self.at("aspect"):
                declarations.append(self.aspect_decl())
            elif self.at("precedence"):
                if precedence is not None:
                    self.fail(set(), "a program holds at most one precedence directive", error=DuplicateName)
                precedence_pos = self.pos()
                precedence = self.precedence()
            else:
                self.fail({"'class'", "'aspect'", "'precedence'"})
        return Program(tuple(declarations), precedence, precedence_pos)

    def precedence(self):
        self.expect("precedence")
        names = [self.expect_ident("aspect name")]
        while self.accept(","):
            token = self.tok
            name = self.expect_ident("aspect name")
            if name in names:
                self.fail(set(), f"aspect {name} listed twice in precedence", token=token, error=DuplicateName)
            names.append(name)
        self.expect(";")
        return tuple(names)

    def type_decl(self):
        pos = self.pos()
        self.expect("class")
        name = self.expect_ident("class name")
        self.expect("{")
        methods = []
        while not self.at("}"):
            token = self.tok
            method = self.method()
            if any(m.name == method.name for m in methods):
                self.fail(set(), f"method {name}.{method.name} declared twice", token=token, error=DuplicateName)
            methods.append(method)
        self.expect("}")
        return TypeDecl(name, tuple(methods), pos)

    def annotations(self):
        names = set()
        while self.accept("@prop"):
            self.expect("(")
            names.add(self.expect_ident("proposition name"))
            self.expect(")")
        return frozenset(names)

    def method(self):
        annotations = self.annotations()
        pos = self.pos()
        if self.tok.kind != IDENTIFIER:
            self.fail({"method name", "'@prop'", "'}'"})
        name = self.advance().lexeme
        self.expect("(")
        arity = 0
        if self.tok.kind == INTEGER:
            arity = int(self.advance().lexeme)
        self.expect(")")
        return MethodDecl(name, arity, annotations, self.block(in_around=False), pos)

    def block(self, in_around, proceeds=None):
        self.expect("{")
        stmts = []
        while not self.at("}"):
            if self.tok.kind == END:
                self.fail({"'}'"})
            stmts.append(self.stmt(in_around, proceeds))
        self.expect("}")
        return tuple(stmts)

    def stmt(self, in_around, proceeds):
        pos = self.pos()
        if self.tok.kind == IDENTIFIER:
            call = self.call()
            self.expect(";")
            return call
        if self.accept("if"):
            cond = self.cond()
            then_body = self.block(in_around, proceeds)
            else_body = self.block(in_around, proceeds) if self.accept("else") else None
            return If(cond, then_body, else_body, pos)
        if self.accept("while"):
            cond = self.cond()
            return While(cond, self.block(in_around, proceeds), pos)
        if self.accept("throw"):
            exception = self.expect_ident("exception name")
            self.expect(";")
            return Throw(exception, pos)
        if self.accept("return"):
            self.expect(";")
            return Return(pos)
        if self.accept("atomic"):
            label = self.expect_ident("action label")
            self.expect(";")
            return Atomic(label, pos)
        if self.at("proceed"):
            token = self.advance()
            if not in_around:
                self.fail(set(), "proceed() outside around advice", token=token)
            if proceeds:
                self.fail(set(), "around advice may proceed at most once", token=token)
            proceeds.append(token)
            self.expect("(")
            self.expect(")")
            self.expect(";")
            return Proceed(pos)
        self.fail({"statement"})

    def call(self):
        pos = self.pos()
        receiver = self.expect_ident("receiver name")
        self.expect(".")
        method = self.expect_ident("method name")
        self.expect("(")
        arg_count = int(self.advance().lexeme) if self.tok.kind == INTEGER else 0
        self.expect(")")
        return Call(receiver, method, arg_count, pos)

    def cond(self):
        self.expect("(")
        if self.tok.kind != IDENTIFIER:
            self.fail({"condition"})
        cond = self.call() if self.peek().lexeme == "." and self.peek().kind == SYMBOL else self.advance().lexeme
        self.expect(")")
        return cond

    def aspect_decl(self):
        pos = self.pos()
        self.expect("aspect")
        name = self.expect_ident("aspect name")
        self.expect("{")
        pointcuts, advice = [], []
        while not self.at("}"):
            if self.at("pointcut"):
                token = self.tok
                pointcut = self.pointcut_decl()
                if any(p.name == pointcut.name for p in pointcuts):
                    self.fail(set(), f"pointcut {name}.{pointcut.name} declared twice", token=token, error=DuplicateName)
                pointcuts.append(pointcut)
            elif self.at("@prop") or any(self.at(kind) for kind in ADVICE_KINDS):
                advice.append(self.advice_decl())
            else:
                self.fail({"'pointcut'", "'before'", "'after'", "'around'", "'}'"})
        self.expect("}")
        declared = {p.name for p in pointcuts}
        for item in advice:
            if isinstance(item.target, str) and item.target not in declared:
                raise UnknownPointcut(
                    item.pos.line, item.pos.col, (), f"advice refers to undeclared pointcut {item.target}",
                    self.source_name,
                )
        return AspectDecl(name, tuple(pointcuts), tuple(advice), pos)

    def pointcut_decl(self):
        pos = self.pos()
        self.expect("pointcut")
        name = self.expect_ident("pointcut name")
        if self.accept("("):
            self.expect(")")
        self.expect(":")
        pattern = self.call_pattern()
        self.expect(";")
        return PointcutDecl(name, pattern, pos)

    def advice_decl(self):
        annotations = self.annotations()
        pos = self.pos()
        if not any(self.at(kind) for kind in ADVICE_KINDS):
            self.fail({"'before'", "'after'", "'around'"})
        kind = self.advance().lexeme
        self.expect("(")
        self.expect(")")
        self.expect(":")
        if self.at("call"):
            target = self.call_pattern()
        else:
            target = self.expect_ident("pointcut name")
            if self.accept("("):
                self.expect(")")
        proceeds = [] if kind == "around" else None
        body = self.block(in_around=kind == "around", proceeds=proceeds)
        return AdviceDecl(kind, target, body, annotations, pos)

    # pattern := ["*"] glob "." glob "(" (".." | integer)? ")"
    def call_pattern(self):
        self.expect("call")
        self.expect("(")
        if self.at("*") and not self.adjacent(self.tok, self.peek()) and self.peek().lexeme != ".":
            self.advance()  # return-type wildcard
        receiver = self.glob()
        self.expect(".")
        method = self.glob()
        self.expect("(")
        arity = 0
        if self.accept(".."):
            arity = None
        elif self.tok.kind == INTEGER:
            arity = int(self.advance().lexeme)
        self.expect(")")
        self.expect(")")
        return CallPattern(receiver, method, arity)

    def glob(self):
        if not (self.tok.kind == IDENTIFIER or self.at("*")):
            self.fail({"name pattern"})
        parts = [self.advance()]
        while (self.tok.kind == IDENTIFIER or self.at("*")) and self.adjacent(parts[-1], self.tok):
            parts.append(self.advance())
        return "".join(token.lexeme for token in parts)


def parse(source, source_name=None, check_precedence=True):
    """
    Parse mini-DSL source text into a validated Program.

    Parameters
    ----------
    source: str
        Source text of one .osm file.
    source_name: str, optional
        File name used in diagnostics and kept on every declaration position.
    check_precedence: bool
        Validate the precedence directive against the aspects of this source. Multi-file loading
        defers the check until every file is merged.
    Returns
    -------
    Program
    Raises
    -------
    LexError, ParseError, UnknownPointcut, DuplicateName, PrecedenceError
    """
    program_ = _Parser(source, source_name).program()
    check_program(program_, check_precedence=check_precedence)
    return program_


def load_program(paths):
    """
    Parse every .osm file under `paths` (directories expanded, sorted) and merge them into one Program.

    Parameters
    ----------
    paths: iterable of str or Path
    Returns
    -------
    Program
    """
    declarations = []
    precedence, precedence_pos = None, None
    for path in expand_sources(paths, ModelConfig.SOURCE_SUFFIX):
        part = parse(read_text(path), source_name=str(path), check_precedence=False)
        LOGGER.debug("parsed %s: %d declarations", path, len(part.declarations))
        declarations.extend(part.declarations)
        if part.precedence is not None:
            if precedence is not None:
                pos = part.precedence_pos
                raise DuplicateName(pos.line, pos.col, (), "a program holds at most one precedence directive", pos.source_name)
            precedence, precedence_pos = part.precedence, part.precedence_pos
    program_ = Program(tuple(declarations), precedence, precedence_pos)
    check_program(program_)
    return program_


def check_program(program_, check_precedence=True):
    """
    Check the cross-declaration invariants: unique declaration names and, optionally, that every
    precedence name is a declared aspect.
    """
    seen = set()
    for decl in program_.declarations:
        if decl.name in seen:
            pos = decl.pos or SourcePos(1, 1)
            raise DuplicateName(pos.line, pos.col, (), f"{decl.name} declared twice", pos.source_name)
        seen.add(decl.name)
    if check_precedence and program_.precedence:
        check_precedence_names(program_)


def check_precedence_names(program_):
    declared = {a.name for a in program_.aspects}
    unknown = [name for name in program_.precedence if name not in declared]
    if unknown:
        pos = program_.precedence_pos
        where = f"{pos.source_name + ':' if pos and pos.source_name else ''}{pos.line}:{pos.col}: " if pos else ""
        raise PrecedenceError(f"{where}precedence names undeclared aspect {', '.join(unknown)}")


# ------- Pretty printer ---------

INDENT = "    "


def pretty_print(program_):
    """
    Render a Program in canonical form; parse(pretty_print(p)) == p.

    Parameters
    ----------
    program_: Program
    Returns
    -------
    str
        "" for an empty program, otherwise newline-terminated text with one blank line between declarations.
    """
    chunks = []
    if program_.precedence:
        chunks.append("precedence " + ", ".join(program_.precedence) + ";\n")
    for decl in program_.declarations:
        lines = _type_lines(decl) if isinstance(decl, TypeDecl) else _aspect_lines(decl)
        chunks.append("\n".join(lines) + "\n")
    return "\n".join(chunks)


def format_pattern(pattern):
    if pattern.arity is None:
        arity = ".."
    else:
        arity = str(pattern.arity) if pattern.arity else ""
    return f"call(* {pattern.receiver_glob}.{pattern.method_glob}({arity}))"


def format_call(call):
    return f"{call.receiver}.{call.method}({call.arg_count or ''})"


def _type_lines(decl):
    lines = [f"class {decl.name} {{"]
    for method in decl.methods:
        lines.extend(INDENT + f"@prop({name})" for name in sorted(method.annotations))
        lines.extend(_block_lines(f"{method.name}({method.arity or ''})", method.body, 1))
    lines.append("}")
    return lines


def _aspect_lines(decl):
    lines = [f"aspect {decl.name} {{"]
    for pointcut in decl.pointcuts:
        lines.append(INDENT + f"pointcut {pointcut.name}(): {format_pattern(pointcut.pattern)};")
    for advice in decl.advice:
        target = format_pattern(advice.target) if isinstance(advice.target, CallPattern) else f"{advice.target}()"
        lines.extend(INDENT + f"@prop({name})" for name in sorted(advice.annotations))
        lines.extend(_block_lines(f"{advice.kind}(): {target}", advice.body, 1))
    lines.append("}")
    return lines


def _block_lines(head, body, depth):
    pad = INDENT * depth
    if not body:
        return [pad + head + " {}"]
    lines = [pad + head + " {"]
    for stmt in body:
        lines.extend(_stmt_lines(stmt, depth + 1))
    lines.append(pad + "}")
    return lines


def _cond_text(cond):
    return format_call(cond) if isinstance(cond, Call) else cond


def _stmt_lines(stmt, depth):
    pad = INDENT * depth
    if isinstance(stmt, Call):
        return [pad + format_call(stmt) + ";"]
    if isinstance(stmt, If):
        lines = _block_lines(f"if ({_cond_text(stmt.cond)})", stmt.then_body, depth)
        if stmt.else_body is not None:
            else_lines = _block_lines("else", stmt.else_body, depth)
            lines[-1] = lines[-1] + " " + else_lines[0].strip()
            lines.extend(else_lines[1:])
        return lines
    if isinstance(stmt, While):
        return _block_lines(f"while ({_cond_text(stmt.cond)})", stmt.body, depth)
    if isinstance(stmt, Throw):
        return [pad + f"throw {stmt.exception};"]
    if isinstance(stmt, Return):
        return [pad + "return;"]
    if isinstance(stmt, Atomic):
        return [pad + f"atomic {stmt.label};"]
    return [pad + "proceed();"]


# ------- Traversal ---------

class AstVisitor:
    """
    Generic AST walk. Subclasses define `visit_<node_type>` methods (e.g. `visit_aspect_decl`);
    nodes without a handler are traversed silently.
    """

    def visit(self, node):
        handler = getattr(self, "visit_" + inflection.underscore(type(node).__name__), None)
        if handler is not None:
            handler(node)
        self.generic_visit(node)

    def generic_visit(self, node):
        for child in _children(node):
            self.visit(child)


def _children(node):
    if isinstance(node, Program):
        return node.declarations
    if isinstance(node, TypeDecl):
        return node.methods
    if isinstance(node, MethodDecl):
        return node.body
    if isinstance(node, AspectDecl):
        return node.pointcuts + node.advice
    if isinstance(node, AdviceDecl):
        return node.body
    if isinstance(node, If):
        return node.then_body + (node.else_body or ())
    if isinstance(node, While):
        return node.body
    return ()


class _AspectInfoVisitor(AstVisitor):
    def __init__(self):
        self.records = []

    def visit_aspect_decl(self, node):
        self.records.append([node.name, 0, {kind: 0 for kind in ADVICE_KINDS}])

    def visit_pointcut_decl(self, node):
        self.records[-1][1] += 1

    def visit_advice_decl(self, node):
        self.records[-1][2][node.kind] += 1


def collect_aspect_info(program_):
    """
    One AspectInfo per aspect, in declaration order, with its pointcut count and advice counts by kind.
    """
    visitor = _AspectInfoVisitor()
    visitor.visit(program_)
    return [
        AspectInfo(name, pointcuts, tuple((kind, counts[kind]) for kind in ADVICE_KINDS))
        for name, pointcuts, counts in visitor.records
    ]


def aspect_info_frame(infos):
    return pd.DataFrame(
        [{"aspect": info.name, "pointcuts": info.pointcut_count, **dict(info.advice_counts)} for info in infos],
        columns=["aspect", "pointcuts", *ADVICE_KINDS],
    )


# if __name__ == "__main__":
def run_parse_process(sources=None, out_dir=None):
    # Parse the corpus and output the aspect summary.
    # ************************************************************************************
    program_ = load_program(sources or corpus_sources())
    info_df = aspect_info_frame(collect_aspect_info(program_))
    out_dir = Path(out_dir or get_data_dir(DevConfig.DIR_NAME_INTERIM))
    info_df.to_csv(out_dir / DevConfig.INTERIM_CSV_ASPECT_INFO, index=False)
    LOGGER.info("%d aspects, %d classes", len(program_.aspects), len(program_.types))
    return program_
