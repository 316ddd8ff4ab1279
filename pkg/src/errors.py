"""
Errors raised by the toolchain stages. Every error renders as a one-line diagnostic.
"""


class OsmError(Exception):
    """Base class; `str(err)` is the one-line diagnostic shown on standard error."""


class LexError(OsmError):
    def __init__(self, line, col, char, source_name=None):
        self.line = line
        self.col = col
        self.char = char
        self.source_name = source_name
        super().__init__(_located(source_name, line, col, f"unexpected character {char!r}"))


class ParseError(OsmError):
    def __init__(self, line, col, expected=(), message=None, source_name=None):
        self.line = line
        self.col = col
        self.expected = frozenset(expected)
        self.source_name = source_name
        if message is None:
            message = "expected " + " or ".join(sorted(self.expected)) if self.expected else "syntax error"
        self.message = message
        super().__init__(_located(source_name, line, col, message))


class UnknownPointcut(ParseError):
    pass


class DuplicateName(ParseError):
    pass


class PrecedenceError(OsmError):
    pass


class AliasError(OsmError):
    pass


class InlineRecursionError(OsmError):
    def __init__(self, cycle):
        self.cycle = tuple(cycle)
        super().__init__("recursive inlining: " + " -> ".join(self.cycle))


class DepthError(OsmError):
    def __init__(self, limit, stack=()):
        self.limit = limit
        self.stack = tuple(stack)
        super().__init__(f"inline depth limit {limit} exceeded at " + " -> ".join(self.stack))


class UnknownMethod(OsmError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"unknown method {name}")


class SchemaError(OsmError):
    pass


class TotalityError(OsmError):
    def __init__(self, state):
        self.state = state
        super().__init__(f"state {state} has no successor")


class EmptyInitialError(OsmError):
    def __init__(self):
        super().__init__("model has no initial state")


class FormulaParseError(OsmError):
    def __init__(self, position, expected, text=""):
        self.position = position
        self.expected = frozenset(expected)
        self.text = text
        super().__init__(
            f"formula column {position + 1}: expected " + " or ".join(sorted(self.expected)) + (f" in {text!r}" if text else "")
        )


class UnknownAtom(OsmError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"unknown atom {name}")


class EmptyTrace(OsmError):
    def __init__(self, index=None):
        self.index = index
        super().__init__("empty trace" if index is None else f"trace {index} is empty")


class PropertyFileError(OsmError):
    def __init__(self, line, message, source_name=None):
        self.line = line
        super().__init__(_located(source_name, line, None, message))


def _located(source_name, line, col, message):
    where = [str(part) for part in (source_name, line, col) if part is not None]
    return ":".join(where) + ": " + message if where else message
