"""
Command line of the toolchain: `osm <subcommand> ...` (run as `python RunModule.py <subcommand> ...`).

Exit codes: 0 every property holds / every trace conforms, 1 at least one violation or
non-conformance, 2 usage, input or internal error.
"""
import argparse
import logging
import sys

from Config import ModelConfig
from src.errors import OsmError
from src.s1_aop_frontend import aspect_info_frame, collect_aspect_info, load_program
from src.s2_weaver import binding_frame, weave
from src.s3_flowgraph import build_cfg, to_dot
from src.s4_kripke_model import emit, from_cfg
from src.s6_pipeline import (
    check_trace_set, emit_concern_graph, parse_alias_args, read_property_spec, read_trace, run_pipeline,
)
from src.utils import configure_logging, corpus_props, corpus_sources, expand_sources, write_text

LOGGER = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_VIOLATION = 1
EXIT_ERROR = 2


class _UsageError(Exception):
    pass


class _ArgumentParser(argparse.ArgumentParser):
    # Raise instead of exiting so cli_main owns the exit code.
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


base_parser = _ArgumentParser(add_help=False)
base_group = base_parser.add_argument_group("global arguments")
base_group.add_argument("-v", "--verbose", action="store_true", help="Log progress to standard error")
base_group.add_argument("--out", metavar="<file>", help="Write the result to <file> instead of standard output")

model_parser = _ArgumentParser(add_help=False)
model_group = model_parser.add_argument_group("model arguments")
model_group.add_argument("--src", metavar="<path>", action="append",
                         help="Source file or directory (repeatable); defaults to the shipped EHR corpus")
model_group.add_argument("--inline-depth", metavar="<n>", type=_positive_int, default=ModelConfig.INLINE_DEPTH_LIMIT,
                         help="Maximum nesting of inlined callees")


def create_parser():
    parser = _ArgumentParser(prog="osm", description="Aspect-oriented model checking toolchain")
    commands = parser.add_subparsers(dest="command", metavar="<command>")
    commands.required = True

    sub = commands.add_parser("parse", parents=[base_parser], help="Syntax check and per-aspect info")
    sub.add_argument("sources", nargs="*", metavar="<path>")

    sub = commands.add_parser("weave", parents=[base_parser], help="List advice bindings")
    sub.add_argument("sources", nargs="*", metavar="<path>")

    sub = commands.add_parser("cfg", parents=[base_parser, model_parser], help="Control-flow graph of a method (DOT)")
    sub.add_argument("method", metavar="<Type.method>")

    sub = commands.add_parser("kripke", parents=[base_parser, model_parser], help="Kripke model of a method")
    sub.add_argument("method", metavar="<Type.method>")
    sub.add_argument("--format", choices=("json", "dot"), default="json")

    sub = commands.add_parser("check", parents=[base_parser], help="Check a property file (JSON report)")
    sub.add_argument("sources", nargs="*", metavar="<path>")
    sub.add_argument("--props", metavar="<file>")
    sub.add_argument("--alias", metavar="<Aspect=Concern>", action="append", default=[])
    sub.add_argument("--strict-atoms", action="store_true", default=ModelConfig.STRICT_ATOMS,
                     help="Unknown atoms in CTL formulas are errors")
    sub.add_argument("--inline-depth", metavar="<n>", type=_positive_int, default=ModelConfig.INLINE_DEPTH_LIMIT)

    sub = commands.add_parser("trace", parents=[base_parser, model_parser], help="Check traces against a method model")
    sub.add_argument("method", metavar="<Type.method>")
    sub.add_argument("traces", nargs="+", metavar="<tracefile>")

    sub = commands.add_parser("graph", parents=[base_parser], help="Concern-dependency graph (DOT)")
    sub.add_argument("--props", metavar="<file>")
    return parser


def _output(args, text):
    if args.out:
        write_text(args.out, text)
    else:
        sys.stdout.write(text)


def _model(args):
    woven = weave(load_program(args.src or corpus_sources()))
    return from_cfg(build_cfg(woven, args.method, args.inline_depth))


def cmd_parse(args):
    program_ = load_program(args.sources or corpus_sources())
    _output(args, aspect_info_frame(collect_aspect_info(program_)).to_csv(index=False))
    return EXIT_PASS


def cmd_weave(args):
    _output(args, binding_frame(weave(load_program(args.sources or corpus_sources()))).to_csv(index=False))
    return EXIT_PASS


def cmd_cfg(args):
    woven = weave(load_program(args.src or corpus_sources()))
    _output(args, to_dot(build_cfg(woven, args.method, args.inline_depth)))
    return EXIT_PASS


def cmd_kripke(args):
    _output(args, emit(_model(args), args.format, args.method))
    return EXIT_PASS


def cmd_check(args):
    if args.props is None and args.sources:
        raise _UsageError("osm check: --props is required when sources are given")
    spec = read_property_spec(args.props or corpus_props())
    report = run_pipeline(
        args.sources or corpus_sources(), spec, parse_alias_args(args.alias), args.strict_atoms, args.inline_depth,
    )
    _output(args, report.to_json())
    return EXIT_PASS if report.passed else EXIT_VIOLATION


def cmd_trace(args):
    model = _model(args)
    files = expand_sources(args.traces, ModelConfig.TRACE_SUFFIX)
    report = check_trace_set(model, [read_trace(p) for p in files], [str(p) for p in files])
    _output(args, report.to_json())
    return EXIT_PASS if report.status == "pass" else EXIT_VIOLATION


def cmd_graph(args):
    spec = read_property_spec(args.props or corpus_props())
    _output(args, emit_concern_graph(spec.config_formulas()))
    return EXIT_PASS


COMMANDS = {
    "parse": cmd_parse,
    "weave": cmd_weave,
    "cfg": cmd_cfg,
    "kripke": cmd_kripke,
    "check": cmd_check,
    "trace": cmd_trace,
    "graph": cmd_graph,
}


def cli_main(argv=None):
    """
    Run one subcommand.

    Parameters
    ----------
    argv: list of str, optional
        Arguments without the program name; defaults to sys.argv[1:].
    Returns
    -------
    int
        Exit code.
    """
    try:
        args = create_parser().parse_args(argv)
    except _UsageError as err:
        sys.stderr.write(f"{err}\n")
        return EXIT_ERROR
    configure_logging(args.verbose)
    try:
        return COMMANDS[args.command](args)
    except _UsageError as err:
        sys.stderr.write(f"{err}\n")
    except (OsmError, OSError) as err:
        sys.stderr.write(f"osm: error: {err}\n")
    except Exception as err:  # noqa: BLE001
        LOGGER.debug("internal error", exc_info=True)
        sys.stderr.write(f"osm: internal error: {type(err).__name__}: {err}\n")
    return EXIT_ERROR
