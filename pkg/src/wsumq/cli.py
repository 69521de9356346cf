"""Command-line entry point: ``wsumq <command> ...``.

Programs and expressions can be read from ``.wsq`` files or named directly as
``builtin:NAME`` (``builtin:eval_depth_bounded:3`` for the depth family).
Machine output goes to stdout; diagnostics are single lines on stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass

from . import __version__
from .analysis import check_scalar
from .core import BOT, REL, WeightedStructure, format_weight, parse_weight
from .errors import ParseError, ValidationError, WsumqError
from .evaluator import FUNCTIONAL, MODES, eval_expression, run_program
from .fnn import (Fnn, canonical_order, check_p_bounded, forward, gen_3sat_network,
                  gen_split_network, parse_dimacs, reduce, split_edges, to_weighted_structure)
from .fnn import parallel_paths_network
from .syntax import ast as A
from .syntax.builtins import builtin_program
from .syntax.parser import parse_expression, parse_program
from .syntax.printer import format_declarations, pretty_print
from .transform import DEFAULT_ARITY_CAP, KINDS, transform_program

log = logging.getLogger("wsumq")

FORMATS = ("json", "text")


@dataclass(frozen=True)
class RunConfig:
    mode: str = FUNCTIONAL
    trace: bool = False
    arity_cap: int = DEFAULT_ARITY_CAP
    output_format: str = "json"

    def __post_init__(self):
        if self.arity_cap < 1:
            raise ValidationError("--arity-cap must be at least 1")


class _UsageError(Exception):
    pass


# -- input helpers ------------------------------------------------------------

def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _builtin(source: str):
    parts = source.split(":")[1:]
    if not parts or not parts[0]:
        raise ValidationError("builtin: needs a name, e.g. builtin:floyd_warshall")
    params = {"depth": parts[1]} if len(parts) > 1 else None
    return builtin_program(parts[0], params)


def load_program(source: str, vocab=None) -> A.Program:
    if source.startswith("builtin:"):
        p = _builtin(source)
        if not isinstance(p, A.Program):
            raise ValidationError(f"{source} is a term, not a program")
        return p
    return parse_program(_read(source), vocab)


def load_expression(source: str, vocab=None):
    if source.startswith("builtin:"):
        e = _builtin(source)
        if isinstance(e, A.Program):
            raise ValidationError(f"{source} is a program, not an expression")
        return e
    return parse_expression(_read(source), vocab)


def load_any(source: str):
    """Program if the text parses as one, otherwise a standalone expression."""
    if source.startswith("builtin:"):
        return _builtin(source)
    text = _read(source)
    try:
        return parse_program(text)
    except ParseError as first:
        try:
            return parse_expression(text)
        except ParseError:
            raise first from None


def load_structure(path: str) -> WeightedStructure:
    try:
        data = json.loads(_read(path))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    return WeightedStructure.from_json(data)


def load_net(path: str) -> Fnn:
    try:
        return Fnn.loads(_read(path))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None


def parse_vector(text: str) -> list:
    items = [t.strip() for t in text.split(",")] if text.strip() else []
    out = []
    for t in items:
        w = parse_weight(t)
        if w is BOT:
            raise ValidationError("vector entries must be rational numbers")
        out.append(w)
    return out


def parse_bindings(text: str | None) -> dict:
    out = {}
    for item in (text or "").split(","):
        item = item.strip()
        if not item:
            continue
        if "=" not in item:
            raise ValidationError(f"binding {item!r} is not of the form var=element")
        var, elem = (s.strip() for s in item.split("=", 1))
        out[var] = elem
    return out


# -- rendering ----------------------------------------------------------------

def _emit(text: str, path: str | None = None):
    if path and path != "-":
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _answer_json(s: WeightedStructure, name: str, view):
    sym = s.vocabulary[name]
    if sym.kind == REL:
        return view if sym.arity == 0 else [list(t) for t in view]
    order = {e: i for i, e in enumerate(s.universe)}
    return [{"tuple": list(t), "value": format_weight(v)}
            for t, v in sorted(view.items(), key=lambda kv: [order[e] for e in kv[0]])]


def _answer_text(s: WeightedStructure, name: str, view) -> str:
    sym = s.vocabulary[name]
    if sym.kind == REL:
        if sym.arity == 0:
            return "true\n" if view else "false\n"
        return "".join(f"{name}({', '.join(t)})\n" for t in view)
    order = {e: i for i, e in enumerate(s.universe)}
    rows = sorted(view.items(), key=lambda kv: [order[e] for e in kv[0]])
    return "".join(f"{name}({', '.join(t)}) = {format_weight(v)}\n" for t, v in rows)


def _expression_source(e, vocab) -> str:
    """Standalone expression preceded by the declarations it needs."""
    ext, _ = A.symbol_partition(e)
    decls = format_declarations({n: vocab[n] for n in vocab if n in ext})
    return "\n".join(decls + [pretty_print(e)]) + "\n"


# -- commands -------------------------------------------------------------------

def cmd_parse(args, cfg):
    e = load_any(args.file)
    if isinstance(e, A.Program):
        text = pretty_print(e)
    else:
        text = pretty_print(e) + "\n"
    if cfg.output_format == "json":
        kind = "program" if isinstance(e, A.Program) else (
            "formula" if isinstance(e, A.Formula) else "term")
        _emit(_dump({"kind": kind, "text": text}))
    else:
        _emit(text)
    return 0


def cmd_check(args, cfg):
    e = load_any(args.file)
    if not args.scalar:
        _emit(_dump({"valid": True}) if cfg.output_format == "json" else "ok\n")
        return 0
    report = check_scalar(e)
    if cfg.output_format == "json":
        _emit(_dump({"scalar": report.is_scalar,
                     "violations": [{"path": p, "reason": r} for p, r in report.violations]}))
    elif report.is_scalar:
        _emit("scalar\n")
    else:
        _emit("".join(line + "\n" for line in report.lines()))
    return 0 if report.is_scalar else 1


def cmd_eval(args, cfg):
    s = load_structure(args.structure)
    e = load_expression(args.expr, s.vocabulary)
    res = eval_expression(e, s, parse_bindings(args.bind))
    if res.kind == "boolean":
        value = res.value
        text = "true" if value else "false"
    else:
        value = text = format_weight(res.value)
    if cfg.output_format == "json":
        _emit(_dump({"kind": res.kind, "value": value}))
    else:
        _emit(text + "\n")
    return 0


def cmd_run(args, cfg):
    s = load_structure(args.structure)
    p = load_program(args.program, s.vocabulary)
    out, view, traces = run_program(p, s, cfg.mode, args.answer)
    name = args.answer or p.answer
    trace_lines = []
    if cfg.trace:
        for i, t in enumerate(traces):
            trace_lines += [f"stratum {i}: {line}" for line in t.lines()]
    if cfg.output_format == "json":
        payload = _answer_json(out, name, view)
        if cfg.trace:
            payload = {"answer": name, "value": payload, "trace": trace_lines}
        _emit(_dump(payload))
    else:
        _emit("".join(line + "\n" for line in trace_lines) + _answer_text(out, name, view))
    return 0


def cmd_transform(args, cfg):
    p = load_program(args.program)
    res = transform_program(p, args.kind, args.answer, cfg.arity_cap)
    if isinstance(res.output, A.Program):
        text = pretty_print(res.output)
    else:
        text = _expression_source(res.output, p.input_vocab)
    if res.domain_size_precondition != "none":
        log.warning("the result is only equivalent on universes satisfying %s",
                    res.domain_size_precondition)
    _emit(text, args.output)
    return 0


def _net_text(net: Fnn) -> str:
    return net.dumps() + "\n"


def cmd_fnn_forward(args, cfg):
    net = load_net(args.net)
    y = forward(net, parse_vector(args.input))
    if cfg.output_format == "json":
        _emit(_dump([format_weight(v) for v in y]))
    else:
        _emit(" ".join(format_weight(v) for v in y) + "\n")
    return 0


def cmd_fnn_reduce(args, cfg):
    red, mapping = reduce(load_net(args.net))
    _emit(_net_text(red), args.output)
    if args.classes:
        _emit(_dump(mapping), args.classes)
    return 0


def cmd_fnn_encode(args, cfg):
    net = load_net(args.net)
    val = parse_vector(args.val) if args.val is not None else None
    _emit(to_weighted_structure(net, val).dumps() + "\n", args.output)
    return 0


def cmd_fnn_order(args, cfg):
    classes = canonical_order(load_net(args.net))
    if cfg.output_format == "json":
        _emit(_dump(classes))
    else:
        _emit("".join(" ".join(c) + "\n" for c in classes))
    return 0


def cmd_fnn_bounded(args, cfg):
    coeffs = [int(c) for c in args.poly.split(",") if c.strip()]
    if not coeffs:
        raise ValidationError("--poly needs at least one coefficient")
    ok, witness = check_p_bounded(load_net(args.net), coeffs, args.reduced)
    if cfg.output_format == "json":
        w = None
        if witness:
            kind, where, value = witness
            w = {"kind": kind, "at": list(where) if kind == "edge" else where,
                 "value": format_weight(value)}
        _emit(_dump({"bounded": ok, "witness": w}))
    elif ok:
        _emit("bounded\n")
    else:
        kind, where, value = witness
        at = "->".join(where) if kind == "edge" else where
        _emit(f"unbounded: {kind} {at} = {format_weight(value)}\n")
    return 0 if ok else 1


def cmd_fnn_split(args, cfg):
    _emit(_net_text(split_edges(load_net(args.net))), args.output)
    return 0


def cmd_fnn_gadget_3sat(args, cfg):
    phi = parse_dimacs(_read(args.formula))
    _emit(_net_text(gen_3sat_network(phi)), args.output)
    return 0


def cmd_fnn_gadget_split(args, cfg):
    _emit(_net_text(gen_split_network(args.bits)), args.output)
    return 0


def cmd_fnn_parallel(args, cfg):
    if args.a < 1:
        raise ValidationError("--a must be at least 1")
    _emit(_net_text(parallel_paths_network(args.a, args.reduced)), args.output)
    return 0


# -- argument parsing -------------------------------------------------------------

def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


class _Parser(argparse.ArgumentParser):
    """Parser with a fixed help width and usage errors raised instead of exiting."""

    def __init__(self, *args, **kwargs):
        kwargs.setdefault("formatter_class", lambda prog: argparse.HelpFormatter(prog, width=88))
        super().__init__(*args, **kwargs)

    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _global_options(parser, suppress):
    default = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    g = parser.add_argument_group("global options")
    g.add_argument("--mode", choices=MODES, default=default(FUNCTIONAL),
                   help="fixpoint semantics (default: functional)")
    g.add_argument("--trace", action="store_true", default=default(False),
                   help="report per-round deltas")
    g.add_argument("--arity-cap", type=_positive_int, default=default(DEFAULT_ARITY_CAP),
                   help="largest arity loose2func may introduce (default: 12)")
    g.add_argument("--format", choices=FORMATS, default=default(None),
                   help="output format (default: text for check and order, json otherwise)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wsumq",
                     description="Exact evaluation and analysis of weighted queries "
                                 "with sums and fixpoints, and ReLU network tooling.")
    parser.add_argument("--version", action="version", version=f"wsumq {__version__}")
    _global_options(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    def add(name, func, help, parent=sub):
        p = parent.add_parser(name, help=help, description=help)
        _global_options(p, suppress=True)
        p.set_defaults(func=func)
        return p

    p = add("parse", cmd_parse, "parse a program or expression and print it back")
    p.add_argument("file", help=".wsq file, '-' for stdin, or builtin:NAME")

    p = add("check", cmd_check, "validate a program or expression")
    p.add_argument("file", help=".wsq file, '-' for stdin, or builtin:NAME")
    p.add_argument("--scalar", action="store_true",
                   help="also check membership in the scalar fragment (exit 1 if not)")

    p = add("eval", cmd_eval, "evaluate a formula or term on a structure")
    p.add_argument("expr", help="expression .wsq file or builtin:NAME")
    p.add_argument("structure", help="structure JSON file")
    p.add_argument("--bind", metavar="VAR=ELEM,...", help="assignment of free variables")

    p = add("run", cmd_run, "run a program on a structure and print its answer")
    p.add_argument("program", help="program .wsq file or builtin:NAME")
    p.add_argument("structure", help="structure JSON file")
    p.add_argument("--answer", metavar="SYMBOL", help="symbol to report (default: the program's)")

    p = add("transform", cmd_transform, "rewrite a program between semantics or into one ifp term")
    p.add_argument("program", help="program .wsq file or builtin:NAME")
    p.add_argument("--kind", required=True, choices=KINDS, help="transformation to apply")
    p.add_argument("--answer", metavar="SYMBOL", help="symbol whose value must be preserved")
    p.add_argument("-o", "--output", help="output file (default: stdout)")

    fnn = add("fnn", None, "feedforward ReLU network tools")
    fsub = fnn.add_subparsers(dest="fnn_command", metavar="FNN_COMMAND", parser_class=_Parser)

    p = add("forward", cmd_fnn_forward, "exact forward pass", fsub)
    p.add_argument("net", help="network JSON file")
    p.add_argument("--input", required=True, metavar="X1,X2,...", help="input vector")

    p = add("reduce", cmd_fnn_reduce, "quotient by node equivalence", fsub)
    p.add_argument("net", help="network JSON file")
    p.add_argument("-o", "--output", help="output file (default: stdout)")
    p.add_argument("--classes", metavar="FILE", help="also write the node -> class map here")

    p = add("encode", cmd_fnn_encode, "encode as a weighted structure", fsub)
    p.add_argument("net", help="network JSON file")
    p.add_argument("--val", metavar="X1,X2,...", help="input values to include as val")
    p.add_argument("-o", "--output", help="output file (default: stdout)")

    p = add("order", cmd_fnn_order, "node classes in canonical order", fsub)
    p.add_argument("net", help="network JSON file")

    p = add("bounded", cmd_fnn_bounded, "check weights against a polynomial bound", fsub)
    p.add_argument("net", help="network JSON file")
    p.add_argument("--poly", required=True, metavar="C_d,...,C_0",
                   help="natural coefficients, highest degree first")
    p.add_argument("--reduced", action="store_true", help="check the reduced network")

    p = add("split", cmd_fnn_split, "replace natural-weight edges by unit paths", fsub)
    p.add_argument("net", help="network JSON file")
    p.add_argument("-o", "--output", help="output file (default: stdout)")

    p = add("gadget-3sat", cmd_fnn_gadget_3sat, "network that is nonzero iff a 3-CNF is satisfiable",
            fsub)
    p.add_argument("formula", help="DIMACS CNF file")
    p.add_argument("-o", "--output", help="output file (default: stdout)")

    p = add("gadget-split", cmd_fnn_gadget_split, "bit-extraction network", fsub)
    p.add_argument("--bits", required=True, type=_positive_int, help="number of bits")
    p.add_argument("-o", "--output", help="output file (default: stdout)")

    p = add("parallel-paths", cmd_fnn_parallel, "one-input network with a parallel unit paths", fsub)
    p.add_argument("--a", required=True, type=int, help="number of parallel paths")
    p.add_argument("--reduced", action="store_true", help="emit the reduced form instead")
    p.add_argument("-o", "--output", help="output file (default: stdout)")
    return parser


TEXT_BY_DEFAULT = {"check", "order"}


def _config(args) -> RunConfig:
    fmt = args.format
    if fmt is None:
        name = args.fnn_command if args.command == "fnn" else args.command
        fmt = "text" if name in TEXT_BY_DEFAULT else "json"
    return RunConfig(mode=args.mode, trace=args.trace, arity_cap=args.arity_cap,
                     output_format=fmt)


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="wsumq: warning: %(message)s",
                        stream=sys.stderr)
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"{exc} (see 'wsumq --help')", file=sys.stderr)
        return 2
    func = getattr(args, "func", None)
    if func is None:
        target = parser
        if args.command == "fnn":
            target = parser._subparsers._group_actions[0].choices["fnn"]
        sys.stderr.write(target.format_help())
        return 2
    try:
        return func(args, _config(args))
    except OSError as exc:
        print(f"wsumq: error: {exc.filename}: {exc.strerror}", file=sys.stderr)
        return 1
    except (WsumqError, ValueError) as exc:
        msg = " ".join(str(exc).split()) or type(exc).__name__
        print(f"wsumq: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
