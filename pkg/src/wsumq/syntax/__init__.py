"""Abstract syntax, parser, printer and builtin catalog."""
from .ast import (  # noqa: F401
    AND, EXISTS, FORALL, IMPLIES, OR, ADD, SUB, MUL, DIV,
    Arith, Avg, BoolOp, Const, FunApp, Ifp, Ite, Leq, Not, Program, Quant, RelAtom,
    Rule, Stratum, Sum, Uniq, VarEq, free_vars, symbol_partition, ext_symbols,
    desugar, make_stratum, make_program,
)
from .builtins import BUILTIN_NAMES, builtin_program, builtin_text, eval_depth_bounded  # noqa: F401
from .parser import parse_expression, parse_formula, parse_program, parse_term  # noqa: F401
from .printer import pretty_print  # noqa: F401
