"""Pretty printer producing text that parses back to the same AST."""
from __future__ import annotations

from ..core import BOT, format_weight
from . import ast as A

# formula precedence levels
_IMPL, _OR, _AND, _UNARY, _ATOM = 1, 2, 3, 4, 5
_BOOL_PREC = {A.IMPLIES: _IMPL, A.OR: _OR, A.AND: _AND}
_BOOL_SYM = {A.IMPLIES: "->", A.OR: "|", A.AND: "&"}

# term precedence levels; open-ended terms (if/sum/ifp) swallow what follows
_ADD, _MUL, _PRIMARY, _OPEN = 1, 2, 3, 0
_ARITH_PREC = {A.ADD: _ADD, A.SUB: _ADD, A.MUL: _MUL, A.DIV: _MUL}
_ARITH_SYM = {A.ADD: "+", A.SUB: "-", A.MUL: "*", A.DIV: "/"}


def _args(args) -> str:
    return "(" + ", ".join(args) + ")"


def _app(name, args) -> str:
    return name + _args(args) if args else name


def _fprec(f) -> int:
    if isinstance(f, A.BoolOp):
        return _BOOL_PREC[f.op]
    if isinstance(f, (A.Not, A.Quant)):
        return _UNARY
    if isinstance(f, A.Leq) and f not in (A.TRUE, A.FALSE):
        return _UNARY  # a bare comparison cannot be followed by & inside a guard safely
    return _ATOM


def _tprec(t) -> int:
    if isinstance(t, A.Arith):
        return _ARITH_PREC[t.op]
    if isinstance(t, (A.Ite, A.Sum, A.Avg, A.Uniq, A.Ifp)):
        return _OPEN
    if isinstance(t, A.Const) and t.value is not BOT and t.value < 0:
        return _PRIMARY
    return _PRIMARY


def format_formula(f: A.Formula, level: int = 0) -> str:
    s = _formula(f)
    return f"({s})" if _fprec(f) < level else s


def _formula(f) -> str:
    if f == A.TRUE:
        return "true"
    if f == A.FALSE:
        return "false"
    if isinstance(f, A.VarEq):
        return f"{f.left} = {f.right}"
    if isinstance(f, A.RelAtom):
        return _app(f.name, f.args)
    if isinstance(f, A.Leq):
        return f"{format_term(f.left, _ADD)} <= {format_term(f.right, _ADD)}"
    if isinstance(f, A.Not):
        if isinstance(f.body, A.VarEq):
            return f"{f.body.left} != {f.body.right}"
        return "!" + format_formula(f.body, _ATOM if isinstance(f.body, A.Leq) else _UNARY)
    if isinstance(f, A.Quant):
        names = [f.var]
        body = f.body
        while isinstance(body, A.Quant) and body.kind == f.kind:
            names.append(body.var)
            body = body.body
        inner = format_formula(body, _ATOM if isinstance(body, A.Leq) else _UNARY)
        return f"{f.kind} {', '.join(names)} {inner}"
    if isinstance(f, A.BoolOp):
        p = _BOOL_PREC[f.op]
        if f.op == A.IMPLIES:
            left = format_formula(f.left, p + 1)
            right = format_formula(f.right, p)
        else:
            left = format_formula(f.left, p) if _same_op(f.left, f.op) else format_formula(f.left, p + 1)
            right = format_formula(f.right, p + 1)
        return f"{left} {_BOOL_SYM[f.op]} {right}"
    raise TypeError(f"not a formula: {f!r}")


def _same_op(f, op):
    return isinstance(f, A.BoolOp) and f.op == op


def format_term(t: A.Term, level: int = 0) -> str:
    s = _term(t)
    p = _tprec(t)
    if p < level or (p == _OPEN and level > 0):
        return f"({s})"
    return s


def _term(t) -> str:
    if isinstance(t, A.Const):
        return format_weight(t.value)
    if isinstance(t, A.FunApp):
        return _app(t.name, t.args)
    if isinstance(t, A.Arith):
        p = _ARITH_PREC[t.op]
        left = format_term(t.left, p)
        right = format_term(t.right, p + 1)
        return f"{left} {_ARITH_SYM[t.op]} {right}"
    if isinstance(t, A.Ite):
        return (f"if {format_formula(t.cond)} then {format_term(t.then)} "
                f"else {format_term(t.other)}")
    if isinstance(t, (A.Sum, A.Avg, A.Uniq)):
        kw = {A.Sum: "sum", A.Avg: "avg", A.Uniq: "uniq"}[type(t)]
        guard = format_formula(t.guard, _ATOM)
        body = format_term(t.body)
        # keep the guard from swallowing an argument list or a leading minus
        if not guard.endswith(")"):
            guard = f"({guard})"
        if body.startswith("-"):
            body = f"({body})"
        return f"{kw} {_args(t.vars)}: {guard} {body}"
    if isinstance(t, A.Ifp):
        return f"ifp {t.name}{_args(t.params)} <- {format_term(t.body)} at {_args(t.args)}"
    raise TypeError(f"not a term: {t!r}")


def pretty_print(e) -> str:
    """Render a formula, term, rule, stratum or program."""
    if isinstance(e, A.Formula):
        return format_formula(e)
    if isinstance(e, A.Term):
        return format_term(e)
    if isinstance(e, A.Rule):
        body = format_formula(e.body) if isinstance(e.body, A.Formula) else format_term(e.body)
        return f"{_app(e.head, e.vars)} <- {body};"
    if isinstance(e, A.Stratum):
        return "\n".join(pretty_print(r) for r in e.rules)
    if isinstance(e, A.Program):
        return format_program(e)
    raise TypeError(f"cannot print {type(e).__name__}")


def format_declarations(vocab) -> list:
    lines = []
    for name, sym in vocab.items():
        lines.append(f"{sym.kind} {name}/{sym.arity};")
    return lines


def format_program(p: A.Program) -> str:
    lines = format_declarations(p.input_vocab)
    for st in p.strata:
        lines.extend(format_declarations(st.intensional))
    lines.append("")
    for k, st in enumerate(p.strata):
        if k:
            lines.append("---")
        lines.extend(pretty_print(r) for r in st.rules)
    lines.append(f"answer {p.answer};")
    return "\n".join(lines) + "\n"
