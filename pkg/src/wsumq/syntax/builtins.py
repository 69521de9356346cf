"""Catalog of ready-made programs and terms.

Programs are kept as source text so they double as syntax examples; the
depth-bounded evaluation term is a family indexed by a depth and is built
directly as an AST.
"""
from __future__ import annotations

from functools import lru_cache

from ..core import Vocabulary
from ..errors import UnknownBuiltin, ValidationError
from . import ast as A
from .parser import parse_expression, parse_program

FNN_VOCAB = Vocabulary.of(rels={"E": 2, "In": 2, "Out": 2}, funs={"b": 1, "w": 2, "val": 1})

EVAL_RECURSIVE = """\
# Value computed at every node of a ReLU network.
rel E/2; rel In/2; rel Out/2;
fun b/1; fun w/2; fun val/1;
fun eval/1;

eval(u) <- if In(u, u) then val(u)
           else if Out(u, u) then b(u) + sum (v): E(v, u) w(v, u) * eval(v)
           else if b(u) + sum (v): E(v, u) w(v, u) * eval(v) = bot then bot
           else relu(b(u) + sum (v): E(v, u) w(v, u) * eval(v));
answer eval;
"""

# next(k): k is the least element not yet chosen
_NEXT = "(forall x (ord(x, {k}) <-> chosen(x)))"
# last(k): k is the largest chosen element
_LAST = "(chosen({k}) & forall x ((chosen(x) & x != {k}) -> ord(x, {k})))"

FLOYD_WARSHALL = f"""\
# All-pairs shortest distances; needs the loose semantics.
rel ord/2; fun W/2;
rel chosen/1; fun D/2;

chosen(k) <- {_NEXT.format(k="k")};
D(i, j) <- if !exists x chosen(x) then
             (if exists k ({_NEXT.format(k="k")} & W(i, j) > W(i, k) + W(k, j))
              then sum (k): {_NEXT.format(k="k")} W(i, k) + W(k, j)
              else W(i, j))
           else if exists k ({_NEXT.format(k="k")} & D(i, j) > D(i, k) + D(k, j))
              then sum (k): {_NEXT.format(k="k")} D(i, k) + D(k, j)
           else D(i, j);
answer D;
"""

FLOYD_WARSHALL_FUNCTIONAL = f"""\
# Floyd-Warshall under the functional semantics: D' is indexed by the pivot.
rel ord/2; fun W/2;
rel chosen/1; fun D'/3; fun D/2;

chosen(k') <- {_NEXT.format(k="k'")};
D'(k', i, j) <- if !{_NEXT.format(k="k'")} then bot
    else if !exists x chosen(x) then
        (if W(i, j) > W(i, k') + W(k', j) then W(i, k') + W(k', j) else W(i, j))
    else if exists k ({_LAST.format(k="k")} & D'(k, i, j) > D'(k, i, k') + D'(k, k', j))
        then sum (k): {_LAST.format(k="k")} D'(k, i, k') + D'(k, k', j)
    else sum (k): {_LAST.format(k="k")} D'(k, i, j);
---
D(i, j) <- sum (k): {_LAST.format(k="k")} D'(k, i, j);
answer D;
"""

ACYCLICITY = """\
# Is the part of the graph reachable from S free of cycles?
rel E/2; rel S/1;
rel Reach/2; rel Ans/0;

Reach(x, y) <- ((S(x) | exists z Reach(z, x)) & E(x, y)) | exists z (Reach(x, z) & E(z, y));
---
Ans <- !exists x Reach(x, x);
answer Ans;
"""

SQUARING = """\
rel E/2;
ifp F(x) <- if exists y E(y, x)
             then (sum (y): E(y, x) F(y)) * (sum (y): E(y, x) F(y))
             else 2
          at (x)
"""

PROGRAM_TEXTS = {
    "eval_recursive": EVAL_RECURSIVE,
    "floyd_warshall": FLOYD_WARSHALL,
    "floyd_warshall_functional": FLOYD_WARSHALL_FUNCTIONAL,
    "acyclicity": ACYCLICITY,
}
TERM_TEXTS = {"squaring": SQUARING}

BUILTIN_NAMES = tuple(sorted(list(PROGRAM_TEXTS) + list(TERM_TEXTS) + ["eval_depth_bounded"]))


@lru_cache(maxsize=None)
def _depth(level, x):
    """Nodes of depth at most ``level``."""
    if level == 0:
        return A.RelAtom("In", (x, x))
    y = f"d{level}"
    return A.Quant(A.FORALL, y, A.BoolOp(A.IMPLIES, A.RelAtom("E", (y, x)), _depth(level - 1, y)))


@lru_cache(maxsize=None)
def _eval_bounded(level, u):
    if level == 0:
        return A.Ite(A.RelAtom("In", (u, u)), A.FunApp("val", (u,)), A.BOTTOM)
    v = f"v{level}"
    pre = A.Arith(A.ADD, A.FunApp("b", (u,)),
                  A.Sum((v,), A.RelAtom("E", (v, u)),
                        A.Arith(A.MUL, A.FunApp("w", (v, u)), _eval_bounded(level - 1, v))))
    inner = A.Ite(A.RelAtom("Out", (u, u)), pre, A.relu(pre))
    return A.Ite(_depth(level - 1, u), _eval_bounded(level - 1, u),
                 A.Ite(_depth(level, u), inner, A.BOTTOM))


def eval_depth_bounded(depth: int) -> A.Term:
    """Term with free variable ``u`` giving the value at nodes of depth <= ``depth``."""
    if not isinstance(depth, int) or depth < 0:
        raise ValidationError("depth must be a natural number")
    return _eval_bounded(depth, "u")


def builtin_program(name: str, params=None):
    """Return the named builtin as a :class:`Program` or a term."""
    params = dict(params or {})
    if name in PROGRAM_TEXTS:
        return parse_program(PROGRAM_TEXTS[name])
    if name in TERM_TEXTS:
        return parse_expression(TERM_TEXTS[name])
    if name == "eval_depth_bounded":
        depth = params.get("depth", params.get("l", params.get("ell")))
        if depth is None:
            raise ValidationError("eval_depth_bounded needs a 'depth' parameter")
        return eval_depth_bounded(int(depth))
    raise UnknownBuiltin(f"unknown builtin {name!r}; known: {', '.join(BUILTIN_NAMES)}")


def builtin_text(name: str) -> str:
    if name in PROGRAM_TEXTS:
        return PROGRAM_TEXTS[name]
    if name in TERM_TEXTS:
        return TERM_TEXTS[name]
    raise UnknownBuiltin(f"no source text for builtin {name!r}")
