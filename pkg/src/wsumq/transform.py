"""Program transformations between the two fixpoint semantics and into ifp normal form.

* :func:`functional_to_loose` records the domain of every weight function in an
  extra relation, so the loose run stops exactly when the functional one does.
* :func:`loose_to_functional` simulates one loose round with two functional
  rounds, tagging weight values with timestamps built from the relation
  tuples added in that round. Universes with fewer than two elements cannot
  encode timestamps and are handled by an unrolled, non-recursive definition.
* :func:`simultaneous_induction` packs a whole stratum into one ifp term over a
  single weight function, using index tuples to tell the symbols apart.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction

from .core import FUN, REL, Symbol, Vocabulary
from .errors import ArityCapExceeded, PreconditionUnsatisfiable, ValidationError
from .syntax import ast as A

log = logging.getLogger(__name__)

NO_PRECONDITION = "none"
AT_LEAST_TWO = "at-least-2"
DEFAULT_ARITY_CAP = 12

_ONE = A.Const(Fraction(1))


@dataclass(frozen=True)
class TransformResult:
    output: object                 # Program, Formula or Term
    preserved_symbols: frozenset
    domain_size_precondition: str = NO_PRECONDITION

    @property
    def stratum(self):
        if isinstance(self.output, A.Program) and len(self.output.strata) == 1:
            return self.output.strata[0]
        raise ValueError("output is not a single-stratum program")


# -- helpers ----------------------------------------------------------------

class _Names:
    """Fresh symbol and variable names avoiding everything in a stratum."""

    def __init__(self, st: A.Stratum):
        self.symbols = set(st.vocabulary)
        vars = set()
        for r in st.rules:
            vars |= set(r.vars) | A.all_vars(r.body)
        self.vars = A.FreshNames(vars, base="_t")

    def symbol(self, base):
        name, i = base, 1
        while name in self.symbols:
            name = f"{base}{i}"
            i += 1
        self.symbols.add(name)
        return name


def _stratum_program(st: A.Stratum, answer: str) -> A.Program:
    return A.Program((st,), answer, st.extensional)


def _default_answer(st: A.Stratum, answer):
    if answer is None:
        return st.rules[-1].head
    if answer not in st.intensional:
        raise ValidationError(f"{answer} is not defined by the stratum")
    return answer


def _simplify_or(a, b):
    if a == A.FALSE:
        return b
    if b == A.FALSE:
        return a
    return A.BoolOp(A.OR, a, b)


# -- functional -> loose ------------------------------------------------------

def functional_to_loose(st: A.Stratum, answer: str | None = None) -> TransformResult:
    """Stratum whose loose run agrees with the functional run of ``st`` on its symbols."""
    answer = _default_answer(st, answer)
    names = _Names(st)
    rules = []
    extra_rules = []
    extra = {}
    for r in st.rules:
        if st.intensional.is_relation(r.head):
            rules.append(r)
            continue
        cur = A.FunApp(r.head, r.vars)
        body = A.Ite(A.term_eq(cur, A.BOTTOM), r.body, cur)
        rules.append(A.Rule(r.head, r.vars, body))
        dom = names.symbol(f"__def_{r.head}")
        extra[dom] = (REL, len(r.vars))
        extra_rules.append(A.Rule(dom, r.vars, A.term_neq(r.body, A.BOTTOM)))
    ints = st.intensional.union(Vocabulary(extra))
    out = A.make_stratum(rules + extra_rules, st.extensional, ints)
    return TransformResult(_stratum_program(out, answer), frozenset(st.intensional))


# -- loose -> functional --------------------------------------------------------

def _substitution(st: A.Stratum, rel_defs, fun_defs):
    """``{symbol: (params, body)}`` for use with :func:`replace_symbols`."""
    defs = {}
    for r in st.rules:
        src = rel_defs if st.intensional.is_relation(r.head) else fun_defs
        if r.head in src:
            defs[r.head] = (r.vars, src[r.head])
    return defs


def _small_domain(st: A.Stratum):
    """Non-recursive definitions valid on universes with at most one element.

    There each relation holds at most one tuple, so the loose run stops within
    as many rounds as there are intensional relations; the stages are unrolled
    and the right one is selected by testing where the relations stabilise.
    """
    rels = [r for r in st.rules if st.intensional.is_relation(r.head)]
    funs = [r for r in st.rules if st.intensional.is_function(r.head)]
    bound = len(rels)
    stage_rel = [{r.head: A.FALSE for r in rels}]
    stage_fun = [{r.head: A.BOTTOM for r in funs}]
    for k in range(1, bound + 2):
        defs = _substitution(st, stage_rel[-1], stage_fun[-1])
        stage_rel.append({r.head: _simplify_or(stage_rel[-1][r.head],
                                               A.replace_symbols(r.body, defs))
                          for r in rels})
        stage_fun.append({r.head: A.replace_symbols(r.body, defs) for r in funs})

    def stable(k):
        parts = []
        for r in rels:
            grew = A.conj(stage_rel[k + 1][r.head], A.Not(stage_rel[k][r.head]))
            parts.append(A.Not(A.exists(r.vars, grew)))
        return A.conj(*parts) if parts else A.TRUE

    stables = [stable(k) for k in range(bound + 1)]
    index_is = [A.conj(stables[k], *[A.Not(stables[i]) for i in range(k)])
                for k in range(bound + 1)]
    rel_out = {}
    for r in rels:
        cases = [A.conj(index_is[k], stage_rel[k][r.head]) for k in range(bound + 1)]
        rel_out[r.head] = A.disj(*cases)
    fun_out = {}
    for r in funs:
        t = A.BOTTOM
        for k in reversed(range(bound + 1)):
            t = A.Ite(index_is[k], stage_fun[k][r.head], t)
        fun_out[r.head] = t
    return rel_out, fun_out


def loose_to_functional(st: A.Stratum, answer: str | None = None,
                        arity_cap: int = DEFAULT_ARITY_CAP) -> TransformResult:
    """Stratum whose functional run agrees with the loose run of ``st`` on its symbols."""
    answer = _default_answer(st, answer)
    names = _Names(st)
    fresh = names.vars
    rel_rules = [r for r in st.rules if st.intensional.is_relation(r.head)]
    fun_rules = [r for r in st.rules if st.intensional.is_function(r.head)]

    width = sum(len(r.vars) + 2 for r in rel_rules)
    widest = max([width] + [width + len(r.vars) for r in fun_rules])
    if widest > arity_cap:
        log.warning("loose_to_functional: timestamped symbols need arity %d (cap %d)",
                    widest, arity_cap)
        raise ArityCapExceeded(
            f"timestamped symbols would have arity {widest}, above the cap of {arity_cap}")
    log.info("loose_to_functional: timestamp width %d, widest symbol arity %d", width, widest)

    r_all = names.symbol("__all")
    r_all_old = names.symbol("__all_old")
    r_all_oo = names.symbol("__all_oo")
    old = {r.head: names.symbol(f"__old_{r.head}") for r in rel_rules}
    stamped = {r.head: names.symbol(f"__ts_{r.head}") for r in fun_rules}

    def phi_all(ts):
        blocks, pos = [], 0
        for r in rel_rules:
            p, q = ts[pos], ts[pos + 1]
            ys = ts[pos + 2:pos + 2 + len(r.vars)]
            pos += len(r.vars) + 2
            blocks.append(A.BoolOp(A.OR, A.VarEq(p, q),
                                   A.conj(A.Not(A.VarEq(p, q)), A.RelAtom(r.head, ys))))
        return A.conj(*blocks) if blocks else A.TRUE

    def phi_new(ts):
        return A.conj(phi_all(ts), A.Not(A.RelAtom(r_all, ts)))

    def phi_oldnew(ts):
        return A.conj(A.RelAtom(r_all, ts), A.Not(A.RelAtom(r_all_old, ts)))

    def phi_oonew(ts):
        return A.conj(A.RelAtom(r_all_old, ts), A.Not(A.RelAtom(r_all_oo, ts)))

    ts = fresh(width)
    ps = fresh(width)

    def at_stamp(phi, head, args):
        """avg over the timestamps selected by ``phi`` of the stamped function."""
        return A.Avg(ps, phi(ps), A.FunApp(stamped[head], ps + tuple(args)))

    def stamp_defs(phi):
        return {r.head: (r.vars, at_stamp(phi, r.head, r.vars)) for r in fun_rules}

    some_stamp = A.exists(ts, A.RelAtom(r_all, ts))
    weight_round = A.exists(ts, phi_new(ts))
    relation_round = A.exists(ts, phi_oldnew(ts))
    stop = A.Not(A.exists(ts, A.BoolOp(A.OR, phi_new(ts), phi_oldnew(ts))))

    aux_rules = [A.Rule(r_all, ts, phi_all(ts)),
                 A.Rule(r_all_old, ts, A.RelAtom(r_all, ts)),
                 A.Rule(r_all_oo, ts, A.RelAtom(r_all_old, ts))]
    aux_vocab = {r_all: Symbol(REL, width), r_all_old: Symbol(REL, width),
                 r_all_oo: Symbol(REL, width)}
    for r in rel_rules:
        aux_rules.append(A.Rule(old[r.head], r.vars, A.RelAtom(r.head, r.vars)))
        aux_vocab[old[r.head]] = Symbol(REL, len(r.vars))
    for r in fun_rules:
        body = A.replace_symbols(A.rename_symbols(r.body, old), stamp_defs(phi_oonew))
        # the first round has no timestamp yet to read previous weights from
        guard = A.conj(phi_new(ts), some_stamp)
        aux_rules.append(A.Rule(stamped[r.head], ts + r.vars, A.Ite(guard, body, A.BOTTOM)))
        aux_vocab[stamped[r.head]] = Symbol(FUN, width + len(r.vars))

    big_rel = {}
    for r in rel_rules:
        body = A.replace_symbols(r.body, stamp_defs(phi_oldnew))
        # relations move only right after a weight round that saw new tuples
        big_rel[r.head] = A.conj(A.Not(weight_round), relation_round, body)
    big_fun = {r.head: A.Ite(stop, at_stamp(phi_oonew, r.head, r.vars), A.BOTTOM)
               for r in fun_rules}

    small_rel, small_fun = _small_domain(st)
    y1, y2 = fresh(2)
    big = A.exists((y1, y2), A.Not(A.VarEq(y1, y2)))
    rules = []
    for r in st.rules:
        if r.head in big_rel:
            body = A.BoolOp(A.OR, A.conj(big, big_rel[r.head]),
                            A.conj(A.Not(big), small_rel[r.head]))
        else:
            body = A.Ite(big, big_fun[r.head], small_fun[r.head])
        rules.append(A.Rule(r.head, r.vars, body))
    ints = st.intensional.union(Vocabulary(aux_vocab))
    out = A.make_stratum(rules + aux_rules, st.extensional, ints)
    return TransformResult(_stratum_program(out, answer), frozenset(st.intensional))


# -- simultaneous induction ---------------------------------------------------------

def _with_dummies(st: A.Stratum, names: _Names):
    rels = [r for r in st.rules if st.intensional.is_relation(r.head)]
    funs = [r for r in st.rules if st.intensional.is_function(r.head)]
    v = names.vars()
    if not rels:
        rels.append(A.Rule(names.symbol("__dummyR"), (v,), A.FALSE))
    if not funs:
        funs.append(A.Rule(names.symbol("__dummyF"), (v,), A.BOTTOM))
    # with only two indices the two selection formulas would coincide
    while len(rels) + len(funs) < 3:
        rels.append(A.Rule(names.symbol("__dummyR"), (v,), A.FALSE))
    return rels, funs


def simultaneous_induction(st: A.Stratum, answer: str | None = None) -> TransformResult:
    """A single ifp expression computing ``answer`` on universes of size at least 2."""
    if not st.intensional:
        raise PreconditionUnsatisfiable("stratum defines no symbols; nothing to answer")
    answer = _default_answer(st, answer)
    names = _Names(st)
    rels, funs = _with_dummies(st, names)
    k, l = len(rels), len(funs)
    n = k + l
    r = max(len(rule.vars) for rule in rels + funs)
    big = names.symbol("__F")
    fresh = names.vars
    xs = fresh(r)
    zs = fresh(n)

    def chi(i, z):
        """Index tuple ``z`` encodes ``i`` (1-based)."""
        ref = 0 if i != 1 else 1
        parts = [A.Not(A.VarEq(z[i - 1], z[ref]))]
        parts += [A.VarEq(z[j], z[ref]) for j in range(n) if j != i - 1 and j != ref]
        return A.conj(*parts)

    px = fresh(r)
    pz = fresh(n)
    defs = {}
    for p, rule in enumerate(rels, 1):
        ar = len(rule.vars)
        inner = A.conj(chi(p, pz), A.term_eq(A.FunApp(big, px + pz), _ONE))
        defs[rule.head] = (px[:ar], A.exists(px[ar:] + pz, inner))
    for q, rule in enumerate(funs, 1):
        ar = len(rule.vars)
        defs[rule.head] = (px[:ar], A.Avg(px[ar:] + pz, chi(k + q, pz),
                                          A.FunApp(big, px + pz)))

    def translated(rule):
        body = A.instantiate(rule.vars, rule.body, xs[:len(rule.vars)])
        return A.replace_symbols(body, defs)

    theta = A.BOTTOM
    for j in reversed(range(1, l + 1)):
        theta = A.Ite(chi(k + j, zs), translated(funs[j - 1]), theta)
    for i in reversed(range(1, k + 1)):
        theta = A.Ite(A.conj(chi(i, zs), translated(rels[i - 1])), _ONE, theta)
    zeta = A.Ifp(big, xs + zs, theta, xs + zs)

    target = st.rule(answer)
    ar = len(target.vars)
    if st.intensional.is_relation(answer):
        i = next(idx for idx, rule in enumerate(rels, 1) if rule.head == answer)
        # relation cells hold 1 or bot, so one comparison tests for 1 without
        # duplicating the ifp binder
        xi = A.exists(xs[ar:] + zs, A.conj(chi(i, zs), A.Leq(_ONE, zeta)))
    else:
        j = next(idx for idx, rule in enumerate(funs, 1) if rule.head == answer)
        xi = A.Avg(xs[ar:] + zs, chi(k + j, zs), zeta)
    xi = A.instantiate(xs[:ar], xi, target.vars)
    return TransformResult(xi, frozenset({answer}), AT_LEAST_TWO)


# -- program level ---------------------------------------------------------------

KINDS = ("func2loose", "loose2func", "simind")


def transform_program(p: A.Program, kind: str, answer: str | None = None,
                      arity_cap: int = DEFAULT_ARITY_CAP) -> TransformResult:
    """Apply a transformation stratum by stratum.

    ``simind`` needs a single-stratum program; composing strata first is not
    attempted.
    """
    answer = answer or p.answer
    if kind == "simind":
        if len(p.strata) != 1:
            raise ValidationError("simultaneous induction works on single-stratum programs")
        return simultaneous_induction(p.strata[0], answer)
    if kind not in KINDS:
        raise ValidationError(f"unknown transformation {kind!r}; use one of {', '.join(KINDS)}")
    strata = []
    ext = p.input_vocab
    preserved = set()
    taken = set(p.input_vocab) | set(p.intensional())
    for st in p.strata:
        st = A.Stratum(st.rules, ext, st.intensional)
        if kind == "func2loose":
            res = functional_to_loose(_reserve(st, taken))
        else:
            res = loose_to_functional(_reserve(st, taken), arity_cap=arity_cap)
        new = res.stratum
        new = A.Stratum(new.rules, ext, new.intensional)
        taken |= set(new.intensional)
        strata.append(new)
        preserved |= res.preserved_symbols
        ext = ext.union(new.intensional)
    if answer not in preserved:
        raise ValidationError(f"answer symbol {answer} is not defined by the program")
    return TransformResult(A.Program(tuple(strata), answer, p.input_vocab), frozenset(preserved))


def _reserve(st: A.Stratum, taken):
    """Stratum whose extensional vocabulary also lists names used elsewhere in the program.

    Only the fresh-name generator looks at this, so later strata never reuse an
    auxiliary symbol name introduced for an earlier one.
    """
    extra = {n: Symbol(REL, 0) for n in taken if n not in st.vocabulary}
    return A.Stratum(st.rules, st.extensional.union(Vocabulary(extra)), st.intensional)
