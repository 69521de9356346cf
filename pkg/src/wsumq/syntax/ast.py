"""Immutable AST for formulas, weight terms, rules, strata and programs.

Formulas and terms share one node hierarchy. Variables are plain strings and
range over universe elements; symbols are looked up by name.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Mapping, Union

from ..core import BOT, FUN, REL, Symbol, Vocabulary, Weight
from ..errors import ValidationError


class Node:
    __slots__ = ()

    def children(self) -> tuple:
        return ()


class Formula(Node):
    __slots__ = ()


class Term(Node):
    __slots__ = ()


# -- formulas ---------------------------------------------------------------

@dataclass(frozen=True)
class VarEq(Formula):
    left: str
    right: str


@dataclass(frozen=True)
class RelAtom(Formula):
    name: str
    args: tuple = ()


@dataclass(frozen=True)
class Leq(Formula):
    left: Term
    right: Term

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Not(Formula):
    body: Formula

    def children(self):
        return (self.body,)


AND, OR, IMPLIES = "and", "or", "implies"


@dataclass(frozen=True)
class BoolOp(Formula):
    op: str
    left: Formula
    right: Formula

    def children(self):
        return (self.left, self.right)


EXISTS, FORALL = "exists", "forall"


@dataclass(frozen=True)
class Quant(Formula):
    kind: str
    var: str
    body: Formula

    def children(self):
        return (self.body,)


# -- terms ------------------------------------------------------------------

@dataclass(frozen=True)
class Const(Term):
    value: Weight


@dataclass(frozen=True)
class FunApp(Term):
    name: str
    args: tuple = ()


ADD, SUB, MUL, DIV = "add", "sub", "mul", "div"


@dataclass(frozen=True)
class Arith(Term):
    op: str
    left: Term
    right: Term

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Ite(Term):
    cond: Formula
    then: Term
    other: Term

    def children(self):
        return (self.cond, self.then, self.other)


@dataclass(frozen=True)
class Sum(Term):
    vars: tuple
    guard: Formula
    body: Term

    def children(self):
        return (self.guard, self.body)


@dataclass(frozen=True)
class Avg(Term):
    vars: tuple
    guard: Formula
    body: Term

    def children(self):
        return (self.guard, self.body)


@dataclass(frozen=True)
class Uniq(Term):
    vars: tuple
    guard: Formula
    body: Term

    def children(self):
        return (self.guard, self.body)


@dataclass(frozen=True)
class Ifp(Term):
    name: str
    params: tuple
    body: Term
    args: tuple

    def children(self):
        return (self.body,)


Expr = Union[Formula, Term]
AGGREGATES = (Sum, Avg, Uniq)


# -- convenience constructors -------------------------------------------------

TRUE = Leq(Const(Fraction(0)), Const(Fraction(0)))
FALSE = Leq(Const(Fraction(1)), Const(Fraction(0)))
BOTTOM = Const(BOT)


def const(v) -> Const:
    return Const(BOT if v is BOT else Fraction(v))


def conj(*fs: Formula) -> Formula:
    fs = [f for f in fs if f is not None]
    if not fs:
        return TRUE
    out = fs[0]
    for f in fs[1:]:
        out = BoolOp(AND, out, f)
    return out


def disj(*fs: Formula) -> Formula:
    fs = [f for f in fs if f is not None]
    if not fs:
        return FALSE
    out = fs[0]
    for f in fs[1:]:
        out = BoolOp(OR, out, f)
    return out


def exists(vars: Iterable[str], body: Formula) -> Formula:
    for v in reversed(tuple(vars)):
        body = Quant(EXISTS, v, body)
    return body


def forall(vars: Iterable[str], body: Formula) -> Formula:
    for v in reversed(tuple(vars)):
        body = Quant(FORALL, v, body)
    return body


def term_eq(a: Term, b: Term) -> Formula:
    """Equality of weight terms, as two comparisons."""
    return BoolOp(AND, Leq(a, b), Leq(b, a))


def term_neq(a: Term, b: Term) -> Formula:
    return Not(term_eq(a, b))


def relu(t: Term) -> Term:
    return Ite(Leq(Const(Fraction(0)), t), t, Const(Fraction(0)))


# -- rules and programs -----------------------------------------------------

@dataclass(frozen=True)
class Rule:
    head: str
    vars: tuple
    body: Expr


@dataclass(frozen=True)
class Stratum:
    rules: tuple
    extensional: Vocabulary
    intensional: Vocabulary

    def rule(self, name) -> Rule:
        for r in self.rules:
            if r.head == name:
                return r
        raise KeyError(name)

    @property
    def vocabulary(self) -> Vocabulary:
        return self.extensional.union(self.intensional)

    def relation_rules(self):
        return [r for r in self.rules if self.intensional.is_relation(r.head)]

    def weight_rules(self):
        return [r for r in self.rules if self.intensional.is_function(r.head)]


@dataclass(frozen=True)
class Program:
    strata: tuple
    answer: str
    input_vocab: Vocabulary = field(default_factory=Vocabulary)

    def intensional(self) -> Vocabulary:
        out = Vocabulary()
        for st in self.strata:
            out = out.union(st.intensional)
        return out


# -- traversal --------------------------------------------------------------

def walk(e: Node) -> Iterator[Node]:
    stack = [e]
    while stack:
        n = stack.pop()
        yield n
        stack.extend(reversed(n.children()))


def is_formula(e) -> bool:
    return isinstance(e, Formula)


def is_term(e) -> bool:
    return isinstance(e, Term)


def free_vars(e: Node) -> frozenset:
    """Free variables; aggregates bind their tuple, ifp binds its parameters."""
    if isinstance(e, VarEq):
        return frozenset((e.left, e.right))
    if isinstance(e, (RelAtom, FunApp)):
        return frozenset(e.args)
    if isinstance(e, Const):
        return frozenset()
    if isinstance(e, Quant):
        return free_vars(e.body) - {e.var}
    if isinstance(e, AGGREGATES):
        return (free_vars(e.guard) | free_vars(e.body)) - set(e.vars)
    if isinstance(e, Ifp):
        return (free_vars(e.body) - set(e.params)) | frozenset(e.args)
    out = frozenset()
    for c in e.children():
        out |= free_vars(c)
    return out


def all_vars(e: Node) -> set:
    """Every variable name occurring anywhere, bound or free."""
    out = set()
    for n in walk(e):
        if isinstance(n, VarEq):
            out.update((n.left, n.right))
        elif isinstance(n, (RelAtom, FunApp)):
            out.update(n.args)
        elif isinstance(n, Quant):
            out.add(n.var)
        elif isinstance(n, AGGREGATES):
            out.update(n.vars)
        elif isinstance(n, Ifp):
            out.update(n.params)
            out.update(n.args)
    return out


def symbols(e: Node) -> set:
    """Names of all relation and function symbols mentioned (ifp binders included)."""
    out = set()
    for n in walk(e):
        if isinstance(n, (RelAtom, FunApp)):
            out.add(n.name)
        elif isinstance(n, Ifp):
            out.add(n.name)
    return out


def symbol_partition(e: Node) -> tuple:
    """Return ``(ext, ints)``: free symbols and symbols bound by an ifp."""
    ints: set = set()
    ext: set = set()

    def go(n, bound):
        if isinstance(n, (RelAtom, FunApp)):
            if n.name not in bound:
                ext.add(n.name)
            return
        if isinstance(n, Ifp):
            if n.name in ints:
                raise ValidationError(f"symbol {n.name} is bound by more than one ifp")
            ints.add(n.name)
            go(n.body, bound | {n.name})
            return
        for c in n.children():
            go(c, bound)

    go(e, frozenset())
    clash = ext & ints
    if clash:
        raise ValidationError(
            f"symbol(s) {', '.join(sorted(clash))} both intensional and extensional")
    return frozenset(ext), frozenset(ints)


def ext_symbols(e: Node) -> frozenset:
    """Symbols occurring free in ``e`` (an ifp's own symbol is not free in it)."""
    out = set()

    def go(n, bound):
        if isinstance(n, (RelAtom, FunApp)):
            if n.name not in bound:
                out.add(n.name)
        elif isinstance(n, Ifp):
            go(n.body, bound | {n.name})
        else:
            for c in n.children():
                go(c, bound)

    go(e, frozenset())
    return frozenset(out)


def contains_ifp(e: Node) -> bool:
    return any(isinstance(n, Ifp) for n in walk(e))


# -- rebuilding ---------------------------------------------------------------

def map_children(e: Node, fn: Callable[[Node], Node]) -> Node:
    """Rebuild ``e`` with ``fn`` applied to each direct child node."""
    if isinstance(e, Leq):
        return Leq(fn(e.left), fn(e.right))
    if isinstance(e, Not):
        return Not(fn(e.body))
    if isinstance(e, BoolOp):
        return BoolOp(e.op, fn(e.left), fn(e.right))
    if isinstance(e, Quant):
        return Quant(e.kind, e.var, fn(e.body))
    if isinstance(e, Arith):
        return Arith(e.op, fn(e.left), fn(e.right))
    if isinstance(e, Ite):
        return Ite(fn(e.cond), fn(e.then), fn(e.other))
    if isinstance(e, AGGREGATES):
        return type(e)(e.vars, fn(e.guard), fn(e.body))
    if isinstance(e, Ifp):
        return Ifp(e.name, e.params, fn(e.body), e.args)
    return e


def fresh_name(avoid, base="_v") -> str:
    i = 0
    while f"{base}{i}" in avoid:
        i += 1
    return f"{base}{i}"


class FreshNames:
    """Deterministic supply of variable names avoiding a given set."""

    def __init__(self, avoid=(), base="_v"):
        self.avoid = set(avoid)
        self.base = base
        self.counter = 0

    def __call__(self, n=None):
        if n is None:
            return self._one()
        return tuple(self._one() for _ in range(n))

    def _one(self):
        while f"{self.base}{self.counter}" in self.avoid:
            self.counter += 1
        name = f"{self.base}{self.counter}"
        self.avoid.add(name)
        return name


def rename_vars(e: Node, mapping: Mapping[str, str]) -> Node:
    """Simultaneous capture-avoiding renaming of free variables."""
    mapping = {k: v for k, v in mapping.items() if k != v}
    if not mapping:
        return e
    return _rename(e, mapping)


def _rename(e, mapping):
    if not mapping:
        return e
    if isinstance(e, VarEq):
        return VarEq(mapping.get(e.left, e.left), mapping.get(e.right, e.right))
    if isinstance(e, RelAtom):
        return RelAtom(e.name, tuple(mapping.get(a, a) for a in e.args))
    if isinstance(e, FunApp):
        return FunApp(e.name, tuple(mapping.get(a, a) for a in e.args))
    if isinstance(e, Const):
        return e
    if isinstance(e, Quant):
        (var,), body = _rebind((e.var,), (e.body,), mapping)
        return Quant(e.kind, var, body[0])
    if isinstance(e, AGGREGATES):
        vars, (guard, body) = _rebind(e.vars, (e.guard, e.body), mapping)
        return type(e)(vars, guard, body)
    if isinstance(e, Ifp):
        params, (body,) = _rebind(e.params, (e.body,), mapping)
        return Ifp(e.name, params, body, tuple(mapping.get(a, a) for a in e.args))
    return map_children(e, lambda c: _rename(c, mapping))


def _rebind(bound, bodies, mapping):
    """Rename inside a binder, alpha-converting bound names that would capture."""
    inner = {k: v for k, v in mapping.items() if k not in bound}
    if not inner:
        return tuple(bound), tuple(bodies)
    live = set()
    for b in bodies:
        live |= free_vars(b)
    targets = {inner[k] for k in inner if k in live}
    new_bound = []
    alpha = {}
    avoid = set(targets) | live | set(inner) | set(bound)
    for v in bound:
        if v in targets:
            nv = fresh_name(avoid)
            avoid.add(nv)
            alpha[v] = nv
            new_bound.append(nv)
        else:
            new_bound.append(v)
    full = dict(inner)
    full.update(alpha)
    return tuple(new_bound), tuple(_rename(b, full) for b in bodies)


def instantiate(params: tuple, template: Node, args: tuple) -> Node:
    """``template`` with free ``params`` renamed to ``args``."""
    if len(params) != len(args):
        raise ValidationError("instantiation arity mismatch")
    extra = free_vars(template) - set(params)
    if extra:
        raise ValidationError(f"template has stray free variables {sorted(extra)}")
    return rename_vars(template, dict(zip(params, args)))


def replace_symbols(e: Node, defs: Mapping[str, tuple]) -> Node:
    """Replace each occurrence ``S(args)`` by ``instantiate(params, body, args)``.

    ``defs`` maps a symbol name to ``(params, body)``; formulas replace relation
    atoms and terms replace function applications. Ifp binders shadow.
    """
    def go(n, shadow):
        if isinstance(n, (RelAtom, FunApp)):
            if n.name in defs and n.name not in shadow:
                params, body = defs[n.name]
                return instantiate(tuple(params), body, n.args)
            return n
        if isinstance(n, Ifp):
            return Ifp(n.name, n.params, go(n.body, shadow | {n.name}), n.args)
        return map_children(n, lambda c: go(c, shadow))

    return go(e, frozenset())


def rename_symbols(e: Node, mapping: Mapping[str, str]) -> Node:
    def go(n):
        if isinstance(n, RelAtom):
            return RelAtom(mapping.get(n.name, n.name), n.args)
        if isinstance(n, FunApp):
            return FunApp(mapping.get(n.name, n.name), n.args)
        if isinstance(n, Ifp):
            return Ifp(mapping.get(n.name, n.name), n.params, go(n.body), n.args)
        return map_children(n, go)

    return go(e)


def desugar(e: Node) -> Node:
    """Rewrite avg and uniq into sum, division and if-then-else."""
    def go(n):
        n = map_children(n, go)
        if isinstance(n, Avg):
            return Arith(DIV, Sum(n.vars, n.guard, n.body),
                         Sum(n.vars, n.guard, Const(Fraction(1))))
        if isinstance(n, Uniq):
            avoid = all_vars(n) | free_vars(n)
            fresh = FreshNames(avoid)
            primed = fresh(len(n.vars))
            ren = dict(zip(n.vars, primed))
            same = BoolOp(IMPLIES,
                          BoolOp(AND, n.guard, rename_vars(n.guard, ren)),
                          term_eq(n.body, rename_vars(n.body, ren)))
            avg = Arith(DIV, Sum(n.vars, n.guard, n.body),
                        Sum(n.vars, n.guard, Const(Fraction(1))))
            return Ite(forall(n.vars + primed, same), avg, BOTTOM)
        return n

    return go(e)


# -- validation -------------------------------------------------------------

def check_expression(e: Node, vocab: Mapping, allow_ifp=True):
    """Arity and kind checks for ``e`` against ``vocab``; ifp binders add scope."""
    def sym(name, scope):
        if name in scope:
            return scope[name]
        if name not in vocab:
            raise ValidationError(f"unknown symbol {name}")
        return Symbol(*vocab[name])

    def go(n, scope):
        if isinstance(n, RelAtom):
            s = sym(n.name, scope)
            if s.kind != REL:
                raise ValidationError(f"{n.name} is a weight function, used as a relation")
            if s.arity != len(n.args):
                raise ValidationError(
                    f"{n.name} has arity {s.arity}, applied to {len(n.args)} argument(s)")
        elif isinstance(n, FunApp):
            s = sym(n.name, scope)
            if s.kind != FUN:
                raise ValidationError(f"{n.name} is a relation, used as a weight function")
            if s.arity != len(n.args):
                raise ValidationError(
                    f"{n.name} has arity {s.arity}, applied to {len(n.args)} argument(s)")
        elif isinstance(n, Ifp):
            if not allow_ifp:
                raise ValidationError("ifp terms are not allowed in rule bodies")
            if len(n.params) != len(n.args):
                raise ValidationError(f"ifp {n.name}: {len(n.params)} parameters, "
                                      f"{len(n.args)} arguments")
            if len(set(n.params)) != len(n.params):
                raise ValidationError(f"ifp {n.name}: repeated parameter")
            if n.name in vocab and n.name not in scope:
                raise ValidationError(f"ifp binds {n.name}, which is already a symbol")
            go(n.body, {**scope, n.name: Symbol(FUN, len(n.params))})
        elif isinstance(n, AGGREGATES):
            if len(set(n.vars)) != len(n.vars):
                raise ValidationError("repeated variable in aggregate binder")
            for c in n.children():
                go(c, scope)
        else:
            for c in n.children():
                go(c, scope)
        if isinstance(n, (Leq,)):
            for c in n.children():
                if not isinstance(c, Term):
                    raise ValidationError("comparison operands must be terms")
        elif isinstance(n, (Not, BoolOp, Quant)):
            for c in n.children():
                if not isinstance(c, Formula):
                    raise ValidationError("boolean connectives take formulas")
        elif isinstance(n, Ite):
            if not isinstance(n.cond, Formula) or not isinstance(n.then, Term) \
                    or not isinstance(n.other, Term):
                raise ValidationError("malformed if-then-else")

    go(e, {})
    symbol_partition(e)


def check_rule(rule: Rule, vocab: Vocabulary):
    if rule.head not in vocab:
        raise ValidationError(f"rule head {rule.head} is not declared")
    s = vocab[rule.head]
    if len(rule.vars) != s.arity:
        raise ValidationError(f"rule head {rule.head} has arity {s.arity}, "
                              f"written with {len(rule.vars)} variable(s)")
    if len(set(rule.vars)) != len(rule.vars):
        raise ValidationError(f"rule head {rule.head}: variables must be distinct")
    if s.kind == REL and not isinstance(rule.body, Formula):
        raise ValidationError(f"relation rule {rule.head} needs a formula body")
    if s.kind == FUN and not isinstance(rule.body, Term):
        raise ValidationError(f"weight rule {rule.head} needs a term body")
    check_expression(rule.body, vocab, allow_ifp=False)
    stray = free_vars(rule.body) - set(rule.vars)
    if stray:
        raise ValidationError(
            f"rule {rule.head}: free variable(s) {', '.join(sorted(stray))} not in head")


def make_stratum(rules: Iterable[Rule], extensional: Vocabulary,
                 intensional: Vocabulary | None = None) -> Stratum:
    """Build and validate a stratum; the intensional vocabulary defaults to the heads."""
    rules = tuple(rules)
    heads = [r.head for r in rules]
    dup = {h for h in heads if heads.count(h) > 1}
    if dup:
        raise ValidationError(f"more than one rule for {', '.join(sorted(dup))}")
    if intensional is None:
        raise ValidationError("intensional vocabulary required")
    missing = set(intensional) - set(heads)
    if missing:
        raise ValidationError(f"no rule for {', '.join(sorted(missing))}")
    extra = set(heads) - set(intensional)
    if extra:
        raise ValidationError(f"rule for undeclared symbol {', '.join(sorted(extra))}")
    clash = set(extensional) & set(intensional)
    if clash:
        raise ValidationError(
            f"symbol(s) {', '.join(sorted(clash))} both extensional and intensional")
    vocab = extensional.union(intensional)
    for r in rules:
        check_rule(r, vocab)
    return Stratum(rules, extensional, intensional)


def make_program(strata_rules: Iterable, input_vocab: Vocabulary, declared: Vocabulary,
                 answer: str | None = None) -> Program:
    """Assemble strata from rule lists; symbol kinds and arities come from ``declared``."""
    ext = input_vocab
    strata = []
    defined = set()
    for rules in strata_rules:
        rules = tuple(rules)
        if not rules:
            raise ValidationError("empty stratum")
        heads = [r.head for r in rules]
        for h in heads:
            if h in defined:
                raise ValidationError(f"{h} is defined in more than one stratum")
            if h in input_vocab:
                raise ValidationError(f"{h} is an input symbol and cannot have a rule")
            if h not in declared:
                raise ValidationError(f"rule head {h} is not declared")
        ints = declared.restrict(heads)
        strata.append(make_stratum(rules, ext, ints))
        defined.update(heads)
        ext = ext.union(ints)
    if not strata:
        raise ValidationError("a program needs at least one stratum")
    if answer is None:
        answer = strata[-1].rules[-1].head
    if answer not in defined:
        raise ValidationError(f"answer symbol {answer} is not defined by any rule")
    return Program(tuple(strata), answer, input_vocab)
