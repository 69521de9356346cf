"""Evaluation of expressions, strata and programs.

Expressions are compiled once into Python closures over a mutable
:class:`Context`. Quantifiers, aggregates and ifp terms are memoised on the
values of their free variables together with a version stamp of every symbol
they mention, so unchanged subresults are reused across fixpoint rounds.

Variable bindings for quantifiers, aggregate guards and rule heads are found
by a small planner: a formula is split into conjunctive branches, positive
relation atoms act as generators, equalities bind directly, and every other
literal is checked as soon as its variables are bound.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from operator import itemgetter
from typing import Mapping

from .core import (BOT, REL, WeightedStructure, check_assignment, weight_eq, weight_leq)
from .errors import (IterationBoundExceeded, UnboundVariable, UnknownSymbol, ValidationError)
from .syntax import ast as A

FUNCTIONAL = "functional"
LOOSE = "loose"
MODES = (FUNCTIONAL, LOOSE)

_MISSING = object()
_ZERO = Fraction(0)


@dataclass(frozen=True)
class EvalResult:
    kind: str  # "boolean" or "weight"
    value: object

    @property
    def bool_value(self):
        return self.value if self.kind == "boolean" else None

    @property
    def weight_value(self):
        return self.value if self.kind == "weight" else None


@dataclass
class RoundDelta:
    added: dict = field(default_factory=dict)        # relation -> new tuples
    defined: dict = field(default_factory=dict)      # weight fn -> entries leaving BOT
    overwritten: dict = field(default_factory=dict)  # weight fn -> defined entries changed

    @property
    def tuples_added(self):
        return sum(self.added.values())

    @property
    def entries_defined(self):
        return sum(self.defined.values())

    @property
    def entries_overwritten(self):
        return sum(self.overwritten.values())


@dataclass
class FixpointTrace:
    mode: str
    rounds: int = 0
    deltas: list = field(default_factory=list)

    @property
    def termination_kind(self):
        return "functional-fixpoint" if self.mode == FUNCTIONAL else "loose-index"

    def lines(self):
        out = []
        for i, d in enumerate(self.deltas, 1):
            out.append(f"round {i}: +{d.tuples_added} tuples, {d.entries_defined} defined, "
                       f"{d.entries_overwritten} overwritten")
        out.append(f"{self.termination_kind} after {self.rounds} round(s)")
        return out


def _getter(names):
    """Key function ``env -> hashable`` for a fixed tuple of names."""
    names = tuple(names)
    if not names:
        return lambda env: ()
    if len(names) == 1:
        n = names[0]
        return lambda env: env[n]
    return itemgetter(*names)


def _branches(f, positive, limit):
    """Split ``f`` (or its negation) into a disjunction of literal conjunctions.

    Returns a list of branches, each a list of literal formulas, or ``None``
    when the expansion would exceed ``limit`` branches.
    """
    if f == A.TRUE:
        return [[]] if positive else []
    if f == A.FALSE:
        return [] if positive else [[]]
    if isinstance(f, A.Not):
        return _branches(f.body, not positive, limit)
    if isinstance(f, A.BoolOp):
        op = f.op
        if op == A.IMPLIES:
            # a -> b  ==  !a | b
            if positive:
                return _union(_branches(f.left, False, limit), _branches(f.right, True, limit),
                              limit)
            return _product(_branches(f.left, True, limit), _branches(f.right, False, limit),
                            limit)
        conj = (op == A.AND) == positive
        left = _branches(f.left, positive, limit)
        right = _branches(f.right, positive, limit)
        if conj:
            return _product(left, right, limit)
        return _union(left, right, limit)
    return [[f if positive else A.Not(f)]]


def _union(a, b, limit):
    if a is None or b is None or len(a) + len(b) > limit:
        return None
    return a + b


def _product(a, b, limit):
    if a is None or b is None or len(a) * len(b) > limit:
        return None
    return [x + y for x in a for y in b]


def _support_cases(t, conds=()):
    """Decompose nested if-then-else into ``(conditions, leaf)`` pairs, dropping BOT leaves."""
    if isinstance(t, A.Ite):
        return (_support_cases(t.then, conds + (t.cond,))
                + _support_cases(t.other, conds + (A.Not(t.cond),)))
    if isinstance(t, A.Const) and t.value is BOT:
        return []
    return [(conds, t)]


def _has_bot_leaf(t):
    if isinstance(t, A.Ite):
        return _has_bot_leaf(t.then) or _has_bot_leaf(t.other)
    return isinstance(t, A.Const) and t.value is BOT


class Context:
    """Mutable interpretation of symbols plus the compiled-closure cache."""

    BRANCH_LIMIT = 16
    CASE_LIMIT = 32

    def __init__(self, universe, rels: dict, funs: dict):
        self.universe = tuple(universe)
        self.rels = rels
        self.funs = funs
        self._clock = itertools.count(1)
        self.ver = {name: 0 for name in itertools.chain(rels, funs)}
        self._compiled = {}
        self._fv = {}
        self._syms = {}
        self._index = {}

    @classmethod
    def from_structure(cls, s: WeightedStructure):
        rels = {n: set(s.relation(n)) for n in s.vocabulary.relations()}
        funs = {n: s.defined_weights(n) for n in s.vocabulary.functions()}
        return cls(s.universe, rels, funs)

    def tick(self, name):
        self.ver[name] = next(self._clock)

    def set_relation(self, name, tuples):
        self.rels[name] = tuples
        self.tick(name)

    def set_function(self, name, table):
        self.funs[name] = table
        self.tick(name)

    # -- static info with caching -------------------------------------------

    def fv(self, node) -> frozenset:
        key = id(node)
        hit = self._fv.get(key)
        if hit is not None and hit[0] is node:
            return hit[1]
        if isinstance(node, A.VarEq):
            out = frozenset((node.left, node.right))
        elif isinstance(node, (A.RelAtom, A.FunApp)):
            out = frozenset(node.args)
        elif isinstance(node, A.Quant):
            out = self.fv(node.body) - {node.var}
        elif isinstance(node, A.AGGREGATES):
            out = (self.fv(node.guard) | self.fv(node.body)) - set(node.vars)
        elif isinstance(node, A.Ifp):
            out = (self.fv(node.body) - set(node.params)) | frozenset(node.args)
        else:
            out = frozenset()
            for c in node.children():
                out |= self.fv(c)
        self._fv[key] = (node, out)
        return out

    def syms(self, node) -> frozenset:
        """Symbols occurring free in ``node``."""
        key = id(node)
        hit = self._syms.get(key)
        if hit is not None and hit[0] is node:
            return hit[1]
        if isinstance(node, (A.RelAtom, A.FunApp)):
            out = frozenset((node.name,))
        elif isinstance(node, A.Ifp):
            out = self.syms(node.body) - {node.name}
        else:
            out = frozenset()
            for c in node.children():
                out |= self.syms(c)
        self._syms[key] = (node, out)
        return out

    # -- compilation ----------------------------------------------------------

    def compile(self, node):
        key = id(node)
        hit = self._compiled.get(key)
        if hit is not None and hit[0] is node:
            return hit[1]
        fn = self._compile(node)
        self._compiled[key] = (node, fn)
        return fn

    def _memo(self, node, fn):
        """Wrap ``fn`` with a cache keyed on free-variable values and symbol versions."""
        keyf = _getter(sorted(self.fv(node)))
        syms = tuple(sorted(self.syms(node)))
        ver = self.ver
        verf = _getter(syms)
        memo = {}

        def run(env):
            k = keyf(env)
            vk = verf(ver)
            hit = memo.get(k)
            if hit is not None and hit[0] == vk:
                return hit[1]
            val = fn(env)
            memo[k] = (vk, val)
            return val

        return run

    def _compile(self, n):
        if isinstance(n, A.VarEq):
            a, b = n.left, n.right
            return lambda env: env[a] == env[b]
        if isinstance(n, A.RelAtom):
            return self._compile_atom(n)
        if isinstance(n, A.Leq):
            lf, rf = self.compile(n.left), self.compile(n.right)
            return lambda env: weight_leq(lf(env), rf(env))
        if isinstance(n, A.Not):
            f = self.compile(n.body)
            return lambda env: not f(env)
        if isinstance(n, A.BoolOp):
            lf, rf = self.compile(n.left), self.compile(n.right)
            if n.op == A.AND:
                return lambda env: lf(env) and rf(env)
            if n.op == A.OR:
                return lambda env: lf(env) or rf(env)
            return lambda env: (not lf(env)) or rf(env)
        if isinstance(n, A.Quant):
            return self._memo(n, self._compile_quant(n))
        if isinstance(n, A.Const):
            v = n.value
            return lambda env: v
        if isinstance(n, A.FunApp):
            return self._compile_funapp(n)
        if isinstance(n, A.Arith):
            return self._compile_arith(n)
        if isinstance(n, A.Ite):
            c, t, e = self.compile(n.cond), self.compile(n.then), self.compile(n.other)
            return lambda env: t(env) if c(env) else e(env)
        if isinstance(n, A.AGGREGATES):
            return self._memo(n, self._compile_aggregate(n))
        if isinstance(n, A.Ifp):
            return self._compile_ifp(n)
        raise TypeError(f"cannot evaluate {type(n).__name__}")

    def _compile_atom(self, n):
        rels, name, args = self.rels, n.name, n.args
        if len(args) == 0:
            return lambda env: () in rels[name]
        if len(args) == 1:
            a = args[0]
            return lambda env: (env[a],) in rels[name]
        if len(args) == 2:
            a, b = args
            return lambda env: (env[a], env[b]) in rels[name]
        return lambda env: tuple([env[a] for a in args]) in rels[name]

    def _compile_funapp(self, n):
        funs, name, args = self.funs, n.name, n.args
        if len(args) == 0:
            return lambda env: funs[name].get((), BOT)
        if len(args) == 1:
            a = args[0]
            return lambda env: funs[name].get((env[a],), BOT)
        if len(args) == 2:
            a, b = args
            return lambda env: funs[name].get((env[a], env[b]), BOT)
        return lambda env: funs[name].get(tuple([env[a] for a in args]), BOT)

    def _compile_arith(self, n):
        lf, rf = self.compile(n.left), self.compile(n.right)
        op = n.op

        def run(env):
            x = lf(env)
            if x is BOT:
                return BOT
            y = rf(env)
            if y is BOT:
                return BOT
            if op == A.ADD:
                return x + y
            if op == A.SUB:
                return x - y
            if op == A.MUL:
                return x * y
            if y == 0:
                return BOT
            return x / y

        return run

    def _compile_quant(self, n):
        kind = n.kind
        vars = [n.var]
        body = n.body
        while isinstance(body, A.Quant) and body.kind == kind:
            vars.append(body.var)
            body = body.body
        vars = tuple(dict.fromkeys(reversed(vars)))[::-1]  # innermost binder wins on repeats
        enum = self.plan(vars, body, positive=(kind == A.EXISTS))
        stop = _stop
        if kind == A.EXISTS:
            return lambda env: enum(env, stop)
        return lambda env: not enum(env, stop)

    def _compile_aggregate(self, n):
        vars = n.vars
        bindings = self.guard_bindings(vars, n.guard)
        body = self.compile(n.body)
        kind = type(n)

        def run(env):
            bs = bindings(env)
            saved = [env.get(v, _MISSING) for v in vars]
            values = [] if kind is A.Uniq else None
            total = _ZERO
            try:
                for b in bs:
                    for v, a in zip(vars, b):
                        env[v] = a
                    x = body(env)
                    if values is not None:
                        values.append(x)
                        continue
                    if x is BOT:
                        return BOT
                    total += x
            finally:
                _restore(env, vars, saved)
            if kind is A.Sum:
                return total
            if kind is A.Avg:
                return total / len(bs) if bs else BOT
            # uniq: defined only when every value agrees
            if not values:
                return BOT
            first = values[0]
            if any(not weight_eq(first, x) for x in values[1:]):
                return BOT
            return first

        return run

    def guard_bindings(self, vars, guard):
        """``env -> list of binding tuples`` for ``vars`` satisfying ``guard``, cached."""
        enum, multi = self.plan(vars, guard, with_multi=True)
        outer = sorted(self.fv(guard) - set(vars))
        keyf = _getter(outer)
        verf = _getter(tuple(sorted(self.syms(guard))))
        ver = self.ver
        cache = {}
        getv = _getter(vars)
        arity1 = len(vars) == 1

        def run(env):
            k = keyf(env)
            vk = verf(ver)
            hit = cache.get(k)
            if hit is not None and hit[0] == vk:
                return hit[1]
            out = []
            if arity1:
                enum(env, lambda e: out.append((getv(e),)))
            else:
                enum(env, lambda e: out.append(tuple(getv(e)) if vars else ()))
            if multi:
                out = list(dict.fromkeys(out))
            cache[k] = (vk, out)
            return out

        return run

    def _compile_ifp(self, n):
        name, params, args = n.name, n.params, n.args
        self.ver.setdefault(name, 0)
        outer = sorted(self.fv(n.body) - set(params))
        keyf = _getter(outer)
        verf = _getter(tuple(sorted(self.syms(n))))
        ver = self.ver
        runner = self.weight_runner(params, n.body)
        bound = len(self.universe) ** len(params) + 1
        memo = {}
        argf = _getter(args)
        single = len(args) == 1

        def table_for(env):
            k = keyf(env)
            vk = verf(ver)
            hit = memo.get(k)
            if hit is not None and hit[0] == vk:
                return hit[1]
            saved_table = self.funs.get(name, _MISSING)
            saved_ver = self.ver.get(name)
            table = {}
            self.set_function(name, table)
            steps = 0
            try:
                while True:
                    updates = runner(env, table, True)
                    if not updates:
                        break
                    steps += 1
                    if steps > bound:
                        raise IterationBoundExceeded(
                            f"ifp {name}: more than {bound} iterations")
                    table = dict(table)
                    table.update(updates)
                    self.set_function(name, table)
            finally:
                if saved_table is _MISSING:
                    self.funs.pop(name, None)
                else:
                    self.funs[name] = saved_table
                self.ver[name] = saved_ver if saved_ver is not None else 0
                self.tick(name)
            memo[k] = (vk, table)
            return table

        def run(env):
            table = table_for(env)
            key = (argf(env),) if single else (tuple(argf(env)) if args else ())
            return table.get(key, BOT)

        return run

    # -- planning ------------------------------------------------------------

    def plan(self, vars, formula, positive=True, raw_filters=(), with_multi=False):
        """Compile an enumerator ``(env, cb) -> stopped`` over bindings of ``vars``.

        ``cb(env)`` is called once per satisfying binding (once per branch when
        the formula splits into overlapping disjuncts); a truthy return value
        stops the enumeration. ``raw_filters`` are ``(vars, fn)`` pairs checked
        once their variables are bound. The previous values of ``vars`` in
        ``env`` are restored afterwards.
        """
        vars = tuple(vars)
        if formula is None:
            formula = A.TRUE
        branches = _branches(formula, positive, self.BRANCH_LIMIT)
        if branches is None:
            branches = [[formula if positive else A.Not(formula)]]
        outer = (self.fv(formula) - set(vars))
        for rv, _ in raw_filters:
            outer |= set(rv) - set(vars)
        runs = [self._plan_branch(vars, lits, outer, raw_filters) for lits in branches]

        if len(runs) == 1:
            inner = runs[0]
        elif not runs:
            def inner(env, cb):
                return False
        else:
            def inner(env, cb):
                for r in runs:
                    if r(env, cb):
                        return True
                return False

        def run(env, cb):
            saved = [env.get(v, _MISSING) for v in vars]
            try:
                return inner(env, cb)
            finally:
                _restore(env, vars, saved)

        if with_multi:
            return run, len(runs) > 1
        return run

    def _plan_branch(self, vars, lits, outer, raw_filters):
        bound = set(outer)
        todo = [v for v in vars]
        pending = []
        for lit in lits:
            pending.append((self.fv(lit), lit))
        raws = [(frozenset(rv), fn) for rv, fn in raw_filters]
        steps = []

        def ready_filters():
            nonlocal pending, raws
            now, later = [], []
            for item in pending:
                (now if item[0] <= bound else later).append(item)
            pending = later
            fns = [self.compile(lit) for _, lit in sorted(now, key=lambda it: _cost(it[1]))]
            rnow = [fn for rv, fn in raws if rv <= bound]
            raws = [(rv, fn) for rv, fn in raws if not rv <= bound]
            fns.extend(rnow)
            if fns:
                steps.append(_filter_step(fns))

        ready_filters()
        while todo:
            step = None
            # 1. equality with one side bound
            for idx, (fvs, lit) in enumerate(pending):
                if isinstance(lit, A.VarEq):
                    a, b = lit.left, lit.right
                    if a in bound and b not in bound and b in todo:
                        a, b = b, a
                    if b in bound and a not in bound and a in todo:
                        step = _eq_step(a, b)
                        bound.add(a)
                        todo.remove(a)
                        del pending[idx]
                        break
            # 2. positive relation atom as generator
            if step is None:
                best = None
                for idx, (fvs, lit) in enumerate(pending):
                    if isinstance(lit, A.RelAtom) and any(a in todo for a in lit.args) \
                            and all(a in bound or a in todo for a in lit.args):
                        nb = sum(1 for a in lit.args if a in bound)
                        if best is None or nb > best[0]:
                            best = (nb, idx, lit)
                if best is not None:
                    _, idx, lit = best
                    step = self._gen_step(lit, bound)
                    for a in lit.args:
                        if a in todo:
                            todo.remove(a)
                        bound.add(a)
                    del pending[idx]
            # 3. iterate the universe
            if step is None:
                v = _pick_var(todo, pending)
                step = _univ_step(v, self.universe)
                bound.add(v)
                todo.remove(v)
            steps.append(step)
            ready_filters()
        if pending or raws:
            raise ValidationError("planner left literals unchecked (unbound variables)")
        run = _final
        for fac in reversed(steps):
            run = fac(run)
        return run

    def _gen_step(self, lit, bound):
        name = lit.name
        checks, binds, sames = [], [], []
        first = {}
        for p, a in enumerate(lit.args):
            if a in bound:
                checks.append((p, a))
            elif a in first:
                sames.append((p, first[a]))
            else:
                first[a] = p
                binds.append((p, a))
        rels = self.rels
        check_pos = tuple(p for p, _ in checks)
        check_key = _getter([a for _, a in checks])
        index_of = self._relation_index

        def fac(nxt):
            def step(env, cb):
                if checks:
                    k = check_key(env)
                    cands = index_of(name, check_pos).get(k, ())
                else:
                    cands = rels[name]
                for t in cands:
                    if sames:
                        ok = True
                        for p, q in sames:
                            if t[p] != t[q]:
                                ok = False
                                break
                        if not ok:
                            continue
                    for p, a in binds:
                        env[a] = t[p]
                    if nxt(env, cb):
                        return True
                return False
            return step

        return fac

    def _relation_index(self, name, positions):
        key = (name, positions)
        v = self.ver.get(name, 0)
        hit = self._index.get(key)
        if hit is not None and hit[0] == v and hit[1] is self.rels[name]:
            return hit[2]
        idx = {}
        single = len(positions) == 1
        for t in self.rels[name]:
            k = t[positions[0]] if single else tuple(t[p] for p in positions)
            idx.setdefault(k, []).append(t)
        self._index[key] = (v, self.rels[name], idx)
        return idx

    # -- rules ------------------------------------------------------------------

    def relation_runner(self, head_vars, body, name):
        """``env -> set`` of head tuples satisfying ``body`` that are not yet in ``name``."""
        rels = self.rels
        key = _getter(head_vars)
        n = len(head_vars)

        def absent(env):
            k = (key(env),) if n == 1 else (tuple(key(env)) if n else ())
            return k not in rels[name]

        enum = self.plan(head_vars, body, raw_filters=[(head_vars, absent)])

        def run(env):
            out = set()
            if n == 1:
                enum(env, lambda e: out.add((key(e),)))
            elif n == 0:
                enum(env, lambda e: out.add(()))
            else:
                enum(env, lambda e: out.add(tuple(key(e))))
            return out

        return run

    def weight_runner(self, head_vars, body):
        """``(env, table, only_undefined) -> dict`` of non-BOT values of ``body``.

        With ``only_undefined`` the body is evaluated only where ``table`` is BOT.
        """
        head_vars = tuple(head_vars)
        n = len(head_vars)
        key = _getter(head_vars)
        cell = [None]

        def tkey(env):
            return (key(env),) if n == 1 else (tuple(key(env)) if n else ())

        def undefined(env):
            t = cell[0]
            return t is None or tkey(env) not in t

        cases = None
        if _has_bot_leaf(body):
            cases = _support_cases(body)
            if len(cases) > self.CASE_LIMIT:
                cases = None
        if cases is not None:
            compiled = []
            for conds, leaf in cases:
                enum = self.plan(head_vars, A.conj(*conds), raw_filters=[(head_vars, undefined)])
                compiled.append((enum, self.compile(leaf)))

            def run(env, table, only_undefined):
                cell[0] = table if only_undefined else None
                out = {}

                def emit(e):
                    k = tkey(e)
                    if k not in out:
                        v = leaf_fn(e)
                        if v is not BOT:
                            out[k] = v

                for enum, leaf_fn in compiled:
                    enum(env, emit)
                cell[0] = None
                return out

            return run

        body_fn = self.compile(body)
        universe = self.universe

        def run(env, table, only_undefined):
            out = {}
            saved = [env.get(v, _MISSING) for v in head_vars]
            try:
                for t in itertools.product(universe, repeat=n):
                    if only_undefined and t in table:
                        continue
                    for v, a in zip(head_vars, t):
                        env[v] = a
                    val = body_fn(env)
                    if val is not BOT:
                        out[t] = val
            finally:
                _restore(env, head_vars, saved)
            return out

        return run


def _stop(env):
    return True


def _final(env, cb):
    return cb(env)


def _restore(env, vars, saved):
    for v, old in zip(vars, saved):
        if old is _MISSING:
            env.pop(v, None)
        else:
            env[v] = old


def _cost(lit):
    core = lit.body if isinstance(lit, A.Not) else lit
    if isinstance(core, A.VarEq):
        return 0
    if isinstance(core, A.RelAtom):
        return 1
    if isinstance(core, A.Leq):
        return 2
    return 3


def _pick_var(todo, pending):
    best, score = todo[0], -1
    for v in todo:
        s = sum(1 for fvs, _ in pending if v in fvs)
        if s > score:
            best, score = v, s
    return best


def _filter_step(fns):
    if len(fns) == 1:
        f = fns[0]

        def fac(nxt):
            def step(env, cb):
                return nxt(env, cb) if f(env) else False
            return step
        return fac

    def fac(nxt):
        def step(env, cb):
            for f in fns:
                if not f(env):
                    return False
            return nxt(env, cb)
        return step
    return fac


def _eq_step(var, other):
    def fac(nxt):
        def step(env, cb):
            env[var] = env[other]
            return nxt(env, cb)
        return step
    return fac


def _univ_step(var, universe):
    def fac(nxt):
        def step(env, cb):
            for a in universe:
                env[var] = a
                if nxt(env, cb):
                    return True
            return False
        return step
    return fac


# -- public API ---------------------------------------------------------------

def eval_expression(e, s: WeightedStructure, assignment: Mapping[str, str] | None = None,
                    context: Context | None = None) -> EvalResult:
    """Value of a formula or term on ``s`` under ``assignment``."""
    assignment = dict(assignment or {})
    missing = A.free_vars(e) - set(assignment)
    if missing:
        raise UnboundVariable(f"unbound variable(s): {', '.join(sorted(missing))}")
    check_assignment(s, assignment)
    ext, _ = A.symbol_partition(e)
    for name in ext:
        if name not in s.vocabulary:
            raise UnknownSymbol(f"symbol {name} is not interpreted by the structure")
    A.check_expression(e, s.vocabulary)
    ctx = context or Context.from_structure(s)
    fn = ctx.compile(e)
    val = fn(dict(assignment))
    if isinstance(e, A.Formula):
        return EvalResult("boolean", bool(val))
    return EvalResult("weight", val)


def _check_mode(mode):
    if mode not in MODES:
        raise ValidationError(f"unknown mode {mode!r}; use functional or loose")


class StratumRunner:
    """Evaluates one stratum on a context, round by round."""

    def __init__(self, st: A.Stratum, ctx: Context):
        self.st = st
        self.ctx = ctx
        self.rel_runners = {}
        self.fun_runners = {}
        for r in st.rules:
            if st.intensional.is_relation(r.head):
                self.rel_runners[r.head] = ctx.relation_runner(r.vars, r.body, r.head)
            else:
                self.fun_runners[r.head] = ctx.weight_runner(r.vars, r.body)

    def compute(self, mode):
        """Evaluate every rule against the current state without changing it."""
        env = {}
        rel_new = {}
        for name, run in self.rel_runners.items():
            new = run(env)
            if new:
                rel_new[name] = new
        fun_new = {}
        for name, run in self.fun_runners.items():
            table = self.ctx.funs[name]
            fun_new[name] = run(env, table, mode == FUNCTIONAL)
        return rel_new, fun_new

    def apply(self, rel_new, fun_new, mode) -> RoundDelta:
        ctx = self.ctx
        delta = RoundDelta()
        for name, new in rel_new.items():
            ctx.set_relation(name, ctx.rels[name] | new)
            delta.added[name] = len(new)
        for name, values in fun_new.items():
            old = ctx.funs[name]
            if mode == FUNCTIONAL:
                if values:
                    table = dict(old)
                    table.update(values)
                    ctx.set_function(name, table)
                    delta.defined[name] = len(values)
            else:
                if values != old:
                    defined = sum(1 for k in values if k not in old)
                    changed = sum(1 for k, v in old.items() if values.get(k, BOT) != v)
                    ctx.set_function(name, dict(values))
                    if defined:
                        delta.defined[name] = defined
                    if changed:
                        delta.overwritten[name] = changed
        return delta


def _round_bound(st: A.Stratum, size: int, mode: str) -> int:
    total = 1
    for name, sym in st.intensional.items():
        if mode == FUNCTIONAL or sym.kind == REL:
            total += size ** sym.arity
    return total


def _expand(s: WeightedStructure, st: A.Stratum) -> WeightedStructure:
    missing = [n for n in st.extensional if n not in s.vocabulary]
    if missing:
        raise UnknownSymbol(f"structure lacks symbol(s): {', '.join(sorted(missing))}")
    for n, sym in st.extensional.items():
        if s.vocabulary[n] != sym:
            raise ValidationError(f"symbol {n}: structure has {s.vocabulary[n]}, "
                                  f"program expects {sym}")
    return s


def _context_for(st: A.Stratum, s: WeightedStructure) -> Context:
    ctx = Context.from_structure(s)
    for name, sym in st.intensional.items():
        if sym.kind == REL:
            ctx.rels.setdefault(name, set())
        else:
            ctx.funs.setdefault(name, {})
        ctx.ver.setdefault(name, 0)
    return ctx


def _to_structure(ctx: Context, vocab) -> WeightedStructure:
    rels = {n: ctx.rels[n] for n in vocab.relations()}
    funs = {n: ctx.funs[n] for n in vocab.functions()}
    return WeightedStructure(ctx.universe, vocab, rels, funs)


def immediate_consequence(st: A.Stratum, s: WeightedStructure, mode: str = FUNCTIONAL):
    """One simultaneous application of every rule of ``st`` to ``s``."""
    _check_mode(mode)
    vocab = st.vocabulary
    for n in vocab:
        if n not in s.vocabulary:
            raise UnknownSymbol(f"structure lacks symbol {n}")
    ctx = Context.from_structure(s)
    runner = StratumRunner(st, ctx)
    rel_new, fun_new = runner.compute(mode)
    runner.apply(rel_new, fun_new, mode)
    return _to_structure(ctx, s.vocabulary)


def run_stratum(st: A.Stratum, s: WeightedStructure, mode: str = FUNCTIONAL):
    """Fixpoint of ``st`` on ``s`` with intensional symbols starting empty/BOT.

    Returns the expanded structure and a :class:`FixpointTrace`.
    """
    _check_mode(mode)
    _expand(s, st)
    base = s.restrict(st.extensional)
    ctx = _context_for(st, base)
    runner = StratumRunner(st, ctx)
    trace = FixpointTrace(mode)
    bound = _round_bound(st, len(ctx.universe), mode)
    while True:
        rel_new, fun_new = runner.compute(mode)
        if mode == FUNCTIONAL:
            if not rel_new and not any(fun_new.values()):
                break
        elif not rel_new:
            break
        delta = runner.apply(rel_new, fun_new, mode)
        trace.deltas.append(delta)
        trace.rounds += 1
        if trace.rounds > bound:
            raise IterationBoundExceeded(
                f"stratum did not stabilise within {bound} rounds")
    out = s.expand(st.intensional,
                   {n: ctx.rels[n] for n in st.intensional.relations()},
                   {n: ctx.funs[n] for n in st.intensional.functions()})
    return out, trace


def answer_view(s: WeightedStructure, name: str):
    """True/False for nullary relations, a sorted tuple list for relations, a total table for weights."""
    sym = s.vocabulary[name]
    order = {e: i for i, e in enumerate(s.universe)}
    if sym.kind == REL:
        tuples = s.relation(name)
        if sym.arity == 0:
            return () in tuples
        return sorted(tuples, key=lambda t: [order[e] for e in t])
    return s.weight_table(name)


def run_program(p: A.Program, s: WeightedStructure, mode: str = FUNCTIONAL,
                answer: str | None = None):
    """Run every stratum in order; returns ``(structure, answer view, traces)``."""
    _check_mode(mode)
    traces = []
    cur = s
    for st in p.strata:
        cur, trace = run_stratum(st, cur, mode)
        traces.append(trace)
    name = answer or p.answer
    if name not in cur.vocabulary:
        raise UnknownSymbol(f"answer symbol {name} is not defined by the program")
    return cur, answer_view(cur, name), traces
