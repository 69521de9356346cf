"""Shared generators and oracles for the test suite."""
from __future__ import annotations

import itertools
import random
from fractions import Fraction

from wsumq.core import BOT, Vocabulary, WeightedStructure
from wsumq.syntax import ast as A

# extensional vocabulary used by the random strata
EXT = Vocabulary.of(rels={"E": 2, "P": 1}, funs={"c": 1})
CONST_POOL = [Fraction(0), Fraction(1), Fraction(2), Fraction(-1), Fraction(1, 2), BOT]


def random_structure(rng: random.Random, size: int, vocab=EXT) -> WeightedStructure:
    universe = [f"e{i}" for i in range(size)]
    rels, funs = {}, {}
    density = rng.choice([0.15, 0.3, 0.5])
    for name, sym in vocab.items():
        tuples = list(itertools.product(universe, repeat=sym.arity))
        if sym.kind == "rel":
            rels[name] = {t for t in tuples if rng.random() < density}
        else:
            funs[name] = {t: rng.choice(CONST_POOL[:5] + [BOT]) for t in tuples}
    return WeightedStructure(universe, vocab, rels, funs)


class StratumGen:
    """Random small strata over :data:`EXT` with one or two intensional symbols."""

    def __init__(self, rng: random.Random):
        self.rng = rng

    def stratum(self):
        rng = self.rng
        count = rng.choice([1, 2, 2])
        syms = {}
        for i in range(count):
            kind = rng.choice(["rel", "fun"])
            ar = rng.choice([0, 1, 1, 2])
            syms[f"{'R' if kind == 'rel' else 'G'}{i}"] = (kind, ar)
        self.ints = Vocabulary(syms)
        self.vocab = EXT.union(self.ints)
        rules = []
        for name, sym in self.ints.items():
            head = tuple(f"x{j}" for j in range(sym.arity))
            if sym.kind == "rel":
                body = self.formula(list(head), 3)
                if head and rng.random() < 0.6:
                    body = A.BoolOp(A.OR, body, self.propagate(head))
            else:
                body = self.term(list(head), 3)
                if head and rng.random() < 0.6:
                    body = A.Ite(self.formula(list(head), 1), body, self.accumulate(head))
            rules.append(A.Rule(name, head, body))
        return A.make_stratum(rules, EXT, self.ints)

    def _step(self, head):
        """Fresh variable ``q`` with an edge into the first head variable."""
        q = "p0"
        return q, A.RelAtom("E", (q, head[0]))

    def _recursive_args(self, head, q, arity):
        args = [self.rng.choice(list(head) + [q]) for _ in range(arity)]
        if arity:
            args[0] = q
        return tuple(args)

    def propagate(self, head):
        """``exists q (E(q, x) & S(q, ..))`` for an intensional relation ``S``."""
        rels = [n for n, s in self.ints.items() if s.kind == "rel"]
        name = self.rng.choice(rels)
        q, edge = self._step(head)
        atom = A.RelAtom(name, self._recursive_args(head, q, self.ints[name].arity))
        return A.Quant(A.EXISTS, q, A.conj(edge, atom))

    def accumulate(self, head):
        """``sum q: E(q, x) G(q, ..) + c(q)`` for an intensional function ``G``."""
        funs = [n for n, s in self.ints.items() if s.kind == "fun"]
        name = self.rng.choice(funs)
        q, edge = self._step(head)
        app = A.FunApp(name, self._recursive_args(head, q, self.ints[name].arity))
        body = A.Arith(self.rng.choice([A.ADD, A.MUL]), app, A.FunApp("c", (q,)))
        agg = self.rng.choice([A.Sum, A.Avg, A.Uniq])
        return agg((q,), edge, body)

    def _args(self, vars, n):
        return tuple(self.rng.choice(vars) for _ in range(n))

    def formula(self, vars, depth):
        rng = self.rng
        atoms = []
        if vars:
            atoms += ["E", "P", "eq"]
        atoms += [n for n, s in self.vocab.items() if s.kind == "rel" and (s.arity == 0 or vars)]
        atoms += ["leq"]
        if depth <= 0 or rng.random() < 0.3:
            a = rng.choice(atoms)
            if a == "eq":
                return A.VarEq(*self._args(vars, 2))
            if a == "leq":
                return A.Leq(self.term(vars, 0), self.term(vars, 0))
            return A.RelAtom(a, self._args(vars, self.vocab[a].arity))
        op = rng.choice(["not", "and", "or", "exists", "exists", "implies"])
        if op == "not":
            return A.Not(self.formula(vars, depth - 1))
        if op == "exists":
            v = f"q{depth}"
            kind = rng.choice([A.EXISTS, A.EXISTS, A.FORALL])
            return A.Quant(kind, v, self.formula(vars + [v], depth - 1))
        bop = {"and": A.AND, "or": A.OR, "implies": A.IMPLIES}[op]
        return A.BoolOp(bop, self.formula(vars, depth - 1), self.formula(vars, depth - 1))

    def term(self, vars, depth):
        rng = self.rng
        funs = [n for n, s in self.vocab.items() if s.kind == "fun" and (s.arity == 0 or vars)]
        if depth <= 0 or rng.random() < 0.3:
            if funs and rng.random() < 0.6:
                f = rng.choice(funs)
                return A.FunApp(f, self._args(vars, self.vocab[f].arity))
            return A.Const(rng.choice(CONST_POOL))
        op = rng.choice(["arith", "arith", "ite", "ite", "sum", "avg"])
        if op == "arith":
            aop = rng.choice([A.ADD, A.ADD, A.SUB, A.MUL, A.DIV])
            return A.Arith(aop, self.term(vars, depth - 1), self.term(vars, depth - 1))
        if op == "ite":
            return A.Ite(self.formula(vars, depth - 1), self.term(vars, depth - 1),
                         self.term(vars, depth - 1))
        v = f"s{depth}"
        agg = A.Sum if op == "sum" else A.Avg
        return agg((v,), self.formula(vars + [v], depth - 1), self.term(vars + [v], depth - 1))


def random_fraction(rng, pool=(-2, -1, Fraction(-1, 2), 0, Fraction(1, 2), 1, 2)):
    return Fraction(rng.choice(pool))


def shortest_paths_oracle(universe, W):
    """All-pairs shortest distances by enumerating simple paths."""
    out = {}
    for i in universe:
        for j in universe:
            best = W[(i, j)]
            rest = [v for v in universe if v not in (i, j)]
            for r in range(1, len(rest) + 1):
                for mid in itertools.permutations(rest, r):
                    path = (i,) + mid + (j,)
                    cost = sum(W[(path[t], path[t + 1])] for t in range(len(path) - 1))
                    if cost < best:
                        best = cost
            out[(i, j)] = best
    return out


def single_relaxation(universe, W):
    """Distances after relaxing every pair through the first element only."""
    k = universe[0]
    return {(i, j): min(W[(i, j)], W[(i, k)] + W[(k, j)]) for i in universe for j in universe}


def random_distance_structure(rng, size):
    universe = [f"n{i}" for i in range(size)]
    W = {}
    for i in universe:
        for j in universe:
            W[(i, j)] = Fraction(0) if i == j else Fraction(rng.randint(1, 20), rng.randint(1, 4))
    order = {(universe[a], universe[b]) for a in range(size) for b in range(size) if a < b}
    vocab = Vocabulary.of(rels={"ord": 2}, funs={"W": 2})
    return WeightedStructure(universe, vocab, {"ord": order}, {"W": W}), W


WEIGHT_POOL = (-2, -1, Fraction(-1, 2), 0, Fraction(1, 2), 1, 2)


def random_fnn(rng, max_nodes=12, max_depth=4, clone_prob=0.4):
    """Layered random network; some hidden nodes are clones so reduction has work to do."""
    from wsumq.fnn import Fnn

    n_in = rng.randint(1, 2)
    n_out = rng.randint(1, 2)
    n_layers = rng.randint(1, max_depth - 1)
    budget = max_nodes - n_in - n_out
    layers = [[f"i{k}" for k in range(n_in)]]
    count = 0
    for d in range(n_layers):
        room = budget - count - (n_layers - d - 1)
        size = rng.randint(1, max(1, min(3, room)))
        layers.append([f"h{count + k}" for k in range(size)])
        count += size
    layers.append([f"o{k}" for k in range(n_out)])
    edges, biases = {}, {}
    for d in range(1, len(layers)):
        earlier = [u for layer in layers[:d] for u in layer]
        prev = None
        for v in layers[d]:
            biases[v] = random_fraction(rng, WEIGHT_POOL)
            if prev is not None and d < len(layers) - 1 and rng.random() < clone_prob:
                biases[v] = biases[prev]
                for (a, b), w in list(edges.items()):
                    if b == prev:
                        edges[(a, v)] = w
                prev = v
                continue
            edges[(rng.choice(layers[d - 1]), v)] = random_fraction(rng, WEIGHT_POOL)
            for u in earlier:
                if rng.random() < 0.3:
                    edges[(u, v)] = random_fraction(rng, WEIGHT_POOL)
            prev = v
    # every non-output node needs a successor
    for d in range(len(layers) - 1):
        later = [u for layer in layers[d + 1:] for u in layer]
        for u in layers[d]:
            if not any(a == u for a, _ in edges):
                edges[(u, rng.choice(later))] = random_fraction(rng, WEIGHT_POOL)
    nodes = [u for layer in layers for u in layer]
    return Fnn(nodes, edges, biases, layers[0], layers[-1])


def random_input(rng, net, pool=(-3, -1, Fraction(-1, 3), 0, Fraction(1, 2), 1, Fraction(5, 2))):
    return [Fraction(rng.choice(pool)) for _ in net.inputs]


# -- transformation oracles ---------------------------------------------------------

def _same(a, b, names):
    """Equality on ``names``, with relations compared as sets and weights as tables."""
    return a.agrees_on(b, names)


def func2loose_agrees(stratum, s):
    from wsumq.evaluator import FUNCTIONAL, LOOSE, run_stratum
    from wsumq.transform import functional_to_loose

    res = functional_to_loose(stratum)
    want, _ = run_stratum(stratum, s, FUNCTIONAL)
    got, _ = run_stratum(res.stratum, s, LOOSE)
    return _same(want, got, stratum.intensional)


def loose2func_agrees(stratum, s, arity_cap=12):
    from wsumq.evaluator import FUNCTIONAL, LOOSE, run_stratum
    from wsumq.transform import loose_to_functional

    res = loose_to_functional(stratum, arity_cap=arity_cap)
    want, _ = run_stratum(stratum, s, LOOSE)
    got, _ = run_stratum(res.stratum, s, FUNCTIONAL)
    return _same(want, got, stratum.intensional)


def simind_agrees(stratum, s, answer=None):
    """Compare the single ifp expression with the stratum's answer at every tuple."""
    from wsumq.core import weight_eq
    from wsumq.evaluator import FUNCTIONAL, eval_expression, run_stratum
    from wsumq.syntax import ast as A
    from wsumq.transform import simultaneous_induction

    answer = answer or stratum.rules[-1].head
    res = simultaneous_induction(stratum, answer)
    want, _ = run_stratum(stratum, s, FUNCTIONAL)
    rule = stratum.rule(answer)
    fv = sorted(A.free_vars(res.output))
    assert set(fv) <= set(rule.vars)
    is_rel = stratum.intensional.is_relation(answer)
    for tup in itertools.product(s.universe, repeat=len(rule.vars)):
        env = {v: e for v, e in zip(rule.vars, tup) if v in fv}
        got = eval_expression(res.output, s, env).value
        if is_rel:
            if got != (tup in want.relation(answer)):
                return False
        elif not weight_eq(got, want.weight(answer, tup)):
            return False
    return True
