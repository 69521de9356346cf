import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from helpers import (EXT, StratumGen, random_distance_structure, random_fnn, random_input,
                     random_structure, shortest_paths_oracle, single_relaxation)
from wsumq.core import BOT, Vocabulary, WeightedStructure, weight_eq
from wsumq.errors import UnboundVariable, UnknownSymbol, ValidationError
from wsumq.evaluator import (FUNCTIONAL, LOOSE, eval_expression, immediate_consequence,
                             run_program, run_stratum)
from wsumq.fnn import forward, to_weighted_structure
from wsumq.syntax import ast as A
from wsumq.syntax import builtin_program, desugar, parse_expression, parse_program

VOCAB = Vocabulary.of(rels={"E": 2, "P": 1}, funs={"c": 1})


def small():
    return WeightedStructure(["a", "b", "c"], VOCAB,
                             {"E": {("a", "b"), ("b", "c")}, "P": {("a",), ("b",)}},
                             {"c": {("a",): 1, ("b",): 3}})


def ev(text, s=None, **bind):
    s = s or small()
    return eval_expression(parse_expression(text, s.vocabulary), s, bind).value


# -- expressions -----------------------------------------------------------------

def test_sum_ranges_over_guard_only():
    # c(c) is bot but c is not in P, so it does not poison the sum
    assert ev("sum (x): P(x) c(x)") == 4
    assert ev("sum (x): true c(x)") is BOT
    assert ev("sum (x): false c(x)") == 0


def test_avg_and_uniq():
    assert ev("avg (x): P(x) c(x)") == 2
    assert ev("avg (x): false c(x)") is BOT
    assert ev("uniq (x): P(x) c(x)") is BOT
    assert ev("uniq (x): (P(x) & x = y) c(x)", y="a") == 1
    assert ev("uniq (x): P(x) 7") == 7
    assert ev("uniq (x): false 7") is BOT


def test_arithmetic_and_bot():
    assert ev("1/2 + 1/3") == Fraction(5, 6)
    assert ev("1 / 0") is BOT
    assert ev("c(x) * 2", x="c") is BOT
    assert ev("bot <= 0") is True
    assert ev("0 <= bot") is False


def test_if_then_else_and_quantifiers():
    assert ev("if exists y E(x, y) then 1 else 2", x="a") == 1
    assert ev("if exists y E(x, y) then 1 else 2", x="c") == 2
    assert ev("forall x (P(x) -> exists y E(x, y))") is True
    assert ev("exists x (E(x, x))") is False


def test_empty_universe():
    s = WeightedStructure([], VOCAB)
    assert ev("forall x P(x)", s) is True
    assert ev("exists x P(x)", s) is False
    assert ev("sum (x): true c(x)", s) == 0


def test_unbound_and_unknown():
    s = small()
    with pytest.raises(UnboundVariable):
        eval_expression(parse_expression("c(x)", s.vocabulary), s, {})
    with pytest.raises(ValidationError):
        eval_expression(parse_expression("c(x)", s.vocabulary), s, {"x": "zz"})
    other = WeightedStructure(["a"], Vocabulary.of(rels={"E": 2}))
    with pytest.raises((UnknownSymbol, ValidationError)):
        eval_expression(parse_expression("c(x)", s.vocabulary), other, {"x": "a"})


def test_squaring_on_a_path():
    vocab = Vocabulary.of(rels={"E": 2})
    term = builtin_program("squaring")
    for n in range(5):
        nodes = [f"v{i}" for i in range(n + 1)]
        s = WeightedStructure(nodes, vocab, {"E": {(nodes[i], nodes[i + 1]) for i in range(n)}})
        assert eval_expression(term, s, {"x": nodes[-1]}).value == 2 ** (2 ** n)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_desugared_aggregates_agree(seed):
    rng = random.Random(seed)
    gen = StratumGen(rng)
    gen.vocab = EXT
    gen.ints = Vocabulary()
    t = gen.term(["x0"], 3)
    agg = rng.choice([A.Avg, A.Uniq])
    t = agg(("q",), gen.formula(["x0", "q"], 2), gen.term(["x0", "q"], 2))
    s = random_structure(rng, rng.randint(0, 3))
    for e in s.universe:
        a = eval_expression(t, s, {"x0": e}).value
        b = eval_expression(desugar(t), s, {"x0": e}).value
        assert weight_eq(a, b)


# -- strata ----------------------------------------------------------------------

def test_floyd_warshall_loose_matches_shortest_paths():
    p = builtin_program("floyd_warshall")
    rng = random.Random(7)
    for size in (1, 2, 3, 4):
        s, W = random_distance_structure(rng, size)
        _, D, _ = run_program(p, s, LOOSE)
        assert D == shortest_paths_oracle(s.universe, W)


def test_floyd_warshall_functional_freezes_after_one_relaxation():
    p = builtin_program("floyd_warshall")
    rng = random.Random(8)
    s, W = random_distance_structure(rng, 4)
    _, D, _ = run_program(p, s, FUNCTIONAL)
    assert D == single_relaxation(s.universe, W)


def test_functional_floyd_warshall_program():
    p = builtin_program("floyd_warshall_functional")
    rng = random.Random(9)
    for size in (1, 3, 4):
        s, W = random_distance_structure(rng, size)
        _, D, _ = run_program(p, s, FUNCTIONAL)
        assert D == shortest_paths_oracle(s.universe, W)


def test_loose_without_relations_stops_immediately():
    p = parse_program("fun c/1; fun G/1;\nG(x) <- c(x) + 1;")
    s = WeightedStructure(["a"], Vocabulary.of(funs={"c": 1}), {}, {"c": {("a",): 1}})
    out, trace = run_stratum(p.strata[0], s, LOOSE)
    assert trace.rounds == 0
    assert out.weight("G", ("a",)) is BOT
    assert trace.termination_kind == "loose-index"


def _reach_oracle(nodes, edges, start):
    """True iff no cycle is reachable from ``start`` (brute force over paths)."""
    succ = {u: [v for (a, v) in edges if a == u] for u in nodes}
    seen = set()
    stack = list(start)
    while stack:
        u = stack.pop()
        if u in seen:
            continue
        seen.add(u)
        stack.extend(succ[u])
    # a reachable node lies on a cycle iff it reaches itself in >= 1 steps
    for u in seen:
        frontier, visited = list(succ[u]), set()
        while frontier:
            v = frontier.pop()
            if v == u:
                return False
            if v not in visited:
                visited.add(v)
                frontier.extend(succ[v])
    return True


def test_acyclicity_examples():
    p = builtin_program("acyclicity")
    vocab = Vocabulary.of(rels={"E": 2, "S": 1})
    dag = WeightedStructure(["a", "b", "c"], vocab, {"E": {("a", "b"), ("b", "c")}, "S": {("a",)}})
    assert run_program(p, dag)[1] is True
    cyc = WeightedStructure(["a", "b"], vocab, {"E": {("a", "b"), ("b", "a")}, "S": {("a",)}})
    assert run_program(p, cyc)[1] is False
    rng = random.Random(3)
    for _ in range(40):
        n = rng.randint(1, 5)
        nodes = [f"n{i}" for i in range(n)]
        edges = {(u, v) for u in nodes for v in nodes if rng.random() < 0.3}
        start = {(u,) for u in nodes if rng.random() < 0.4} or {(nodes[0],)}
        s = WeightedStructure(nodes, vocab, {"E": edges, "S": start})
        assert run_program(p, s)[1] == _reach_oracle(nodes, edges, [u for (u,) in start])


def test_eval_recursive_matches_forward():
    p = builtin_program("eval_recursive")
    rng = random.Random(11)
    for _ in range(20):
        net = random_fnn(rng)
        x = random_input(rng, net)
        _, table, _ = run_program(p, to_weighted_structure(net, x))
        assert tuple(table[(o,)] for o in net.outputs) == forward(net, x)


def test_eval_depth_bounded_matches_recursive():
    p = builtin_program("eval_recursive")
    rng = random.Random(12)
    term = builtin_program("eval_depth_bounded", {"depth": 4})
    for _ in range(5):
        net = random_fnn(rng)
        s = to_weighted_structure(net, random_input(rng, net))
        _, table, _ = run_program(p, s)
        for u in net.nodes:
            assert weight_eq(eval_expression(term, s, {"u": u}).value, table[(u,)])


def test_unknown_mode():
    p = builtin_program("acyclicity")
    with pytest.raises(ValidationError):
        run_program(p, WeightedStructure([], Vocabulary.of(rels={"E": 2, "S": 1})), "eager")


def test_missing_input_symbol():
    p = builtin_program("acyclicity")
    with pytest.raises(UnknownSymbol):
        run_program(p, WeightedStructure([], Vocabulary.of(rels={"E": 2})))


# -- invariants ------------------------------------------------------------------

def _bound(st_, size, mode):
    return 1 + sum(size ** s.arity for s in st_.intensional.values()
                   if mode == FUNCTIONAL or s.kind == "rel")


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6), st.sampled_from([FUNCTIONAL, LOOSE]))
def test_rounds_monotonicity_and_stability(seed, mode):
    """Replay the fixpoint with the one-step operator and check the per-round invariants."""
    rng = random.Random(seed)
    stratum = StratumGen(rng).stratum()
    s = random_structure(rng, rng.randint(0, 3))
    out, trace = run_stratum(stratum, s, mode)
    assert trace.rounds <= _bound(stratum, len(s.universe), mode)
    cur = s.expand(stratum.intensional)
    rels = list(stratum.intensional.relations())
    funs = list(stratum.intensional.functions())
    for _ in range(trace.rounds):
        nxt = immediate_consequence(stratum, cur, mode)
        for r in rels:
            assert cur.relation(r) <= nxt.relation(r)
        if mode == FUNCTIONAL:
            for f in funs:
                for t, v in cur.defined_weights(f).items():
                    assert nxt.weight(f, t) == v
        cur = nxt
    assert cur.agrees_on(out, stratum.intensional)
    # the run stopped because nothing (functional) or no relation (loose) changes any more
    nxt = immediate_consequence(stratum, cur, mode)
    names = list(stratum.intensional) if mode == FUNCTIONAL else rels
    assert nxt.agrees_on(cur, names)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_ifp_term_agrees_with_stratum(seed):
    rng = random.Random(seed)
    gen = StratumGen(rng)
    while True:
        stratum = gen.stratum()
        if len(stratum.rules) == 1 and stratum.weight_rules():
            break
    rule = stratum.rules[0]
    s = random_structure(rng, rng.randint(1, 3))
    out, _ = run_stratum(stratum, s, FUNCTIONAL)
    args = tuple(f"a{i}" for i in range(len(rule.vars)))
    term = A.Ifp(rule.head, rule.vars, rule.body, args)
    for tup in itertools.product(s.universe, repeat=len(args)):
        v = eval_expression(term, s, dict(zip(args, tup))).value
        assert weight_eq(v, out.weight(rule.head, tup))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6), st.sampled_from([FUNCTIONAL, LOOSE]))
def test_runs_are_deterministic(seed, mode):
    rng = random.Random(seed)
    stratum = StratumGen(rng).stratum()
    s = random_structure(rng, 3)
    a, ta = run_stratum(stratum, s, mode)
    b, tb = run_stratum(stratum, s, mode)
    assert a == b
    assert ta.lines() == tb.lines()
