import logging
import random

import pytest
from hypothesis import given, settings, strategies as st

from helpers import (StratumGen, func2loose_agrees, loose2func_agrees, random_distance_structure,
                     random_fnn, random_input, random_structure, shortest_paths_oracle,
                     simind_agrees)
from wsumq.core import Vocabulary, WeightedStructure
from wsumq.errors import ArityCapExceeded, PreconditionUnsatisfiable, ValidationError
from wsumq.evaluator import FUNCTIONAL, LOOSE, eval_expression, run_program, run_stratum
from wsumq.fnn import forward, to_weighted_structure
from wsumq.syntax import ast as A
from wsumq.syntax import builtin_program, parse_expression, parse_program, pretty_print
from wsumq.transform import (AT_LEAST_TWO, NO_PRECONDITION, functional_to_loose,
                             loose_to_functional, simultaneous_induction, transform_program)


def test_func2loose_constant_rule():
    p = parse_program("fun c/1; fun F/1;\nF(x) <- 1;")
    res = functional_to_loose(p.strata[0])
    assert res.preserved_symbols == {"F"}
    assert res.domain_size_precondition == NO_PRECONDITION
    assert any(r.head.startswith("__def_") for r in res.stratum.rules)
    s = WeightedStructure(["a", "b"], Vocabulary.of(funs={"c": 1}))
    out, _ = run_stratum(res.stratum, s, LOOSE)
    assert out.weight_table("F") == {("a",): 1, ("b",): 1}


def test_func2loose_relational_stratum_is_unchanged():
    p = parse_program("rel E/2; rel T/2;\nT(x, y) <- E(x, y) | exists z (T(x, z) & E(z, y));")
    res = functional_to_loose(p.strata[0])
    assert res.stratum.rules == p.strata[0].rules


def test_func2loose_eval_recursive():
    p = builtin_program("eval_recursive")
    rng = random.Random(1)
    for _ in range(10):
        net = random_fnn(rng)
        s = to_weighted_structure(net, random_input(rng, net))
        assert func2loose_agrees(p.strata[0], s)


def test_loose2func_floyd_warshall():
    p = builtin_program("floyd_warshall")
    res = loose_to_functional(p.strata[0])
    rng = random.Random(2)
    for size in (0, 1, 2, 3, 4):
        s, W = random_distance_structure(rng, size)
        out, _ = run_stratum(res.stratum, s, FUNCTIONAL)
        assert out.weight_table("D") == shortest_paths_oracle(s.universe, W)


def test_generic_and_handwritten_fw_simulations_agree():
    generic = transform_program(builtin_program("floyd_warshall"), "loose2func").output
    hand = builtin_program("floyd_warshall_functional")
    rng = random.Random(3)
    for size in (1, 2, 3, 4):
        s, _ = random_distance_structure(rng, size)
        assert run_program(generic, s, FUNCTIONAL)[1] == run_program(hand, s, FUNCTIONAL)[1]


def test_loose2func_small_universes_exhaustive():
    """Every structure over one element for a fixed recursive stratum."""
    p = parse_program("rel P/1; fun c/1; rel R/1; fun G/1;\n"
                      "R(x) <- P(x) | exists y (R(y) & !P(y));\n"
                      "G(x) <- if R(x) then c(x) + 1 else c(x);")
    vocab = Vocabulary.of(rels={"P": 1}, funs={"c": 1})
    for p_on in (False, True):
        for c in (None, 0, 1):
            s = WeightedStructure(["a"], vocab, {"P": {("a",)} if p_on else set()},
                                  {"c": {} if c is None else {("a",): c}})
            assert loose2func_agrees(p.strata[0], s)
    assert loose2func_agrees(p.strata[0], WeightedStructure([], vocab))


def test_arity_cap(caplog):
    p = builtin_program("floyd_warshall")
    with caplog.at_level(logging.WARNING):
        with pytest.raises(ArityCapExceeded):
            loose_to_functional(p.strata[0], arity_cap=2)
    assert caplog.records


def test_simind_reach_with_dummy():
    p = parse_program("rel E/2; rel S/1; rel Reach/1;\n"
                      "Reach(x) <- S(x) | exists y (Reach(y) & E(y, x));")
    res = simultaneous_induction(p.strata[0], "Reach")
    assert res.domain_size_precondition == AT_LEAST_TWO
    assert res.preserved_symbols == {"Reach"}
    vocab = Vocabulary.of(rels={"E": 2, "S": 1})
    rng = random.Random(4)
    for _ in range(15):
        n = rng.randint(2, 4)
        nodes = [f"n{i}" for i in range(n)]
        s = WeightedStructure(nodes, vocab,
                              {"E": {(a, b) for a in nodes for b in nodes if rng.random() < 0.3},
                               "S": {(a,) for a in nodes if rng.random() < 0.3}})
        assert simind_agrees(p.strata[0], s, "Reach")


def test_simind_eval_matches_forward():
    p = builtin_program("eval_recursive")
    res = simultaneous_induction(p.strata[0], "eval")
    assert A.free_vars(res.output) == {"u"}
    rng = random.Random(5)
    for _ in range(8):
        net = random_fnn(rng, max_nodes=7, max_depth=3)
        x = random_input(rng, net)
        s = to_weighted_structure(net, x)
        got = tuple(eval_expression(res.output, s, {"u": o}).value for o in net.outputs)
        assert got == forward(net, x)


def _is_selection(f):
    if isinstance(f, A.VarEq):
        return True
    if isinstance(f, A.Not):
        return isinstance(f.body, A.VarEq)
    return isinstance(f, A.BoolOp) and f.op == A.AND and _is_selection(f.left) \
        and _is_selection(f.right)


@pytest.mark.parametrize("name,answer", [("eval_recursive", "eval"), ("floyd_warshall", "D"),
                                         ("floyd_warshall", "chosen")])
def test_simind_shape(name, answer):
    st_ = builtin_program(name).strata[0]
    out = simultaneous_induction(st_, answer).output
    assert sum(isinstance(n, A.Ifp) for n in A.walk(out)) == 1
    if isinstance(out, A.Avg):
        assert _is_selection(out.guard)
        assert isinstance(out.body, A.Ifp)
    else:
        body = out
        while isinstance(body, A.Quant):
            assert body.kind == A.EXISTS
            body = body.body
        assert isinstance(body, A.BoolOp) and body.op == A.AND
        assert _is_selection(body.left)
    # the printed form is a valid standalone expression
    text = "\n".join(f"{s.kind} {n}/{s.arity};" for n, s in st_.extensional.items())
    assert parse_expression(text + "\n" + pretty_print(out)) == out


def test_simind_empty_stratum():
    empty = A.Stratum((), Vocabulary.of(rels={"E": 2}), Vocabulary())
    with pytest.raises(PreconditionUnsatisfiable):
        simultaneous_induction(empty)


def test_transform_program_kinds():
    p = builtin_program("acyclicity")
    assert isinstance(transform_program(p, "func2loose").output, A.Program)
    assert isinstance(transform_program(p, "loose2func").output, A.Program)
    with pytest.raises(ValidationError):
        transform_program(p, "simind")
    with pytest.raises(ValidationError):
        transform_program(p, "nope")


def test_transformed_programs_print_and_parse():
    for name in ("eval_recursive", "floyd_warshall", "acyclicity"):
        for kind in ("func2loose", "loose2func"):
            out = transform_program(builtin_program(name), kind).output
            assert parse_program(pretty_print(out)) == out


def test_multistratum_loose2func():
    p = builtin_program("acyclicity")
    out = transform_program(p, "loose2func").output
    vocab = Vocabulary.of(rels={"E": 2, "S": 1})
    rng = random.Random(6)
    for _ in range(10):
        n = rng.randint(0, 4)
        nodes = [f"n{i}" for i in range(n)]
        s = WeightedStructure(nodes, vocab,
                              {"E": {(a, b) for a in nodes for b in nodes if rng.random() < 0.3},
                               "S": {(a,) for a in nodes if rng.random() < 0.5}})
        assert run_program(out, s, FUNCTIONAL)[1] == run_program(p, s, LOOSE)[1]


# -- random differential properties ------------------------------------------------

def _instance(seed, min_size=0):
    rng = random.Random(seed)
    stratum = StratumGen(rng).stratum()
    return stratum, random_structure(rng, rng.randint(min_size, 4))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_func2loose_property(seed):
    stratum, s = _instance(seed)
    assert func2loose_agrees(stratum, s)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_loose2func_property(seed):
    stratum, s = _instance(seed)
    assert loose2func_agrees(stratum, s)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_simind_property(seed):
    stratum, s = _instance(seed, min_size=2)
    for answer in stratum.intensional:
        assert simind_agrees(stratum, s, answer)
