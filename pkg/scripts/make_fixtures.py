"""Regenerate the fixture corpus under ``fixtures/`` (deterministic)."""
from __future__ import annotations

import json
import random
from fractions import Fraction
from pathlib import Path

from wsumq.core import Vocabulary, WeightedStructure
from wsumq.fnn import parallel_paths_network
from wsumq.syntax.builtins import PROGRAM_TEXTS, TERM_TEXTS

ROOT = Path(__file__).resolve().parent.parent / "fixtures"


def write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def graph(nodes, edges, start=()):
    vocab = Vocabulary.of(rels={"E": 2, "S": 1})
    return WeightedStructure(nodes, vocab, {"E": edges, "S": {(s,) for s in start}}, {})


def distances(seed, size):
    rng = random.Random(seed)
    universe = [f"n{i}" for i in range(size)]
    W = {(i, j): Fraction(0) if i == j else Fraction(rng.randint(1, 20), rng.randint(1, 4))
         for i in universe for j in universe}
    order = {(universe[a], universe[b]) for a in range(size) for b in range(a + 1, size)}
    vocab = Vocabulary.of(rels={"ord": 2}, funs={"W": 2})
    return WeightedStructure(universe, vocab, {"ord": order}, {"W": W})


def main():
    for name, text in PROGRAM_TEXTS.items():
        write(ROOT / "programs" / f"{name}.wsq", text)
    for name, text in TERM_TEXTS.items():
        write(ROOT / "programs" / f"{name}.wsq", text)
    write(ROOT / "programs" / "not_scalar.wsq",
          "fun c/1; fun G/1;\nG(x) <- if c(x) = 0 then 1 else G(x) * G(x);\nanswer G;\n")

    structures = {
        "dist4": distances(4, 4),
        "dag": graph(["a", "b", "c", "d"], {("a", "b"), ("b", "c"), ("a", "d"), ("d", "c")}, ["a"]),
        "cycle": graph(["a", "b", "c"], {("a", "b"), ("b", "c"), ("c", "b")}, ["a"]),
        "path4": graph([f"v{i}" for i in range(5)], {(f"v{i}", f"v{i + 1}") for i in range(4)}),
    }
    for name, s in structures.items():
        write(ROOT / "structures" / f"{name}.json", s.dumps() + "\n")

    for a in (1, 2, 5):
        write(ROOT / "nets" / f"parallel_a{a}.json", parallel_paths_network(a).dumps() + "\n")
        reduced = parallel_paths_network(a, reduced=True)
        write(ROOT / "nets" / f"parallel_reduced_a{a}.json", reduced.dumps() + "\n")
    write(ROOT / "nets" / "wide_edge_a5.json", json.dumps({
        "nodes": ["in", "out"], "inputOrder": ["in"], "outputOrder": ["out"],
        "biases": {"out": "0"}, "edges": [{"from": "in", "to": "out", "weight": "5"}]},
        indent=2) + "\n")

    write(ROOT / "cnf" / "sat_x1.cnf", "c (X1 | X1 | X1)\np cnf 1 1\n1 1 1 0\n")
    write(ROOT / "cnf" / "unsat_x1.cnf", "c X1 and not X1\np cnf 1 2\n1 0\n-1 0\n")
    write(ROOT / "cnf" / "sat3.cnf",
          "p cnf 3 4\n1 -2 3 0\n-1 2 0\n2 3 -3 0\n-1 -2 -3 0\n")


if __name__ == "__main__":
    main()
