"""Generators for the bit-splitting network and the 3-SAT hardness gadget."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from ..errors import ValidationError
from .network import Fnn


@dataclass(frozen=True)
class CnfFormula:
    """Conjunction of clauses of exactly three literals (signed 1-based variables)."""

    num_vars: int
    clauses: tuple

    def __post_init__(self):
        clauses = tuple(tuple(int(l) for l in c) for c in self.clauses)
        object.__setattr__(self, "clauses", clauses)
        if self.num_vars < 1:
            raise ValidationError("a formula needs at least one variable")
        if not clauses:
            raise ValidationError("a formula needs at least one clause")
        for c in clauses:
            if len(c) != 3:
                raise ValidationError(f"clause {c} does not have exactly three literals")
            for lit in c:
                if lit == 0 or abs(lit) > self.num_vars:
                    raise ValidationError(f"literal {lit} out of range 1..{self.num_vars}")

    def satisfied_by(self, assignment) -> bool:
        """``assignment`` is a sequence of 0/1 values for variables 1..n."""
        return all(any((assignment[abs(l) - 1] == 1) == (l > 0) for l in c)
                   for c in self.clauses)

    def to_dimacs(self) -> str:
        lines = [f"p cnf {self.num_vars} {len(self.clauses)}"]
        lines += [" ".join(str(l) for l in c) + " 0" for c in self.clauses]
        return "\n".join(lines) + "\n"


def parse_dimacs(text: str) -> CnfFormula:
    """Read DIMACS CNF; shorter clauses are padded by repeating their last literal."""
    num_vars = None
    clauses = []
    current = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("c") or line.startswith("%"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise ValidationError(f"bad problem line: {line!r}")
            num_vars = int(parts[2])
            continue
        for tok in line.split():
            try:
                lit = int(tok)
            except ValueError:
                raise ValidationError(f"bad literal {tok!r}") from None
            if lit == 0:
                if not current:
                    raise ValidationError("empty clause")
                if len(current) > 3:
                    raise ValidationError(f"clause {current} has more than three literals")
                clauses.append(tuple(current + [current[-1]] * (3 - len(current))))
                current = []
            else:
                current.append(lit)
    if current:
        raise ValidationError("last clause is not terminated by 0")
    if num_vars is None:
        num_vars = max((abs(l) for c in clauses for l in c), default=0)
    return CnfFormula(num_vars, tuple(clauses))


def binary_fraction(bits) -> Fraction:
    """``(0.b1 b2 ... bn)_2``."""
    return sum((Fraction(b, 2 ** (i + 1)) for i, b in enumerate(bits)), Fraction(0))


class _Builder:
    def __init__(self):
        self.nodes = []
        self.edges = {}
        self.biases = {}

    def node(self, name, bias=None, incoming=()):
        self.nodes.append(name)
        if bias is not None:
            self.biases[name] = Fraction(bias)
        for src, w in incoming:
            key = (src, name)
            self.edges[key] = self.edges.get(key, Fraction(0)) + Fraction(w)
        return name

    def build(self, inputs, outputs, sink_to=None):
        if sink_to is not None:
            # hidden nodes nobody reads get a zero-weight edge so they are not sinks
            used = {u for u, _ in self.edges}
            for u in self.nodes:
                if u not in used and u not in outputs and u not in inputs:
                    self.edges[(u, sink_to)] = Fraction(0)
        return Fnn(self.nodes, self.edges, self.biases, inputs, outputs)


def _bit_nodes(b: _Builder, n: int, x: str):
    """Add the ReLU pairs whose difference is bit ``i``; returns ``[(p_i, q_i)]``."""
    pairs = []
    for i in range(1, n + 1):
        # z_i = 2^n x - sum_{j<i} 2^(n-j) bit_j + 1 - 2^(n-i); bit_i = ReLU(z_i) - ReLU(z_i - 1)
        incoming = [(x, 2 ** n)]
        for j, (p, q) in enumerate(pairs, 1):
            incoming += [(p, -(2 ** (n - j))), (q, 2 ** (n - j))]
        const = 1 - Fraction(2) ** (n - i)
        p = b.node(f"p{i}", const, incoming)
        q = b.node(f"q{i}", const - 1, incoming)
        pairs.append((p, q))
    return pairs


def gen_split_network(n: int) -> Fnn:
    """Network mapping ``(0.a1...an)_2`` to the bit vector ``(a1, ..., an)``."""
    if not isinstance(n, int) or n < 1:
        raise ValidationError("the number of bits must be at least 1")
    b = _Builder()
    x = b.node("x")
    pairs = _bit_nodes(b, n, x)
    outs = [b.node(f"out{i}", 0, [(p, 1), (q, -1)]) for i, (p, q) in enumerate(pairs, 1)]
    return b.build([x], outs)


def gen_3sat_network(phi: CnfFormula) -> Fnn:
    """One-input network that is the zero function iff ``phi`` is unsatisfiable."""
    b = _Builder()
    x = b.node("x")
    pairs = _bit_nodes(b, phi.num_vars, x)
    literal = {}

    def lit_node(l):
        if l not in literal:
            p, q = pairs[abs(l) - 1]
            if l > 0:
                literal[l] = b.node(f"x{l}", 0, [(p, 1), (q, -1)])
            else:
                literal[l] = b.node(f"nx{-l}", 1, [(p, -1), (q, 1)])
        return literal[l]

    maxima = []
    for i, clause in enumerate(phi.clauses, 1):
        a, c1, c2 = (lit_node(l) for l in clause)
        # max(a, b) = a + ReLU(b - a), applied twice
        r1 = b.node(f"c{i}r1", 0, [(c1, 1), (a, -1)])
        r2 = b.node(f"c{i}r2", 0, [(c2, 1), (a, -1), (r1, -1)])
        maxima.append(b.node(f"c{i}max", 0, [(a, 1), (r1, 1), (r2, 1)]))
    cur = maxima[0]
    for i, m in enumerate(maxima[1:], 2):
        # min(u, v) = u - ReLU(u - v)
        s = b.node(f"m{i}d", 0, [(cur, 1), (m, -1)])
        cur = b.node(f"m{i}", 0, [(cur, 1), (s, -1)])
    h = b.node("gate", -1, [(cur, 2)])
    out = b.node("out", 0, [(h, 1)])
    return b.build([x], [out], sink_to=out)
