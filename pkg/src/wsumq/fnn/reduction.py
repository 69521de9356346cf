"""Reduced networks, the canonical node order, weight bounds and edge splitting."""
from __future__ import annotations

from fractions import Fraction
from typing import Sequence

from ..errors import UnsupportedWeight
from .network import Fnn, node_depth


def _classes(net: Fnn):
    """Equivalence classes in canonical order, plus a node -> class index map.

    Inputs come first and outputs last, each kept as a singleton. Hidden nodes
    are grouped depth by depth: two nodes are equivalent when their biases and
    their summed incoming weights from every earlier class agree. Within a
    depth, classes are ordered by bias and then by those weight vectors.
    """
    depth = node_depth(net)
    cls = {}
    ordered = []  # lists of nodes, in canonical order, inputs and hidden only
    for u in net.inputs:
        cls[u] = len(ordered)
        ordered.append([u])
    hidden = net.hidden()
    outputs = set(net.outputs)
    by_depth = {}
    for u in hidden:
        by_depth.setdefault(depth[u], []).append(u)
    for d in sorted(by_depth):
        earlier = list(range(len(ordered)))  # all classes so far have smaller depth

        def signature(u):
            wts = [Fraction(0)] * len(earlier)
            for v, w in net.predecessors(u):
                if v in outputs:
                    continue
                wts[cls[v]] += w
            return (net.biases[u], tuple(wts))

        groups = {}
        for u in by_depth[d]:
            groups.setdefault(signature(u), []).append(u)
        for key in sorted(groups):
            for u in groups[key]:
                cls[u] = len(ordered)
            ordered.append(groups[key])
    for u in net.outputs:
        cls[u] = len(ordered)
        ordered.append([u])
    return ordered, cls


def canonical_order(net: Fnn) -> list:
    """Equivalence classes of nodes, listed in the canonical quasi-order."""
    ordered, _ = _classes(net)
    return [list(c) for c in ordered]


def reduce(net: Fnn):
    """Quotient of ``net`` by node equivalence.

    Returns the reduced network, whose nodes are named after the first member
    of each class (in the original node order), and the node -> class map.
    """
    ordered, cls = _classes(net)
    pos = {u: i for i, u in enumerate(net.nodes)}
    names = [min(c, key=pos.__getitem__) for c in ordered]
    mapping = {u: names[cls[u]] for u in net.nodes}
    rep = {names[i]: c[0] for i, c in enumerate(ordered)}
    edges = {}
    for (v, u), w in net.edges.items():
        if u != rep[mapping[u]]:
            continue  # incoming weights are read off one representative
        key = (mapping[v], mapping[u])
        edges[key] = edges.get(key, Fraction(0)) + w
    biases = {mapping[u]: net.biases[u] for u in net.nodes if u in net.biases}
    nodes = [n for n in net.nodes if n in rep]
    reduced = Fnn(nodes, edges, biases,
                  [mapping[u] for u in net.inputs], [mapping[u] for u in net.outputs])
    return reduced, mapping


def poly_value(coeffs: Sequence[int], x: int) -> int:
    """Value of the polynomial with coefficients listed from the highest degree."""
    out = 0
    for c in coeffs:
        out = out * x + c
    return out


def check_p_bounded(net: Fnn, coeffs: Sequence[int], reduced: bool = False):
    """Whether every bias and weight ``r/q`` satisfies ``|r|, q <= P(n)``.

    Returns ``(ok, witness)``; the witness names the first offending bias or
    edge as ``("bias", node, value)`` or ``("edge", (u, v), value)``.
    """
    coeffs = [int(c) for c in coeffs]
    if any(c < 0 for c in coeffs):
        raise ValueError("polynomial coefficients must be natural numbers")
    if reduced:
        net, _ = reduce(net)
    bound = poly_value(coeffs, len(net))

    def ok(v):
        return abs(v.numerator) <= bound and v.denominator <= bound

    for u in net.nodes:
        if u in net.biases and not ok(net.biases[u]):
            return False, ("bias", u, net.biases[u])
    for e in sorted(net.edges, key=lambda e: (net.nodes.index(e[0]), net.nodes.index(e[1]))):
        if not ok(net.edges[e]):
            return False, ("edge", e, net.edges[e])
    return True, None


def split_edges(net: Fnn) -> Fnn:
    """Replace each edge of natural weight ``a`` by ``a`` parallel unit-weight ReLU nodes.

    The function is unchanged wherever the value entering each edge is
    nonnegative, which always holds for edges leaving hidden nodes.
    """
    nodes = list(net.nodes)
    taken = set(nodes)
    edges = {}
    biases = dict(net.biases)
    for (u, v), w in net.edges.items():
        if w.denominator != 1 or w < 1:
            raise UnsupportedWeight(f"edge {u}->{v} has weight {w}; only positive "
                                    f"natural weights can be split")
        for i in range(int(w)):
            name = f"{u}>{v}#{i}"
            while name in taken:
                name += "'"
            taken.add(name)
            nodes.append(name)
            biases[name] = Fraction(0)
            edges[(u, name)] = Fraction(1)
            edges[(name, v)] = Fraction(1)
    return Fnn(nodes, edges, biases, net.inputs, net.outputs)
