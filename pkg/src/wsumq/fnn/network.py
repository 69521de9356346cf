"""Feedforward ReLU networks with exact rational weights."""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from ..core import BOT, WeightedStructure, format_weight, parse_weight
from ..errors import DimensionMismatch, ValidationError
from ..syntax.builtins import FNN_VOCAB


def _rational(v, what) -> Fraction:
    w = parse_weight(v)
    if w is BOT:
        raise ValidationError(f"{what} must be a rational number, not bot")
    return w


@dataclass(frozen=True, eq=False)
class Fnn:
    """Acyclic network; hidden nodes apply ReLU, output nodes are linear.

    ``edges`` maps ``(source, target)`` to a weight and ``biases`` gives a
    weight for every non-input node. Inputs must be exactly the sources and
    outputs exactly the sinks of the graph.
    """

    nodes: tuple
    edges: Mapping
    biases: Mapping
    inputs: tuple
    outputs: tuple

    def __init__(self, nodes, edges, biases, inputs, outputs):
        object.__setattr__(self, "nodes", tuple(nodes))
        object.__setattr__(self, "edges",
                           {(u, v): _rational(w, f"weight of {u}->{v}")
                            for (u, v), w in dict(edges).items()})
        object.__setattr__(self, "biases",
                           {u: _rational(b, f"bias of {u}") for u, b in dict(biases).items()})
        object.__setattr__(self, "inputs", tuple(inputs))
        object.__setattr__(self, "outputs", tuple(outputs))
        self._validate()
        object.__setattr__(self, "_order", self._topological())

    def _validate(self):
        nodes = set(self.nodes)
        if len(nodes) != len(self.nodes):
            raise ValidationError("node ids must be distinct")
        for u, v in self.edges:
            if u not in nodes or v not in nodes:
                raise ValidationError(f"edge {u}->{v} mentions an unknown node")
            if u == v:
                raise ValidationError(f"self-loop on {u}")
        if not self.inputs or not self.outputs:
            raise ValidationError("a network needs at least one input and one output")
        if set(self.inputs) & set(self.outputs):
            raise ValidationError("input and output nodes must be distinct")
        for group, name in ((self.inputs, "input"), (self.outputs, "output")):
            if len(set(group)) != len(group):
                raise ValidationError(f"repeated {name} node")
            if not set(group) <= nodes:
                raise ValidationError(f"unknown {name} node")
        has_in = {v for _, v in self.edges}
        has_out = {u for u, _ in self.edges}
        sources = [u for u in self.nodes if u not in has_in]
        sinks = [u for u in self.nodes if u not in has_out]
        if set(sources) != set(self.inputs):
            raise ValidationError(f"sources {sorted(sources)} differ from the inputs")
        if set(sinks) != set(self.outputs):
            raise ValidationError(f"sinks {sorted(sinks)} differ from the outputs")
        for u in self.nodes:
            if u in self.inputs:
                if u in self.biases:
                    raise ValidationError(f"input node {u} cannot have a bias")
            elif u not in self.biases:
                raise ValidationError(f"node {u} has no bias")
        extra = set(self.biases) - nodes
        if extra:
            raise ValidationError(f"bias for unknown node(s) {sorted(extra)}")

    def _topological(self):
        preds = {u: [] for u in self.nodes}
        succs = {u: [] for u in self.nodes}
        for (u, v), w in self.edges.items():
            preds[v].append((u, w))
            succs[u].append(v)
        indeg = {u: len(preds[u]) for u in self.nodes}
        ready = [u for u in self.nodes if indeg[u] == 0]
        order = []
        while ready:
            u = ready.pop(0)
            order.append(u)
            for v in succs[u]:
                indeg[v] -= 1
                if indeg[v] == 0:
                    ready.append(v)
        if len(order) != len(self.nodes):
            raise ValidationError("the graph has a cycle")
        object.__setattr__(self, "_preds", preds)
        return tuple(order)

    @property
    def order(self):
        """Nodes in a topological order."""
        return self._order

    def predecessors(self, u):
        return self._preds[u]

    def hidden(self):
        io = set(self.inputs) | set(self.outputs)
        return [u for u in self.nodes if u not in io]

    def __len__(self):
        return len(self.nodes)

    def __eq__(self, other):
        return (isinstance(other, Fnn) and self.nodes == other.nodes
                and self.edges == other.edges and self.biases == other.biases
                and self.inputs == other.inputs and self.outputs == other.outputs)

    def __hash__(self):
        return hash((self.nodes, self.inputs, self.outputs))

    def __repr__(self):
        return (f"Fnn({len(self.nodes)} nodes, {len(self.edges)} edges, "
                f"{len(self.inputs)} in, {len(self.outputs)} out)")

    # -- JSON -----------------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "nodes": list(self.nodes),
            "inputOrder": list(self.inputs),
            "outputOrder": list(self.outputs),
            "biases": {u: format_weight(self.biases[u]) for u in self.nodes if u in self.biases},
            "edges": [{"from": u, "to": v, "weight": format_weight(w)}
                      for (u, v), w in sorted(self.edges.items(), key=self._edge_key)],
        }

    def _edge_key(self, item):
        pos = {u: i for i, u in enumerate(self.nodes)}
        (u, v), _ = item
        return pos[u], pos[v]

    @classmethod
    def from_json(cls, data: Mapping) -> Fnn:
        try:
            edges = {}
            for e in data["edges"]:
                key = (str(e["from"]), str(e["to"]))
                if key in edges:
                    raise ValidationError(f"duplicate edge {key[0]}->{key[1]}")
                edges[key] = e["weight"]
            return cls([str(u) for u in data["nodes"]], edges,
                       {str(k): v for k, v in data.get("biases", {}).items()},
                       [str(u) for u in data.get("inputOrder", data.get("inputs"))],
                       [str(u) for u in data.get("outputOrder", data.get("outputs"))])
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed network JSON: {exc}") from None

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)

    @classmethod
    def loads(cls, text: str) -> Fnn:
        return cls.from_json(json.loads(text))


def node_values(net: Fnn, x: Sequence) -> dict:
    """Value computed at every node for input vector ``x``."""
    if len(x) != len(net.inputs):
        raise DimensionMismatch(f"expected {len(net.inputs)} input value(s), got {len(x)}")
    val = {u: _rational(v, "input") for u, v in zip(net.inputs, x)}
    outputs = set(net.outputs)
    for u in net.order:
        if u in val:
            continue
        z = net.biases[u]
        for v, w in net.predecessors(u):
            z += w * val[v]
        val[u] = z if u in outputs else max(z, Fraction(0))
    return val


def forward(net: Fnn, x: Sequence) -> tuple:
    """Exact output vector of ``net`` on input ``x``."""
    val = node_values(net, x)
    return tuple(val[u] for u in net.outputs)


def node_depth(net: Fnn) -> dict:
    """Length of the longest path from an input to each node."""
    depth = {}
    for u in net.order:
        preds = net.predecessors(u)
        depth[u] = 1 + max(depth[v] for v, _ in preds) if preds else 0
    return depth


def _chain(order):
    return {(order[i], order[j]) for i in range(len(order)) for j in range(i, len(order))}


def to_weighted_structure(net: Fnn, val: Sequence | None = None) -> WeightedStructure:
    """Encode ``net`` over the vocabulary E, In, Out, b, w (and val when given)."""
    vocab = FNN_VOCAB if val is not None else FNN_VOCAB.without(["val"])
    rels = {"E": set(net.edges), "In": _chain(net.inputs), "Out": _chain(net.outputs)}
    weights = {"b": {(u,): b for u, b in net.biases.items()},
               "w": {e: w for e, w in net.edges.items()}}
    if val is not None:
        if len(val) != len(net.inputs):
            raise DimensionMismatch(f"expected {len(net.inputs)} input value(s), got {len(val)}")
        weights["val"] = {(u,): _rational(v, "input") for u, v in zip(net.inputs, val)}
    return WeightedStructure(net.nodes, vocab, rels, weights)
