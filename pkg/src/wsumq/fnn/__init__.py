"""Feedforward ReLU networks: evaluation, encoding, reduction and gadgets."""
from .gadgets import (CnfFormula, binary_fraction, gen_3sat_network, gen_split_network,
                      parse_dimacs)
from .network import Fnn, forward, node_depth, node_values, to_weighted_structure
from .reduction import canonical_order, check_p_bounded, poly_value, reduce, split_edges

__all__ = [
    "CnfFormula", "Fnn", "binary_fraction", "canonical_order", "check_p_bounded", "forward",
    "gen_3sat_network", "gen_split_network", "node_depth", "node_values", "parse_dimacs",
    "poly_value", "reduce", "split_edges", "to_weighted_structure",
]


def parallel_paths_network(a: int, reduced: bool = False) -> Fnn:
    """The one-input family with ``a`` parallel unit paths (or its reduction)."""
    if reduced:
        return Fnn(["in", "h", "out"], {("in", "h"): 1, ("h", "out"): a},
                   {"h": 0, "out": 0}, ["in"], ["out"])
    return split_edges(Fnn(["in", "out"], {("in", "out"): a}, {"out": 0}, ["in"], ["out"]))
