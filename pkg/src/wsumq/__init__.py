"""Exact query engine for weighted structures with sum aggregation and fixpoints."""

__version__ = "0.1.0"
