"""Static checks on expressions and programs.

The main check decides membership in the scalar fragment: with ``F`` the
intensional weight functions in play, no product may have two factors that
both mention a symbol of ``F`` and no divisor may mention one. Since every
subexpression must pass the check with the same ``F``, the test is local to
each multiplication, division and averaging node.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

from .syntax import ast as A

MUL_VIOLATION = "mul-of-two-intensional"
DIV_VIOLATION = "div-by-intensional"


@dataclass(frozen=True)
class ScalarReport:
    violations: tuple = field(default_factory=tuple)  # (path, reason) pairs

    @property
    def is_scalar(self) -> bool:
        return not self.violations

    def lines(self):
        return [f"{path}: {reason}" for path, reason in self.violations]


def _named_children(node):
    """Yield ``(label, child)`` for every sub-node, in field order."""
    for f in dataclasses.fields(node):
        v = getattr(node, f.name)
        if isinstance(v, A.Node):
            yield f.name, v


def _mentions(e, F) -> bool:
    return bool(A.ext_symbols(e) & F)


def _offence(node, F):
    if isinstance(node, A.Arith):
        if node.op == A.MUL and _mentions(node.left, F) and _mentions(node.right, F):
            return MUL_VIOLATION
        if node.op == A.DIV and _mentions(node.right, F):
            return DIV_VIOLATION
    elif isinstance(node, (A.Avg, A.Uniq)):
        # the average divides by the number of guard-satisfying tuples
        if _mentions(A.Sum(node.vars, node.guard, A.const(1)), F):
            return DIV_VIOLATION
    return None


def _collect(node, F, path, out) -> bool:
    """Append innermost violations below ``node``; return whether any were found."""
    found = False
    for label, child in _named_children(node):
        found |= _collect(child, F, f"{path}.{label}", out)
    if not found:
        reason = _offence(node, F)
        if reason is not None:
            out.append((path, reason))
            found = True
    return found


def scalar_violations(e, F, root="$"):
    out = []
    _collect(e, frozenset(F), root, out)
    return out


def check_scalar_expression(e) -> ScalarReport:
    """Scalar check with ``F`` the symbols bound by ifp operators in ``e``."""
    _, ints = A.symbol_partition(e)
    return ScalarReport(tuple(scalar_violations(e, ints)))


def check_scalar_stratum(st: A.Stratum, label="") -> ScalarReport:
    F = frozenset(st.intensional.functions())
    out = []
    for r in st.rules:
        out.extend(scalar_violations(r.body, F, f"{label}{r.head}.body"))
    return ScalarReport(tuple(out))


def check_scalar_program(p: A.Program) -> ScalarReport:
    """A program is scalar when each stratum is, relative to its own weight rules."""
    out = []
    for i, st in enumerate(p.strata):
        out.extend(check_scalar_stratum(st, f"stratum[{i}].").violations)
    return ScalarReport(tuple(out))


def check_scalar(e) -> ScalarReport:
    if isinstance(e, A.Program):
        return check_scalar_program(e)
    if isinstance(e, A.Stratum):
        return check_scalar_stratum(e)
    return check_scalar_expression(e)
