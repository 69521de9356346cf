"""Lifted rationals and weighted structures.

Weights live in Q extended with a single undefined value ``BOT``. Rationals
are :class:`fractions.Fraction`, which keeps them in lowest terms with a
positive denominator and uses Python's unbounded integers.
"""
from __future__ import annotations

import itertools
import json
from fractions import Fraction
from typing import Iterable, Mapping, NamedTuple, Union

from .errors import ValidationError


class _Bot:
    __slots__ = ()
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "BOT"

    def __str__(self):
        return "bot"

    def __reduce__(self):
        return (_Bot, ())


BOT = _Bot()

Weight = Union[Fraction, _Bot]


def is_bot(a) -> bool:
    return a is BOT


def weight_add(a: Weight, b: Weight) -> Weight:
    if a is BOT or b is BOT:
        return BOT
    return a + b


def weight_sub(a: Weight, b: Weight) -> Weight:
    if a is BOT or b is BOT:
        return BOT
    return a - b


def weight_mul(a: Weight, b: Weight) -> Weight:
    if a is BOT or b is BOT:
        return BOT
    return a * b


def weight_div(a: Weight, b: Weight) -> Weight:
    """Exact quotient; BOT when either side is BOT or the divisor is zero."""
    if a is BOT or b is BOT or b == 0:
        return BOT
    return a / b


def weight_leq(a: Weight, b: Weight) -> bool:
    """Extended order in which BOT lies below every rational."""
    if a is BOT:
        return True
    if b is BOT:
        return False
    return a <= b


def weight_eq(a: Weight, b: Weight) -> bool:
    return weight_leq(a, b) and weight_leq(b, a)


def parse_weight(text) -> Weight:
    """Read ``"p/q"``, an integer string, ``"bot"`` or a Python int/Fraction."""
    if text is BOT:
        return BOT
    if isinstance(text, (int, Fraction)) and not isinstance(text, bool):
        return Fraction(text)
    if not isinstance(text, str):
        raise ValidationError(f"not a weight: {text!r}")
    s = text.strip()
    if s == "bot":
        return BOT
    try:
        if "." in s or "e" in s.lower():
            raise ValueError
        return Fraction(s)
    except (ValueError, ZeroDivisionError):
        raise ValidationError(f"not a rational literal: {text!r}") from None


def format_weight(a: Weight) -> str:
    if a is BOT:
        return "bot"
    if a.denominator == 1:
        return str(a.numerator)
    return f"{a.numerator}/{a.denominator}"


def bit_size(a: Weight) -> int:
    """Length of the binary encoding of |p| plus that of q."""
    if a is BOT:
        return 0
    return max(abs(a.numerator).bit_length(), 1) + a.denominator.bit_length()


class Symbol(NamedTuple):
    kind: str  # "rel" or "fun"
    arity: int


REL = "rel"
FUN = "fun"


class Vocabulary(Mapping):
    """Finite map from symbol name to :class:`Symbol`."""

    __slots__ = ("_symbols",)

    def __init__(self, symbols=None):
        items = dict(symbols or {})
        for name, sym in list(items.items()):
            sym = Symbol(*sym)
            if sym.kind not in (REL, FUN):
                raise ValidationError(f"symbol {name}: unknown kind {sym.kind!r}")
            if sym.arity < 0:
                raise ValidationError(f"symbol {name}: negative arity")
            items[name] = sym
        self._symbols = items

    @classmethod
    def of(cls, rels=(), funs=()):
        """``Vocabulary.of(rels={"E": 2}, funs={"w": 2})``."""
        syms = {}
        for name, ar in dict(rels).items():
            syms[name] = Symbol(REL, ar)
        for name, ar in dict(funs).items():
            if name in syms:
                raise ValidationError(f"symbol {name} declared twice")
            syms[name] = Symbol(FUN, ar)
        return cls(syms)

    def __getitem__(self, name):
        return self._symbols[name]

    def __iter__(self):
        return iter(self._symbols)

    def __len__(self):
        return len(self._symbols)

    def __repr__(self):
        inner = ", ".join(f"{k}:{v.kind}/{v.arity}" for k, v in self._symbols.items())
        return f"Vocabulary({inner})"

    def __eq__(self, other):
        if not isinstance(other, Vocabulary):
            return NotImplemented
        return self._symbols == other._symbols

    def __hash__(self):
        return hash(frozenset(self._symbols.items()))

    def relations(self):
        return {n: s.arity for n, s in self._symbols.items() if s.kind == REL}

    def functions(self):
        return {n: s.arity for n, s in self._symbols.items() if s.kind == FUN}

    def is_relation(self, name):
        sym = self._symbols.get(name)
        return sym is not None and sym.kind == REL

    def is_function(self, name):
        sym = self._symbols.get(name)
        return sym is not None and sym.kind == FUN

    def arity(self, name):
        return self._symbols[name].arity

    def union(self, other: Mapping) -> Vocabulary:
        merged = dict(self._symbols)
        for name, sym in other.items():
            sym = Symbol(*sym)
            if name in merged and merged[name] != sym:
                raise ValidationError(
                    f"symbol {name} used as {merged[name].kind}/{merged[name].arity} "
                    f"and {sym.kind}/{sym.arity}")
            merged[name] = sym
        return Vocabulary(merged)

    def restrict(self, names: Iterable[str]) -> Vocabulary:
        keep = set(names)
        return Vocabulary({n: s for n, s in self._symbols.items() if n in keep})

    def without(self, names: Iterable[str]) -> Vocabulary:
        drop = set(names)
        return Vocabulary({n: s for n, s in self._symbols.items() if n not in drop})


class WeightedStructure:
    """Finite universe with relations and total weight functions.

    Weight functions are stored sparsely (BOT entries omitted) but every lookup
    is total: :meth:`weight` returns BOT for any tuple without a stored value.
    Instances are treated as immutable.
    """

    __slots__ = ("universe", "vocabulary", "_rels", "_funs", "_index")

    def __init__(self, universe: Iterable[str], vocabulary: Vocabulary,
                 relations: Mapping | None = None, weights: Mapping | None = None):
        universe = tuple(universe)
        if len(set(universe)) != len(universe):
            raise ValidationError("universe elements must be distinct")
        self.universe = universe
        self.vocabulary = vocabulary
        index = set(universe)
        self._index = index
        relations = dict(relations or {})
        weights = dict(weights or {})
        rels = {}
        funs = {}
        for name, sym in vocabulary.items():
            if sym.kind == REL:
                tuples = frozenset(tuple(t) for t in relations.pop(name, ()))
                for t in tuples:
                    self._check_tuple(name, sym.arity, t)
                rels[name] = tuples
            else:
                table = {}
                for t, v in dict(weights.pop(name, {})).items():
                    t = tuple(t)
                    self._check_tuple(name, sym.arity, t)
                    v = parse_weight(v)
                    if v is not BOT:
                        table[t] = v
                funs[name] = table
        extra = sorted(set(relations) | set(weights))
        if extra:
            raise ValidationError(f"symbols not in vocabulary: {', '.join(extra)}")
        self._rels = rels
        self._funs = funs

    def _check_tuple(self, name, arity, t):
        if len(t) != arity:
            raise ValidationError(f"{name}: tuple {t} does not have arity {arity}")
        for e in t:
            if e not in self._index:
                raise ValidationError(f"{name}: element {e!r} not in universe")

    def relation(self, name) -> frozenset:
        return self._rels[name]

    def weight(self, name, tup) -> Weight:
        if name not in self._funs:
            raise KeyError(name)
        return self._funs[name].get(tuple(tup), BOT)

    def defined_weights(self, name) -> dict:
        """Non-BOT entries of a weight function."""
        return dict(self._funs[name])

    def weight_table(self, name) -> dict:
        """The total table, including BOT entries, in universe order."""
        ar = self.vocabulary.arity(name)
        table = self._funs[name]
        return {t: table.get(t, BOT) for t in itertools.product(self.universe, repeat=ar)}

    def tuples(self, arity):
        return itertools.product(self.universe, repeat=arity)

    def expand(self, vocabulary: Mapping, relations=None, weights=None) -> WeightedStructure:
        """Add new symbols (default: empty relations / BOT everywhere)."""
        vocab = self.vocabulary.union(vocabulary)
        rels = dict(self._rels)
        rels.update(relations or {})
        funs = dict(self._funs)
        funs.update(weights or {})
        return WeightedStructure(self.universe, vocab, rels, funs)

    def restrict(self, names: Iterable[str]) -> WeightedStructure:
        names = set(names)
        vocab = self.vocabulary.restrict(names)
        return WeightedStructure(
            self.universe, vocab,
            {n: r for n, r in self._rels.items() if n in names},
            {n: f for n, f in self._funs.items() if n in names})

    def agrees_on(self, other: WeightedStructure, names: Iterable[str]) -> bool:
        for name in names:
            if self.vocabulary.is_relation(name):
                if self._rels[name] != other._rels[name]:
                    return False
            elif self._funs[name] != other._funs[name]:
                return False
        return True

    def __eq__(self, other):
        if not isinstance(other, WeightedStructure):
            return NotImplemented
        return (self.universe == other.universe and self.vocabulary == other.vocabulary
                and self._rels == other._rels and self._funs == other._funs)

    def __hash__(self):
        return hash((self.universe, self.vocabulary))

    def __repr__(self):
        return f"WeightedStructure(|A|={len(self.universe)}, {self.vocabulary!r})"

    # -- JSON ---------------------------------------------------------------

    def to_json(self) -> dict:
        order = {e: i for i, e in enumerate(self.universe)}

        def key(t):
            return tuple(order[e] for e in t)

        out = {"universe": list(self.universe), "relations": {}, "weights": {}}
        for name, sym in self.vocabulary.items():
            if sym.kind == REL:
                out["relations"][name] = {
                    "arity": sym.arity,
                    "tuples": [list(t) for t in sorted(self._rels[name], key=key)],
                }
            else:
                table = self._funs[name]
                out["weights"][name] = {
                    "arity": sym.arity,
                    "entries": [{"tuple": list(t), "value": format_weight(table[t])}
                                for t in sorted(table, key=key)],
                }
        return out

    @classmethod
    def from_json(cls, data: Mapping) -> WeightedStructure:
        try:
            universe = [str(e) for e in data["universe"]]
            rel_specs = data.get("relations", {}) or {}
            fun_specs = data.get("weights", {}) or {}
            syms = {}
            relations = {}
            weights = {}
            for name, spec in rel_specs.items():
                syms[name] = Symbol(REL, int(spec["arity"]))
                relations[name] = [tuple(str(e) for e in t) for t in spec.get("tuples", [])]
            for name, spec in fun_specs.items():
                if name in syms:
                    raise ValidationError(f"symbol {name} is both relation and weight")
                syms[name] = Symbol(FUN, int(spec["arity"]))
                table = {}
                for entry in spec.get("entries", []):
                    t = tuple(str(e) for e in entry["tuple"])
                    if t in table:
                        raise ValidationError(f"{name}: duplicate entry for {t}")
                    table[t] = parse_weight(entry["value"])
                weights[name] = table
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed structure JSON: {exc}") from None
        return cls(universe, Vocabulary(syms), relations, weights)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)

    @classmethod
    def loads(cls, text: str) -> WeightedStructure:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"invalid JSON: {exc}") from None
        return cls.from_json(data)


def check_assignment(structure: WeightedStructure, assignment: Mapping[str, str]):
    for var, elem in assignment.items():
        if elem not in structure._index:
            raise ValidationError(f"assignment {var}={elem!r}: not a universe element")
