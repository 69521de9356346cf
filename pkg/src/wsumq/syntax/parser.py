"""Recursive-descent parser for the ``.wsq`` surface syntax.

Whether an identifier denotes a variable or a symbol is decided by looking it
up in the vocabulary in scope, so symbols must be declared (``rel R/2;``,
``fun F/1;``) or passed in before use. Comparisons and ``relu`` are
desugared while parsing.
"""
from __future__ import annotations

import re
from fractions import Fraction
from typing import Mapping, NamedTuple

from ..core import BOT, FUN, REL, Symbol, Vocabulary
from ..errors import ParseError, ValidationError
from . import ast as A

KEYWORDS = {
    "if", "then", "else", "sum", "avg", "uniq", "ifp", "at", "relu", "bot",
    "true", "false", "exists", "forall", "rel", "fun", "answer",
}

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*)
  | (?P<rat>\d+/\d+)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*'*)
  | (?P<op>---|<->|<-|->|<=|>=|!=|[<>=&|!(),;:+\-*/])
""", re.VERBOSE)

COMPARE_OPS = {"<=", ">=", "<", ">", "=", "!="}
TERM_OPS = {"+", "-", "*", "/"}


class Token(NamedTuple):
    kind: str  # ident, keyword, int, rat, op, eof
    text: str
    line: int
    col: int


def tokenize(text: str) -> list:
    tokens = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        s = m.group()
        if kind != "ws":
            if kind == "ident" and s in KEYWORDS:
                kind = "keyword"
            tokens.append(Token(kind, s, line, pos - line_start + 1))
        nl = s.count("\n")
        if nl:
            line += nl
            line_start = pos + s.rfind("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


class Parser:
    def __init__(self, text: str, vocab: Mapping | None = None):
        self.toks = tokenize(text)
        self.i = 0
        self.scope = [dict(vocab or {})]

    # -- token helpers ------------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k=1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text) -> bool:
        t = self.tok
        return t.kind in ("op", "keyword") and t.text == text

    def error(self, message, expected=()):
        t = self.tok
        found = t.text if t.kind != "eof" else "end of input"
        raise ParseError(f"{message}, found {found!r}", t.line, t.col, expected)

    def expect(self, text) -> Token:
        if not self.at(text):
            self.error(f"expected {text!r}", (repr(text),))
        t = self.tok
        self.i += 1
        return t

    def accept(self, text) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def ident(self, what="identifier") -> str:
        t = self.tok
        if t.kind != "ident":
            self.error(f"expected {what}", (what,))
        self.i += 1
        return t.text

    def lookup(self, name):
        for frame in reversed(self.scope):
            if name in frame:
                return Symbol(*frame[name])
        return None

    def variable(self) -> str:
        t = self.tok
        name = self.ident("variable")
        if self.lookup(name) is not None:
            raise ParseError(f"{name!r} is a symbol, expected a variable", t.line, t.col,
                             ("variable",))
        return name

    def var_list(self) -> tuple:
        self.expect("(")
        out = []
        if not self.at(")"):
            out.append(self.variable())
            while self.accept(","):
                out.append(self.variable())
        self.expect(")")
        return tuple(out)

    # -- formulas -------------------------------------------------------------

    def formula(self) -> A.Formula:
        left = self.implication()
        while self.at("<->"):
            self.i += 1
            right = self.implication()
            left = A.BoolOp(A.AND, A.BoolOp(A.IMPLIES, left, right),
                            A.BoolOp(A.IMPLIES, right, left))
        return left

    def implication(self):
        left = self.disjunction()
        if self.accept("->"):
            right = self.implication()
            return A.BoolOp(A.IMPLIES, left, right)
        return left

    def disjunction(self):
        left = self.conjunction()
        while self.accept("|"):
            left = A.BoolOp(A.OR, left, self.conjunction())
        return left

    def conjunction(self):
        left = self.unary()
        while self.accept("&"):
            left = A.BoolOp(A.AND, left, self.unary())
        return left

    def unary(self) -> A.Formula:
        if self.accept("!"):
            return A.Not(self.unary())
        if self.at("exists") or self.at("forall"):
            kind = A.EXISTS if self.tok.text == "exists" else A.FORALL
            self.i += 1
            names = [self.variable()]
            while self.accept(","):
                names.append(self.variable())
            body = self.unary()
            for v in reversed(names):
                body = A.Quant(kind, v, body)
            return body
        return self.atom()

    def atom(self) -> A.Formula:
        t = self.tok
        if self.at("("):
            start = self.i
            try:
                self.i += 1
                f = self.formula()
                self.expect(")")
                nxt = self.tok
                if nxt.kind == "op" and (nxt.text in COMPARE_OPS or nxt.text in TERM_OPS):
                    raise ParseError("parenthesised term", nxt.line, nxt.col)
                return f
            except ParseError:
                self.i = start
                return self.comparison()
        if self.accept("true"):
            return A.TRUE
        if self.accept("false"):
            return A.FALSE
        if t.kind == "ident":
            sym = self.lookup(t.text)
            if sym is not None and sym.kind == REL:
                self.i += 1
                args = self.var_list() if self.at("(") else ()
                return A.RelAtom(t.text, args)
            if sym is None:
                nxt = self.peek()
                if nxt.kind == "op" and nxt.text in ("=", "!="):
                    self.i += 1
                    self.i += 1
                    right = self.variable()
                    eq = A.VarEq(t.text, right)
                    return eq if nxt.text == "=" else A.Not(eq)
                raise ParseError(f"unknown symbol or misplaced variable {t.text!r}",
                                 t.line, t.col, ("relation", "comparison"))
        return self.comparison()

    def comparison(self) -> A.Formula:
        left = self.term()
        t = self.tok
        if not (t.kind == "op" and t.text in COMPARE_OPS):
            self.error("expected comparison", tuple(sorted(COMPARE_OPS)))
        self.i += 1
        right = self.term()
        op = t.text
        if op == "<=":
            return A.Leq(left, right)
        if op == ">=":
            return A.Leq(right, left)
        if op == "<":
            return A.Not(A.Leq(right, left))
        if op == ">":
            return A.Not(A.Leq(left, right))
        if op == "=":
            return A.term_eq(left, right)
        return A.term_neq(left, right)

    # -- terms ----------------------------------------------------------------

    def term(self) -> A.Term:
        left = self.product()
        while self.at("+") or self.at("-"):
            op = A.ADD if self.tok.text == "+" else A.SUB
            self.i += 1
            left = A.Arith(op, left, self.product())
        return left

    def product(self):
        left = self.primary()
        while self.at("*") or self.at("/"):
            op = A.MUL if self.tok.text == "*" else A.DIV
            self.i += 1
            left = A.Arith(op, left, self.primary())
        return left

    def number(self, negative=False) -> A.Term:
        t = self.tok
        self.i += 1
        sign = -1 if negative else 1
        if t.kind == "int":
            return A.Const(Fraction(sign * int(t.text)))
        p, q = t.text.split("/")
        if int(q) == 0:
            return A.Arith(A.DIV, A.Const(Fraction(sign * int(p))), A.Const(Fraction(0)))
        return A.Const(Fraction(sign * int(p), int(q)))

    def primary(self) -> A.Term:
        t = self.tok
        if t.kind in ("int", "rat"):
            return self.number()
        if self.at("-"):
            if self.peek().kind in ("int", "rat"):
                self.i += 1
                return self.number(negative=True)
            self.i += 1
            return A.Arith(A.SUB, A.Const(Fraction(0)), self.primary())
        if self.accept("bot"):
            return A.Const(BOT)
        if self.accept("("):
            e = self.term()
            self.expect(")")
            return e
        if self.accept("if"):
            cond = self.formula()
            self.expect("then")
            then = self.term()
            self.expect("else")
            other = self.term()
            return A.Ite(cond, then, other)
        if self.at("sum") or self.at("avg") or self.at("uniq"):
            cls = {"sum": A.Sum, "avg": A.Avg, "uniq": A.Uniq}[t.text]
            self.i += 1
            names = self.var_list()
            self.expect(":")
            guard = self.unary()
            body = self.term()
            return cls(names, guard, body)
        if self.accept("relu"):
            self.expect("(")
            inner = self.term()
            self.expect(")")
            return A.relu(inner)
        if self.accept("ifp"):
            name = self.ident("function symbol")
            if self.lookup(name) is not None:
                raise ParseError(f"ifp binds {name!r}, which is already a symbol",
                                 t.line, t.col)
            params = self.var_list() if self.at("(") else ()
            self.expect("<-")
            self.scope.append({name: Symbol(FUN, len(params))})
            try:
                body = self.term()
            finally:
                self.scope.pop()
            self.expect("at")
            args = self.var_list() if self.at("(") else ()
            return A.Ifp(name, params, body, args)
        if t.kind == "ident":
            sym = self.lookup(t.text)
            if sym is None:
                self.error(f"unknown weight function {t.text!r}", ("weight term",))
            if sym.kind != FUN:
                self.error(f"{t.text!r} is a relation, expected a weight term",
                           ("weight term",))
            self.i += 1
            args = self.var_list() if self.at("(") else ()
            return A.FunApp(t.text, args)
        self.error("expected a weight term", ("number", "bot", "(", "if", "sum", "avg",
                                              "uniq", "ifp", "relu", "function"))

    def expression(self):
        """A formula or a term, whichever parses to the end of the input."""
        start = self.i
        try:
            e = self.formula()
            if self.tok.kind == "eof":
                return e
            self.error("unexpected trailing input")
        except ParseError as first:
            self.i = start
            try:
                e = self.term()
            except ParseError:
                raise first from None
            if self.tok.kind != "eof":
                raise first
            return e

    # -- declarations and programs --------------------------------------------

    def declarations(self) -> dict:
        """Collect and remove every ``rel NAME/INT;`` / ``fun NAME/INT;`` statement."""
        decls = {}
        toks = self.toks
        keep = []
        i = 0
        while i < len(toks):
            t = toks[i]
            starts_stmt = i == 0 or (toks[i - 1].kind == "op" and toks[i - 1].text in (";", "---"))
            if t.kind == "keyword" and t.text in ("rel", "fun") and starts_stmt:
                self.i = i + 1
                name = self.ident("symbol name")
                self.expect("/")
                ar_tok = self.tok
                if ar_tok.kind != "int":
                    self.error("expected arity", ("integer",))
                self.i += 1
                self.expect(";")
                sym = Symbol(REL if t.text == "rel" else FUN, int(ar_tok.text))
                if name in decls and decls[name] != sym:
                    raise ParseError(f"conflicting declarations of {name}", t.line, t.col)
                decls[name] = sym
                i = self.i
                continue
            keep.append(t)
            i += 1
        self.toks = keep
        self.i = 0
        return decls

    def program_body(self):
        strata = [[]]
        answer = None
        while self.tok.kind != "eof":
            if self.accept("---"):
                strata.append([])
                continue
            if self.accept("answer"):
                answer = self.ident("answer symbol")
                self.expect(";")
                continue
            strata[-1].append(self.rule())
        return [s for s in strata if s], answer

    def rule(self) -> A.Rule:
        t = self.tok
        head = self.ident("rule head")
        sym = self.lookup(head)
        if sym is None:
            raise ParseError(f"rule head {head!r} is not declared", t.line, t.col,
                             ("declared symbol",))
        vars = self.var_list() if self.at("(") else ()
        self.expect("<-")
        body = self.formula() if sym.kind == REL else self.term()
        self.expect(";")
        return A.Rule(head, vars, body)


def _merge_vocab(decls: Mapping, vocab: Mapping | None) -> Vocabulary:
    base = Vocabulary(vocab or {})
    try:
        return base.union(decls)
    except ValidationError as exc:
        raise ValidationError(f"declaration clashes with input vocabulary: {exc}") from None


def parse_program(text: str, input_vocab: Mapping | None = None) -> A.Program:
    """Parse and validate a program.

    Declared symbols without a rule, together with ``input_vocab``, form the
    input vocabulary.
    """
    p = Parser(text)
    decls = p.declarations()
    full = _merge_vocab(decls, input_vocab)
    p.scope = [dict(full)]
    strata_rules, answer = p.program_body()
    heads = {r.head for rules in strata_rules for r in rules}
    inputs = Vocabulary({n: s for n, s in full.items() if n not in heads})
    return A.make_program(strata_rules, inputs, full, answer)


def parse_expression(text: str, vocab: Mapping | None = None):
    """Parse a standalone formula or term (optionally preceded by declarations)."""
    p = Parser(text)
    decls = p.declarations()
    full = _merge_vocab(decls, vocab)
    p.scope = [dict(full)]
    e = p.expression()
    A.check_expression(e, full, allow_ifp=True)
    return e


def parse_formula(text: str, vocab: Mapping | None = None) -> A.Formula:
    p = Parser(text, vocab)
    f = p.formula()
    if p.tok.kind != "eof":
        p.error("unexpected trailing input")
    A.check_expression(f, Vocabulary(vocab or {}))
    return f


def parse_term(text: str, vocab: Mapping | None = None) -> A.Term:
    p = Parser(text, vocab)
    t = p.term()
    if p.tok.kind != "eof":
        p.error("unexpected trailing input")
    A.check_expression(t, Vocabulary(vocab or {}))
    return t
