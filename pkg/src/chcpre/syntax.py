"""Tokenizer and expression parser shared by clause files and formula strings."""
from __future__ import annotations

import re
from dataclasses import dataclass

from .linarith import Conjunction, DnfFormula, LinTerm, constraint

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>%[^\n]*)
  | (?P<op>:-|=<|>=|<=|==|\\/|[=<>+\-*(),.;])
  | (?P<num>\d+)
  | (?P<var>[A-Z_][A-Za-z0-9_]*)
  | (?P<ident>[a-z][A-Za-z0-9_]*)
    """,
    re.VERBOSE,
)

RELOPS = ("=<", ">=", "<=", "<", ">", "=", "==")


class ParseError(ValueError):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {msg}")
        self.msg = msg
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    out = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        tok = m.group()
        if kind not in ("ws", "comment"):
            out.append(Token(kind, tok, line, pos - line_start + 1))
        nl = tok.count("\n")
        if nl:
            line += nl
            line_start = pos + tok.rindex("\n") + 1
        pos = m.end()
    out.append(Token("eof", "", line, pos - line_start + 1))
    return out


class TokenStream:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.i = 0

    @property
    def peek(self) -> Token:
        return self.tokens[self.i]

    def peek_at(self, k: int) -> Token:
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def next(self) -> Token:
        t = self.tokens[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def accept(self, text: str) -> bool:
        if self.peek.text == text and self.peek.kind == "op":
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        t = self.peek
        if t.text != text or t.kind != "op":
            raise self.error(f"expected {text!r}, found {t.text or 'end of input'!r}")
        return self.next()

    def error(self, msg: str, tok: Token | None = None) -> ParseError:
        tok = tok or self.peek
        return ParseError(msg, tok.line, tok.col)


def parse_expr(ts: TokenStream) -> LinTerm:
    t = _parse_product(ts)
    while ts.peek.kind == "op" and ts.peek.text in ("+", "-"):
        op = ts.next().text
        rhs = _parse_product(ts)
        t = t + rhs if op == "+" else t - rhs
    return t


def _parse_product(ts: TokenStream) -> LinTerm:
    t = _parse_factor(ts)
    while ts.peek.kind == "op" and ts.peek.text == "*":
        star = ts.next()
        rhs = _parse_factor(ts)
        if t.is_constant():
            t = rhs.scale(t.constant)
        elif rhs.is_constant():
            t = t.scale(rhs.constant)
        else:
            raise ts.error("non-linear term (variable * variable)", star)
    return t


def _parse_factor(ts: TokenStream) -> LinTerm:
    tok = ts.peek
    if tok.kind == "num":
        ts.next()
        return LinTerm.const(int(tok.text))
    if tok.kind == "var":
        ts.next()
        return LinTerm.var(tok.text)
    if ts.accept("-"):
        return -_parse_factor(ts)
    if ts.accept("("):
        t = parse_expr(ts)
        ts.expect(")")
        return t
    raise ts.error(f"unexpected {tok.text or 'end of input'!r} in arithmetic expression")


def parse_comparison(ts: TokenStream) -> list:
    lhs = parse_expr(ts)
    op = ts.peek
    if op.kind != "op" or op.text not in RELOPS:
        raise ts.error(f"unknown operator {op.text or 'end of input'!r}")
    ts.next()
    rhs = parse_expr(ts)
    return constraint(lhs, op.text, rhs)


def parse_conjunction_text(ts: TokenStream) -> Conjunction:
    if ts.peek.kind == "ident" and ts.peek.text in ("true", "false"):
        return Conjunction.of([]) if ts.next().text == "true" else Conjunction.of([False])
    atoms = []
    while True:
        if ts.peek.kind == "ident" and ts.peek.text in ("true", "false"):
            if ts.next().text == "false":
                atoms.append(False)
        else:
            atoms.extend(parse_comparison(ts))
        if not ts.accept(","):
            break
    return Conjunction.of(atoms)


def parse_formula(text: str) -> DnfFormula:
    """Parse ``c1, c2 ; (c3) ; ...`` into a DNF; ``true`` and ``false`` allowed."""
    ts = TokenStream(tokenize(text))
    disjuncts = []
    while True:
        if ts.peek.text == "(" and _paren_wraps_conjunction(ts):
            ts.expect("(")
            disjuncts.append(parse_conjunction_text(ts))
            ts.expect(")")
        else:
            disjuncts.append(parse_conjunction_text(ts))
        if not (ts.accept(";") or ts.accept("\\/")):
            break
    if ts.peek.kind != "eof":
        raise ts.error(f"unexpected {ts.peek.text!r}")
    return DnfFormula.of(disjuncts)


def _paren_wraps_conjunction(ts: TokenStream) -> bool:
    """Does the '(' at the cursor enclose a conjunction rather than a term?"""
    depth = 0
    k = 0
    while True:
        t = ts.peek_at(k)
        if t.kind == "eof":
            return False
        if t.text == "(":
            depth += 1
        elif t.text == ")":
            depth -= 1
            if depth == 0:
                return False
        elif depth == 1 and t.kind in ("op", "ident") and (t.text in RELOPS or t.text in ("true", "false")):
            return True
        k += 1
