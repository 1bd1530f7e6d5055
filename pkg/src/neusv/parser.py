"""Recursive-descent parser for the temporal-logic specification grammar.

Binding strength, tightest first::

    NOT ALWAYS EVENTUALLY NEXT     (prefix)
    UNTIL                          (left-assoc)
    AND                            (left-assoc)
    OR                             (left-assoc)
    IMPLIES                        (right-assoc)

Atoms are double-quoted phrases or runs of bare words.  Both are normalized
with :func:`neusv.formula.normalize_id` before resolution.  See
``docs/grammar.md`` for the full EBNF.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import EmptyFormulaError, FormulaSyntaxError, PropositionError, UnknownAtomError
from .formula import (
    FALSE, TRUE, Always, And, Atom, Eventually, Formula, Implies, Next, Not, Or,
    PropositionSet, Until, normalize_id,
)

KEYWORDS = {
    "AND": "AND", "OR": "OR", "NOT": "NOT", "UNTIL": "UNTIL",
    "ALWAYS": "ALWAYS", "EVENTUALLY": "EVENTUALLY", "NEXT": "NEXT",
    "IMPLIES": "IMPLIES", "TRUE": "TRUE", "FALSE": "FALSE",
    "U": "UNTIL", "G": "ALWAYS", "F": "EVENTUALLY", "X": "NEXT",
}

SYMBOLS = [
    ("->", "IMPLIES"), ("=>", "IMPLIES"), ("&&", "AND"), ("||", "OR"),
    ("&", "AND"), ("|", "OR"), ("!", "NOT"), ("~", "NOT"),
    ("∧", "AND"), ("∨", "OR"), ("¬", "NOT"), ("⇒", "IMPLIES"), ("→", "IMPLIES"),
    ("□", "ALWAYS"), ("◇", "EVENTUALLY"), ("♢", "EVENTUALLY"), ("⋄", "EVENTUALLY"),
    ("(", "LPAREN"), (")", "RPAREN"),
]

UNARY = {"NOT": Not, "ALWAYS": Always, "EVENTUALLY": Eventually, "NEXT": Next}

_WORD = re.compile(r"[A-Za-z0-9_']+(?:[-.,](?!>)[A-Za-z0-9_']+)*")
_SPACE = re.compile(r"\s+")


@dataclass
class Token:
    kind: str        # operator name, LPAREN, RPAREN, ATOM, EOF
    value: str
    offset: int


def _position(text: str, offset: int) -> tuple[int, int]:
    line = text.count("\n", 0, offset) + 1
    col = offset - (text.rfind("\n", 0, offset) + 1) + 1
    return line, col


def _error(text, offset, message):
    line, col = _position(text, offset)
    return FormulaSyntaxError(message, text, line, col)


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    i, n = 0, len(text)
    words: list[str] = []
    word_start = 0

    def flush():
        if words:
            tokens.append(Token("ATOM", " ".join(words), word_start))
            words.clear()

    while i < n:
        m = _SPACE.match(text, i)
        if m:
            i = m.end()
            continue
        ch = text[i]
        if ch == '"':
            flush()
            j, buf = i + 1, []
            while j < n and text[j] != '"':
                if text[j] == "\\" and j + 1 < n:
                    j += 1
                buf.append(text[j])
                j += 1
            if j >= n:
                raise _error(text, i, "unterminated quoted proposition")
            tokens.append(Token("ATOM", "".join(buf), i))
            i = j + 1
            continue
        for sym, kind in SYMBOLS:
            if text.startswith(sym, i):
                flush()
                tokens.append(Token(kind, sym, i))
                i += len(sym)
                break
        else:
            m = _WORD.match(text, i)
            if not m:
                raise _error(text, i, f"unexpected character {ch!r}")
            word = m.group()
            if word in KEYWORDS:
                flush()
                tokens.append(Token(KEYWORDS[word], word, i))
            else:
                if not words:
                    word_start = i
                words.append(word)
            i = m.end()
    flush()
    tokens.append(Token("EOF", "", n))
    return tokens


class _Parser:
    def __init__(self, text, props):
        self.text = text
        self.props = props
        self.tokens = tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind):
        tok = self.take()
        if tok.kind != kind:
            found = "end of input" if tok.kind == "EOF" else repr(tok.value)
            raise _error(self.text, tok.offset, f"expected {kind}, found {found}")
        return tok

    def parse(self):
        phi = self.implies()
        tok = self.peek()
        if tok.kind != "EOF":
            raise _error(self.text, tok.offset, f"unexpected {tok.value!r}")
        return phi

    def implies(self):
        left = self.disjunction()
        if self.peek().kind == "IMPLIES":
            self.take()
            return Implies(left, self.implies())
        return left

    def disjunction(self):
        left = self.conjunction()
        while self.peek().kind == "OR":
            self.take()
            left = Or(left, self.conjunction())
        return left

    def conjunction(self):
        left = self.until()
        while self.peek().kind == "AND":
            self.take()
            left = And(left, self.until())
        return left

    def until(self):
        left = self.unary()
        while self.peek().kind == "UNTIL":
            self.take()
            left = Until(left, self.unary())
        return left

    def unary(self):
        tok = self.peek()
        if tok.kind in UNARY:
            self.take()
            return UNARY[tok.kind](self.unary())
        return self.primary()

    def primary(self):
        tok = self.take()
        if tok.kind == "ATOM":
            return self.atom(tok)
        if tok.kind == "TRUE":
            return TRUE
        if tok.kind == "FALSE":
            return FALSE
        if tok.kind == "LPAREN":
            inner = self.implies()
            self.expect("RPAREN")
            return inner
        found = "end of input" if tok.kind == "EOF" else repr(tok.value)
        raise _error(self.text, tok.offset, f"expected a proposition or '(', found {found}")

    def atom(self, tok):
        try:
            ident = normalize_id(tok.value)
        except PropositionError:
            raise _error(self.text, tok.offset, f"empty proposition {tok.value!r}") from None
        if self.props is not None and len(self.props) and ident not in self.props:
            raise UnknownAtomError(tok.value, self.props.ids)
        return Atom(ident)


def parse_formula(text: str, props: PropositionSet | None = None) -> Formula:
    """Parse ``text`` into a formula.

    When ``props`` is non-empty every atom must normalize to one of its ids;
    otherwise atoms are accepted as they come (use
    :func:`~neusv.formula.collect_atoms` to recover them).
    """
    if text is None or not text.strip():
        raise EmptyFormulaError()
    return _Parser(text, props).parse()
