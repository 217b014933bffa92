"""Recursive-descent parser for the constraint regex syntax.

Grammar (whitespace ignored everywhere):

    alt     := concat ('|' concat)*
    concat  := postfix+
    postfix := atom ('*' | '+' | '?')*
    atom    := LETTER | '.' | '(' alt ')'

The empty string parses to Epsilon, as does the explicit empty group "()".
An empty alternation branch ("A|") is a syntax error rather than an implicit
epsilon: dangling operators should fail loudly in an interactive editor.
"""

from __future__ import annotations

from ..core import ControlAlphabet
from ..errors import AlphabetError, RegexSyntaxError
from .nodes import (
    Alternation,
    Concat,
    Epsilon,
    Literal,
    Node,
    Optional,
    Plus,
    Star,
    Wildcard,
)

_POSTFIX_OPS = {"*": Star, "+": Plus, "?": Optional}


class _Parser:
    def __init__(self, text: str, alphabet: ControlAlphabet):
        self.text = text
        self.alphabet = alphabet
        self.pos = 0

    def peek(self) -> str | None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1
        if self.pos >= len(self.text):
            return None
        return self.text[self.pos]

    def parse(self) -> Node:
        if self.peek() is None:
            return Epsilon()
        node = self.alt()
        ch = self.peek()
        if ch is not None:
            raise RegexSyntaxError(f"unexpected {ch!r}", self.pos)
        return node

    def alt(self) -> Node:
        branches = [self.concat()]
        while self.peek() == "|":
            self.pos += 1
            branches.append(self.concat())
        if len(branches) == 1:
            return branches[0]
        return Alternation(tuple(branches))

    def concat(self) -> Node:
        parts = [self.postfix()]
        while True:
            ch = self.peek()
            if ch is None or ch in "|)":
                break
            parts.append(self.postfix())
        if len(parts) == 1:
            return parts[0]
        return Concat(tuple(parts))

    def postfix(self) -> Node:
        node = self.atom()
        while self.peek() in _POSTFIX_OPS:
            node = _POSTFIX_OPS[self.text[self.pos]](node)
            self.pos += 1
        return node

    def atom(self) -> Node:
        ch = self.peek()
        if ch is None:
            raise RegexSyntaxError("unexpected end of pattern", self.pos)
        if ch == "(":
            open_pos = self.pos
            self.pos += 1
            if self.peek() == ")":
                self.pos += 1
                return Epsilon()
            node = self.alt()
            if self.peek() != ")":
                raise RegexSyntaxError("unbalanced parenthesis", open_pos)
            self.pos += 1
            return node
        if ch == ".":
            self.pos += 1
            return Wildcard()
        if "A" <= ch <= "Z":
            state = ord(ch) - ord("A")
            if state >= self.alphabet.size:
                raise AlphabetError(
                    f"letter {ch!r} outside alphabet of size {self.alphabet.size}",
                    self.pos,
                )
            self.pos += 1
            return Literal(state)
        if ch in _POSTFIX_OPS:
            raise RegexSyntaxError(f"dangling operator {ch!r}", self.pos)
        if ch in "|)":
            raise RegexSyntaxError("empty branch", self.pos)
        raise RegexSyntaxError(f"unexpected character {ch!r}", self.pos)


def parse_regex(text: str, alphabet: ControlAlphabet) -> Node:
    return _Parser(text, alphabet).parse()
