"""Constraint AST over control states, plus the textual rendering.

The tree shapes are deliberately small: literals, wildcard, concatenation,
alternation, and the three postfix operators. Counted repetition and word
level constraints are out of scope.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..core import ControlAlphabet
from ..errors import DomainError


class Node:
    """Marker base for AST nodes."""

    __slots__ = ()


@dataclass(frozen=True)
class Epsilon(Node):
    pass


@dataclass(frozen=True)
class Literal(Node):
    state: int

    def __post_init__(self):
        if not 0 <= self.state < 26:
            raise DomainError(f"literal state {self.state} outside A..Z")


@dataclass(frozen=True)
class Wildcard(Node):
    pass


@dataclass(frozen=True)
class Concat(Node):
    children: tuple[Node, ...]

    def __post_init__(self):
        if not self.children:
            raise DomainError("Concat requires at least one child")
        object.__setattr__(self, "children", tuple(self.children))


@dataclass(frozen=True)
class Alternation(Node):
    children: tuple[Node, ...]

    def __post_init__(self):
        if not self.children:
            raise DomainError("Alternation requires at least one child")
        object.__setattr__(self, "children", tuple(self.children))


@dataclass(frozen=True)
class Star(Node):
    child: Node


@dataclass(frozen=True)
class Plus(Node):
    child: Node


@dataclass(frozen=True)
class Optional(Node):
    child: Node


def validate_ast(node: Node, alphabet: ControlAlphabet) -> Node:
    """Check every literal references a state below K."""
    for lit in iter_literals(node):
        if lit.state >= alphabet.size:
            raise DomainError(
                f"literal {chr(ord('A') + lit.state)} outside alphabet of size"
                f" {alphabet.size}"
            )
    return node


def iter_literals(node: Node):
    if isinstance(node, Literal):
        yield node
    elif isinstance(node, (Concat, Alternation)):
        for c in node.children:
            yield from iter_literals(c)
    elif isinstance(node, (Star, Plus, Optional)):
        yield from iter_literals(node.child)


# Precedence levels for rendering: alternation < concat < postfix < atom.
_ALT, _CONCAT, _POSTFIX, _ATOM = 0, 1, 2, 3


def _level(node: Node) -> int:
    if isinstance(node, Alternation):
        return _ALT
    if isinstance(node, Concat):
        return _CONCAT
    if isinstance(node, (Star, Plus, Optional)):
        return _POSTFIX
    return _ATOM


def render_regex(node: Node) -> str:
    """Render with minimal parenthesization; inverse of the parser up to
    language equality."""
    return _render(node, _ALT)


def _render(node: Node, required: int) -> str:
    level = _level(node)
    if isinstance(node, Epsilon):
        # A bare empty constraint renders as ""; nested, it needs the
        # explicit empty group to survive re-parsing.
        return "()" if required > _ALT else ""
    if isinstance(node, Literal):
        text = chr(ord("A") + node.state)
    elif isinstance(node, Wildcard):
        text = "."
    elif isinstance(node, Star):
        text = _render(node.child, _POSTFIX) + "*"
    elif isinstance(node, Plus):
        text = _render(node.child, _POSTFIX) + "+"
    elif isinstance(node, Optional):
        text = _render(node.child, _POSTFIX) + "?"
    elif isinstance(node, Concat):
        text = "".join(_render(c, _CONCAT) for c in node.children)
    elif isinstance(node, Alternation):
        text = "|".join(_render(c, _CONCAT) for c in node.children)
    else:
        raise DomainError(f"unknown AST node {node!r}")
    if level < required:
        return "(" + text + ")"
    return text


def literal_concat(states) -> Node:
    """The AST accepting exactly one given sequence."""
    states = tuple(states)
    if not states:
        return Epsilon()
    if len(states) == 1:
        return Literal(states[0])
    return Concat(tuple(Literal(s) for s in states))


def ast_to_json(node: Node) -> dict:
    """Nested JSON form of a constraint AST."""
    if isinstance(node, Epsilon):
        return {"kind": "epsilon"}
    if isinstance(node, Literal):
        return {"kind": "state", "state": node.state,
                "letter": chr(ord("A") + node.state)}
    if isinstance(node, Wildcard):
        return {"kind": "any"}
    if isinstance(node, Concat):
        return {"kind": "concat",
                "children": [ast_to_json(c) for c in node.children]}
    if isinstance(node, Alternation):
        return {"kind": "or",
                "children": [ast_to_json(c) for c in node.children]}
    if isinstance(node, Star):
        return {"kind": "star", "child": ast_to_json(node.child)}
    if isinstance(node, Plus):
        return {"kind": "plus", "child": ast_to_json(node.child)}
    if isinstance(node, Optional):
        return {"kind": "optional", "child": ast_to_json(node.child)}
    raise DomainError(f"unknown AST node {node!r}")
