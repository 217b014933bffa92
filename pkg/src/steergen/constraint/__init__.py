"""Constraint-graph formalism: regex parsing, DFA compilation, merging,
and the editable node-link view."""

from .dfa import (
    REJECT,
    ConstraintDfa,
    accepts,
    allowed,
    compile_ast,
    dfa_equivalent,
    dfa_from_json,
    dfa_to_json,
    minimize_dfa,
    step,
)
from .graph import GraphView, from_graph, to_graph
from .merge import merge_examples
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
    ast_to_json,
    literal_concat,
    render_regex,
    validate_ast,
)
from .parser import parse_regex

__all__ = [
    "REJECT",
    "ConstraintDfa",
    "GraphView",
    "Node",
    "Epsilon",
    "Literal",
    "Wildcard",
    "Concat",
    "Alternation",
    "Star",
    "Plus",
    "Optional",
    "parse_regex",
    "render_regex",
    "ast_to_json",
    "literal_concat",
    "validate_ast",
    "compile_ast",
    "minimize_dfa",
    "accepts",
    "allowed",
    "step",
    "dfa_equivalent",
    "dfa_to_json",
    "dfa_from_json",
    "merge_examples",
    "to_graph",
    "from_graph",
]
