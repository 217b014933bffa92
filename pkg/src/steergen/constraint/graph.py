"""Node-link view of a constraint AST for the visual editor.

The view is a DAG between a unique start node and a unique accept node.
Atoms (state-literal, wildcard) sit on chains; an alternation is a fork
or-junction whose branches all reconverge on whatever node follows the
group, so the group's extent is pinned by the reconvergence point itself
and no dedicated join node exists ("A|B" is one junction plus two state
nodes). An empty branch is an edge straight from the fork to the
reconvergence node. Repetition never shows up as a back edge: star/plus
/optional are annotations on the node (atom or fork junction) they apply
to, which keeps the drawing acyclic and editing local.

A repeated group needs at least two outgoing branches to make its extent
recoverable, so a star over a plain chain is drawn as a fork with the
chain branch plus an empty branch (harmless, since X* already accepts the
empty sequence), and a plus over a plain chain is drawn as the chain
followed by its starred copy.

JSON schema: nodes are {"id": int, "kind": "state-literal" | "wildcard" |
"or-junction" | "start" | "accept", "state"?: int, "repeat"?: "star" |
"plus", "optional"?: true}; edges are {"from": id, "to": id}. Branch order
is the order of the fork's outgoing edges in the edge list.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..core import ControlAlphabet
from ..errors import GraphError
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

START = "start"
ACCEPT = "accept"
LITERAL = "state-literal"
WILDCARD = "wildcard"
JUNCTION = "or-junction"


@dataclass
class GraphView:
    nodes: list[dict] = field(default_factory=list)
    edges: list[tuple[int, int]] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "nodes": [dict(n) for n in self.nodes],
            "edges": [{"from": a, "to": b} for a, b in self.edges],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "GraphView":
        try:
            nodes = [dict(n) for n in obj["nodes"]]
            edges = [(int(e["from"]), int(e["to"])) for e in obj["edges"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise GraphError(f"malformed graph JSON: {exc}") from exc
        return cls(nodes, edges)


# ---------------------------------------------------------------------------
# AST -> view
# ---------------------------------------------------------------------------

class _Builder:
    def __init__(self):
        self.view = GraphView()

    def node(self, kind: str, **extra) -> int:
        nid = len(self.view.nodes)
        self.view.nodes.append({"id": nid, "kind": kind, **extra})
        return nid

    def connect(self, prevs: list[int], nid: int):
        for p in prevs:
            self.view.edges.append((p, nid))


def to_graph(ast: Node) -> GraphView:
    b = _Builder()
    start = b.node(START)
    tails = _emit(b, ast, [start])
    accept = b.node(ACCEPT)
    b.connect(tails, accept)
    return b.view


def _emit(b: _Builder, node: Node, prevs: list[int]) -> list[int]:
    """Emit ``node`` after the ``prevs`` frontier; return the new frontier
    (every node the continuation must attach to)."""
    if isinstance(node, (Star, Plus, Optional)):
        annot: dict = {}
        inner = node
        while isinstance(inner, (Star, Plus, Optional)):
            if isinstance(inner, Star):
                annot["repeat"] = "star"
            elif isinstance(inner, Plus):
                annot.setdefault("repeat", "plus")
            else:
                annot["optional"] = True
            inner = inner.child
        return _emit_annotated(b, inner, prevs, annot)

    if isinstance(node, Literal):
        nid = b.node(LITERAL, state=node.state)
        b.connect(prevs, nid)
        return [nid]
    if isinstance(node, Wildcard):
        nid = b.node(WILDCARD)
        b.connect(prevs, nid)
        return [nid]
    if isinstance(node, Epsilon):
        return prevs
    if isinstance(node, Concat):
        cur = prevs
        for child in node.children:
            cur = _emit(b, child, cur)
        return cur
    if isinstance(node, Alternation):
        if len(node.children) == 1:
            return _emit(b, node.children[0], prevs)
        return _emit_fork(b, node.children, prevs, {})
    raise GraphError(f"cannot draw AST node {node!r}")


def _emit_annotated(b: _Builder, inner: Node, prevs: list[int], annot: dict) -> list[int]:
    while isinstance(inner, Alternation) and len(inner.children) == 1:
        inner = inner.children[0]
    if isinstance(inner, (Star, Plus, Optional)):
        # Unwrapping exposed another postfix layer: rebuild and re-collapse.
        wrapped = inner
        if annot.get("repeat") == "star":
            wrapped = Star(wrapped)
        elif annot.get("repeat") == "plus":
            wrapped = Plus(wrapped)
        if annot.get("optional"):
            wrapped = Optional(wrapped)
        return _emit(b, wrapped, prevs)
    if isinstance(inner, Epsilon):
        return prevs
    if isinstance(inner, (Literal, Wildcard)):
        kind = LITERAL if isinstance(inner, Literal) else WILDCARD
        extra = {"state": inner.state} if isinstance(inner, Literal) else {}
        nid = b.node(kind, **extra, **annot)
        b.connect(prevs, nid)
        return [nid]
    if isinstance(inner, Alternation):
        return _emit_fork(b, inner.children, prevs, annot)
    # A repeated/optional plain chain: the fork needs a second branch to pin
    # its extent. An empty branch is language-neutral under ? and *; under +
    # it is not, so X+ is drawn as X followed by X*.
    if annot.get("repeat") == "plus":
        base: Node = Optional(inner) if annot.get("optional") else inner
        tails = _emit(b, base, prevs)
        return _emit(b, Star(base), tails)
    fork = b.node(JUNCTION, **annot)
    b.connect(prevs, fork)
    tails = _emit(b, inner, [fork])
    return tails + [fork]


def _emit_fork(b: _Builder, branches, prevs: list[int], annot: dict) -> list[int]:
    fork = b.node(JUNCTION, **annot)
    b.connect(prevs, fork)
    tails: list[int] = []
    for branch in branches:
        tails.extend(_emit(b, branch, [fork]))
    return tails


# ---------------------------------------------------------------------------
# view -> AST
# ---------------------------------------------------------------------------

def from_graph(view: GraphView, alphabet: ControlAlphabet) -> Node:
    g = _checked(view, alphabet)
    return _parse_chain(g, g.succ_one(g.start), g.accept)


class _Graph:
    def __init__(self, nodes: dict[int, dict], succ: dict[int, list[int]],
                 pred: dict[int, list[int]], start: int, accept: int):
        self.nodes = nodes
        self.succ = succ
        self.pred = pred
        self.start = start
        self.accept = accept

    def kind(self, nid: int) -> str:
        return self.nodes[nid]["kind"]

    def succ_one(self, nid: int) -> int:
        outs = self.succ[nid]
        if len(outs) != 1:
            raise GraphError(
                f"node {nid} must have exactly one outgoing edge, has {len(outs)}"
            )
        return outs[0]


def _checked(view: GraphView, alphabet: ControlAlphabet) -> _Graph:
    nodes: dict[int, dict] = {}
    for n in view.nodes:
        if "id" not in n or "kind" not in n:
            raise GraphError(f"node missing id/kind: {n}")
        if n["id"] in nodes:
            raise GraphError(f"duplicate node id {n['id']}")
        if n["kind"] not in (START, ACCEPT, LITERAL, WILDCARD, JUNCTION):
            raise GraphError(f"unknown node kind {n['kind']!r}")
        if n["kind"] == LITERAL:
            state = n.get("state")
            if not isinstance(state, int) or not 0 <= state < alphabet.size:
                raise GraphError(
                    f"state-literal node {n['id']} needs a state below"
                    f" {alphabet.size}, got {state!r}"
                )
        if n.get("repeat") not in (None, "star", "plus"):
            raise GraphError(f"bad repeat annotation on node {n['id']}")
        nodes[n["id"]] = n

    starts = [i for i, n in nodes.items() if n["kind"] == START]
    accepts = [i for i, n in nodes.items() if n["kind"] == ACCEPT]
    if len(starts) != 1 or len(accepts) != 1:
        raise GraphError("graph needs exactly one start and one accept node")

    succ: dict[int, list[int]] = {i: [] for i in nodes}
    pred: dict[int, list[int]] = {i: [] for i in nodes}
    for a, b in view.edges:
        if a not in nodes or b not in nodes:
            raise GraphError(f"dangling edge ({a}, {b})")
        succ[a].append(b)
        pred[b].append(a)

    g = _Graph(nodes, succ, pred, starts[0], accepts[0])
    if pred[g.start]:
        raise GraphError("start node must have no incoming edges")
    if succ[g.accept]:
        raise GraphError("accept node must have no outgoing edges")
    _reject_cycles(g)
    for i, n in nodes.items():
        if i != g.accept and not succ[i]:
            raise GraphError(f"node {i} is a dead end")
        if n["kind"] in (LITERAL, WILDCARD) and len(succ[i]) != 1:
            raise GraphError(f"atom node {i} must have exactly one outgoing edge")
        if i != g.start and not pred[i]:
            raise GraphError(f"node {i} is unreachable from start")
        if n["kind"] == JUNCTION and len(succ[i]) == 1 and (
            n.get("repeat") or n.get("optional")
        ):
            raise GraphError(
                f"annotated junction {i} needs at least two branches to mark"
                " the extent of the repeated group"
            )
    return g


def _reject_cycles(g: _Graph):
    color: dict[int, int] = {}
    stack = [(g.start, iter(g.succ[g.start]))]
    color[g.start] = 1
    while stack:
        node, it = stack[-1]
        advanced = False
        for t in it:
            c = color.get(t, 0)
            if c == 1:
                raise GraphError("cycle outside a repeat annotation")
            if c == 0:
                color[t] = 1
                stack.append((t, iter(g.succ[t])))
                advanced = True
                break
        if not advanced:
            color[node] = 2
            stack.pop()


def _parse_chain(g: _Graph, cur: int, stop: int) -> Node:
    parts: list[Node] = []
    while cur != stop:
        node = g.nodes[cur]
        kind = node["kind"]
        if kind in (LITERAL, WILDCARD):
            atom: Node = Literal(node["state"]) if kind == LITERAL else Wildcard()
            parts.append(_annotated(atom, node))
            cur = g.succ_one(cur)
        elif kind == JUNCTION:
            join = _join_of(g, cur)
            group = _parse_group(g, cur, join)
            if not isinstance(group, Epsilon):
                parts.append(group)
            cur = join
        else:
            raise GraphError(f"unexpected {kind} node {cur} inside a chain")
    if not parts:
        return Epsilon()
    if len(parts) == 1:
        return parts[0]
    return Concat(tuple(parts))


def _parse_group(g: _Graph, fork: int, join: int) -> Node:
    branches: list[Node] = []
    for head in g.succ[fork]:
        if head == join:
            branches.append(Epsilon())
        else:
            branches.append(_parse_chain(g, head, join))
    has_eps = any(isinstance(br, Epsilon) for br in branches)
    solid = [br for br in branches if not isinstance(br, Epsilon)]
    if not solid:
        inner: Node = Epsilon()
    elif len(solid) == 1:
        inner = solid[0]
    else:
        inner = Alternation(tuple(solid))
    if has_eps and solid:
        inner = Optional(inner)
    return _annotated(inner, g.nodes[fork])


def _annotated(inner: Node, node: dict) -> Node:
    if isinstance(inner, Epsilon):
        return inner
    repeat = node.get("repeat")
    if repeat == "star":
        inner = Star(inner)
    elif repeat == "plus":
        inner = Plus(inner)
    if node.get("optional") and not isinstance(inner, Star):
        inner = Optional(inner)
    return inner


def _join_of(g: _Graph, fork: int) -> int:
    """Reconvergence point of a fork: the nearest node every path from the
    fork to accept passes through."""
    doms = [n for n in g.nodes if n != fork and _postdominates(g, fork, n)]
    if not doms:
        raise GraphError(f"branches of fork junction {fork} never reconverge")
    for d in doms:
        if all(other == d or _postdominates(g, d, other) for other in doms):
            return d
    raise GraphError(f"cannot find the reconvergence of fork junction {fork}")


def _postdominates(g: _Graph, src: int, via: int) -> bool:
    """True if removing ``via`` makes accept unreachable from ``src``."""
    if src == via or src == g.accept:
        return False
    seen = {src}
    stack = [src]
    while stack:
        n = stack.pop()
        if n == g.accept:
            return False
        for t in g.succ[n]:
            if t != via and t not in seen:
                seen.add(t)
                stack.append(t)
    return True
