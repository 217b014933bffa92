"""Compile constraint ASTs to minimal DFAs.

Pipeline: Thompson construction -> subset construction -> Moore minimization
-> breadth-first canonical renumbering. The canonical numbering makes the
minimal automaton unique per language, so two DFAs over the same alphabet
are language-equal iff they are structurally equal. REJECT is the sentinel
-1, never a state: the transition table is partial and a missing move kills
a beam hypothesis immediately.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from ..core import ControlAlphabet, ControlStateSeq
from ..errors import DomainError
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

REJECT = -1

# NFA edge symbol meaning "any control state".
_ANY = -1


@dataclass(frozen=True)
class ConstraintDfa:
    """Minimal deterministic automaton over control states 0..k-1.

    ``delta`` is a tuple of per-state tuples of length k; entry REJECT (-1)
    means the move is forbidden. States are numbered canonically: 0 is the
    start and the rest follow in BFS discovery order (symbols tried in
    increasing order), so structural equality coincides with language
    equality for minimal automata.
    """

    k: int
    n_states: int
    start: int
    accepting: frozenset[int]
    delta: tuple[tuple[int, ...], ...]
    _allowed: tuple[tuple[int, ...], ...] = field(repr=False, compare=False, default=())

    def __post_init__(self):
        if len(self.delta) != self.n_states:
            raise DomainError("transition table size mismatch")
        for row in self.delta:
            if len(row) != self.k:
                raise DomainError("transition row width mismatch")
            for t in row:
                if t != REJECT and not 0 <= t < self.n_states:
                    raise DomainError(f"transition target {t} out of range")
        if not 0 <= self.start < self.n_states:
            raise DomainError("start state out of range")
        for a in self.accepting:
            if not 0 <= a < self.n_states:
                raise DomainError("accepting state out of range")
        allowed = tuple(
            tuple(c for c in range(self.k) if row[c] != REJECT)
            for row in self.delta
        )
        object.__setattr__(self, "_allowed", allowed)


def step(dfa: ConstraintDfa, dfa_state: int, control_state: int) -> int:
    if not 0 <= dfa_state < dfa.n_states:
        raise DomainError(f"invalid dfa state {dfa_state}")
    if not 0 <= control_state < dfa.k:
        return REJECT
    return dfa.delta[dfa_state][control_state]


def allowed(dfa: ConstraintDfa, dfa_state: int) -> tuple[int, ...]:
    if not 0 <= dfa_state < dfa.n_states:
        raise DomainError(f"invalid dfa state {dfa_state}")
    return dfa._allowed[dfa_state]


def accepts(dfa: ConstraintDfa, seq: ControlStateSeq) -> bool:
    state = dfa.start
    for c in seq:
        state = step(dfa, state, c) if state != REJECT else REJECT
        if state == REJECT:
            return False
    return state in dfa.accepting


# ---------------------------------------------------------------------------
# Thompson construction
# ---------------------------------------------------------------------------

class _Nfa:
    def __init__(self):
        self.eps: list[list[int]] = []
        self.sym: list[list[tuple[int, int]]] = []  # (symbol or _ANY, target)

    def new_state(self) -> int:
        self.eps.append([])
        self.sym.append([])
        return len(self.eps) - 1

    def add_eps(self, a: int, b: int):
        self.eps[a].append(b)

    def add_sym(self, a: int, symbol: int, b: int):
        self.sym[a].append((symbol, b))


def _thompson(nfa: _Nfa, node: Node) -> tuple[int, int]:
    """Return (start, accept) fragment for the node."""
    if isinstance(node, Epsilon):
        s, a = nfa.new_state(), nfa.new_state()
        nfa.add_eps(s, a)
        return s, a
    if isinstance(node, Literal):
        s, a = nfa.new_state(), nfa.new_state()
        nfa.add_sym(s, node.state, a)
        return s, a
    if isinstance(node, Wildcard):
        s, a = nfa.new_state(), nfa.new_state()
        nfa.add_sym(s, _ANY, a)
        return s, a
    if isinstance(node, Concat):
        s, a = _thompson(nfa, node.children[0])
        for child in node.children[1:]:
            cs, ca = _thompson(nfa, child)
            nfa.add_eps(a, cs)
            a = ca
        return s, a
    if isinstance(node, Alternation):
        s, a = nfa.new_state(), nfa.new_state()
        for child in node.children:
            cs, ca = _thompson(nfa, child)
            nfa.add_eps(s, cs)
            nfa.add_eps(ca, a)
        return s, a
    if isinstance(node, Star):
        cs, ca = _thompson(nfa, node.child)
        s, a = nfa.new_state(), nfa.new_state()
        nfa.add_eps(s, cs)
        nfa.add_eps(s, a)
        nfa.add_eps(ca, cs)
        nfa.add_eps(ca, a)
        return s, a
    if isinstance(node, Plus):
        cs, ca = _thompson(nfa, node.child)
        a = nfa.new_state()
        nfa.add_eps(ca, cs)
        nfa.add_eps(ca, a)
        return cs, a
    if isinstance(node, Optional):
        cs, ca = _thompson(nfa, node.child)
        s, a = nfa.new_state(), nfa.new_state()
        nfa.add_eps(s, cs)
        nfa.add_eps(s, a)
        nfa.add_eps(ca, a)
        return s, a
    raise DomainError(f"unknown AST node {node!r}")


def _closure(nfa: _Nfa, states) -> frozenset[int]:
    seen = set(states)
    stack = list(states)
    while stack:
        s = stack.pop()
        for t in nfa.eps[s]:
            if t not in seen:
                seen.add(t)
                stack.append(t)
    return frozenset(seen)


def compile_ast(ast: Node, alphabet: ControlAlphabet) -> ConstraintDfa:
    """Compile to the canonical minimal DFA over the given alphabet."""
    k = alphabet.size
    nfa = _Nfa()
    nfa_start, nfa_accept = _thompson(nfa, ast)

    start = _closure(nfa, [nfa_start])
    index: dict[frozenset[int], int] = {start: 0}
    rows: list[list[int]] = []
    accepting: set[int] = set()
    queue = deque([start])
    order = [start]
    while queue:
        cur = queue.popleft()
        cur_id = index[cur]
        while len(rows) <= cur_id:
            rows.append([REJECT] * k)
        if nfa_accept in cur:
            accepting.add(cur_id)
        for c in range(k):
            move = {
                t
                for s in cur
                for sym, t in nfa.sym[s]
                if sym == c or sym == _ANY
            }
            if not move:
                continue
            target = _closure(nfa, move)
            if target not in index:
                index[target] = len(index)
                order.append(target)
                queue.append(target)
            rows[cur_id][c] = index[target]
        # rows may lag behind index for targets not yet dequeued
        while len(rows) < len(index):
            rows.append([REJECT] * k)

    return _minimize(k, len(index), 0, accepting, rows)


def _minimize(
    k: int,
    n: int,
    start: int,
    accepting: set[int],
    rows: list[list[int]],
) -> ConstraintDfa:
    """Moore refinement with REJECT as its own fixed class, then BFS
    renumbering so the result is canonical."""
    live = _live_states(k, n, accepting, rows)
    # Start must stay representable even when the language is empty.
    live.add(start)

    cls = {s: (1 if s in accepting else 0) for s in live}
    while True:
        signatures: dict[tuple, int] = {}
        new_cls: dict[int, int] = {}
        for s in sorted(live):
            sig = (
                cls[s],
                tuple(
                    cls.get(rows[s][c], REJECT) if rows[s][c] in live else REJECT
                    for c in range(k)
                ),
            )
            if sig not in signatures:
                signatures[sig] = len(signatures)
            new_cls[s] = signatures[sig]
        if new_cls == cls:
            break
        cls = new_cls

    # Representative transition table over classes.
    class_row: dict[int, list[int]] = {}
    class_accept: set[int] = set()
    for s in live:
        c_id = cls[s]
        if c_id not in class_row:
            class_row[c_id] = [
                cls[rows[s][x]] if rows[s][x] in live else REJECT for x in range(k)
            ]
        if s in accepting:
            class_accept.add(c_id)

    # Canonical BFS renumbering from the start class.
    renum: dict[int, int] = {cls[start]: 0}
    bfs = deque([cls[start]])
    final_rows: list[list[int]] = []
    final_accept: set[int] = set()
    while bfs:
        c_id = bfs.popleft()
        new_id = renum[c_id]
        while len(final_rows) <= new_id:
            final_rows.append([REJECT] * k)
        if c_id in class_accept:
            final_accept.add(new_id)
        for c in range(k):
            t = class_row[c_id][c]
            if t == REJECT:
                continue
            if t not in renum:
                renum[t] = len(renum)
                bfs.append(t)
            final_rows[new_id][c] = renum[t]
        while len(final_rows) < len(renum):
            final_rows.append([REJECT] * k)

    return ConstraintDfa(
        k=k,
        n_states=len(renum),
        start=0,
        accepting=frozenset(final_accept),
        delta=tuple(tuple(r) for r in final_rows),
    )


def _live_states(k, n, accepting, rows) -> set[int]:
    """States from which some accepting state is reachable."""
    back: dict[int, set[int]] = {s: set() for s in range(n)}
    for s in range(n):
        for c in range(k):
            t = rows[s][c]
            if t != REJECT:
                back[t].add(s)
    live = set(accepting)
    stack = list(accepting)
    while stack:
        s = stack.pop()
        for p in back[s]:
            if p not in live:
                live.add(p)
                stack.append(p)
    return live


def minimize_dfa(dfa: ConstraintDfa) -> ConstraintDfa:
    """Re-minimize an arbitrary (possibly hand-built) DFA."""
    return _minimize(
        dfa.k,
        dfa.n_states,
        dfa.start,
        set(dfa.accepting),
        [list(r) for r in dfa.delta],
    )


def dfa_equivalent(a: ConstraintDfa, b: ConstraintDfa) -> bool:
    """Language equality via product-automaton search for a distinguishing
    pair; REJECT acts as a non-accepting sink on either side."""
    if a.k != b.k:
        return False

    def acc(dfa: ConstraintDfa, s: int) -> bool:
        return s != REJECT and s in dfa.accepting

    seen = {(a.start, b.start)}
    queue = deque(seen)
    while queue:
        sa, sb = queue.popleft()
        if acc(a, sa) != acc(b, sb):
            return False
        for c in range(a.k):
            ta = a.delta[sa][c] if sa != REJECT else REJECT
            tb = b.delta[sb][c] if sb != REJECT else REJECT
            if ta == REJECT and tb == REJECT:
                continue
            if (ta, tb) not in seen:
                seen.add((ta, tb))
                queue.append((ta, tb))
    return True


# ---------------------------------------------------------------------------
# JSON form (bundles, API summaries)
# ---------------------------------------------------------------------------

def dfa_to_json(dfa: ConstraintDfa) -> dict:
    return {
        "k": dfa.k,
        "states": dfa.n_states,
        "start": dfa.start,
        "accepting": sorted(dfa.accepting),
        "delta": [list(row) for row in dfa.delta],
    }


def dfa_from_json(obj: dict) -> ConstraintDfa:
    try:
        return ConstraintDfa(
            k=int(obj["k"]),
            n_states=int(obj["states"]),
            start=int(obj["start"]),
            accepting=frozenset(int(a) for a in obj["accepting"]),
            delta=tuple(tuple(int(t) for t in row) for row in obj["delta"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DomainError(f"malformed DFA JSON: {exc}") from exc
