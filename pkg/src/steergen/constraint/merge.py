"""Merge gold control-state sequences into one combined constraint AST.

Alignment is by shared prefix and suffix: the maximal common prefix and
suffix of the (deduplicated) sequences are collapsed, divergent middles
become an alternation, and an empty middle turns the whole divergent part
into an Optional group. No Star/Plus is ever introduced: loops are a manual
editing action, and automatic ones silently over-generalize. The resulting
language is exactly the set of input sequences.
"""

from __future__ import annotations

from ..core import ControlStateSeq
from ..errors import DomainError
from .nodes import Alternation, Concat, Node, Optional, literal_concat


def merge_examples(seqs: list[ControlStateSeq]) -> Node:
    if not seqs:
        raise DomainError("cannot merge an empty list of sequences")
    uniq: list[tuple[int, ...]] = []
    seen = set()
    for s in seqs:
        t = tuple(s)
        if t not in seen:
            seen.add(t)
            uniq.append(t)
    return _merge(uniq)


def _merge(seqs: list[tuple[int, ...]]) -> Node:
    if len(seqs) == 1:
        return literal_concat(seqs[0])

    prefix = _common_prefix(seqs)
    stripped = [s[len(prefix):] for s in seqs]
    suffix = _common_suffix(stripped)
    middles = [s[: len(s) - len(suffix)] if suffix else s for s in stripped]

    if all(not m for m in middles):
        return literal_concat(prefix + suffix)

    if any(not m for m in middles):
        nonempty = _dedupe([m for m in middles if m])
        middle: Node = Optional(_merge(nonempty))
    elif not prefix and not suffix:
        # Nothing collapsed: fall back to the plain alternation of the
        # literal sequences, which never over-generalizes.
        return Alternation(tuple(literal_concat(s) for s in seqs))
    else:
        middle = _merge(_dedupe(middles))

    parts: list[Node] = []
    if prefix:
        parts.append(literal_concat(prefix))
    parts.append(middle)
    if suffix:
        parts.append(literal_concat(suffix))
    if len(parts) == 1:
        return parts[0]
    flat: list[Node] = []
    for p in parts:
        if isinstance(p, Concat):
            flat.extend(p.children)
        else:
            flat.append(p)
    return Concat(tuple(flat))


def _dedupe(seqs: list[tuple[int, ...]]) -> list[tuple[int, ...]]:
    out: list[tuple[int, ...]] = []
    seen = set()
    for s in seqs:
        if s not in seen:
            seen.add(s)
            out.append(s)
    return out


def _common_prefix(seqs: list[tuple[int, ...]]) -> tuple[int, ...]:
    first = seqs[0]
    n = min(len(s) for s in seqs)
    i = 0
    while i < n and all(s[i] == first[i] for s in seqs):
        i += 1
    return first[:i]


def _common_suffix(seqs: list[tuple[int, ...]]) -> tuple[int, ...]:
    first = seqs[0]
    n = min(len(s) for s in seqs)
    i = 0
    while i < n and all(s[len(s) - 1 - i] == first[len(first) - 1 - i] for s in seqs):
        i += 1
    return first[len(first) - i :] if i else ()
