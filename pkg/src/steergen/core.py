"""Shared domain types, vocabulary, tokenization, and canonical JSON forms.

Everything here is immutable after construction and safe to share across
threads. The JSON encodings defined at the bottom are the wire format used by
dataset files, the HTTP API, and exported bundles.
"""

from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass, field

from .errors import DomainError

BOS = "<bos>"
EOS = "<eos>"
UNK = "<unk>"

BOS_ID = 0
EOS_ID = 1
UNK_ID = 2

_SPECIALS = (BOS, EOS, UNK)


def tokenize(text: str) -> list[str]:
    """Lowercase and split on whitespace.

    All corpora handled here are pre-tokenized (punctuation already
    space-separated), so this is the entire tokenizer.
    """
    return text.lower().split()


def detokenize(tokens: list[str] | tuple[str, ...]) -> str:
    """Join tokens with single spaces; inverse of :func:`tokenize` on its image."""
    return " ".join(tokens)


@dataclass(frozen=True)
class DataTable:
    """One structured input: an ordered list of (field, value) pairs."""

    entries: tuple[tuple[str, str], ...]
    schema_id: str = ""

    def __post_init__(self):
        names = [name for name, _ in self.entries]
        if len(set(names)) != len(names):
            raise DomainError(f"duplicate field names in table: {names}")
        for name, value in self.entries:
            if not value:
                raise DomainError(f"empty value for field {name!r}")
        object.__setattr__(self, "entries", tuple((n, v) for n, v in self.entries))

    @property
    def fields(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.entries)

    def value(self, name: str) -> str:
        for n, v in self.entries:
            if n == name:
                return v
        raise KeyError(name)

    def replace_value(self, name: str, value: str) -> "DataTable":
        if name not in self.fields:
            raise KeyError(name)
        return DataTable(
            tuple((n, value if n == name else v) for n, v in self.entries),
            self.schema_id,
        )


@dataclass(frozen=True)
class ControlAlphabet:
    """The K discrete control states, rendered as letters A, B, C, ..."""

    size: int

    def __post_init__(self):
        if not 2 <= self.size <= 26:
            raise DomainError(f"alphabet size must be in 2..26, got {self.size}")

    def letter(self, state: int) -> str:
        if not 0 <= state < self.size:
            raise DomainError(f"state {state} outside alphabet of size {self.size}")
        return chr(ord("A") + state)

    def state(self, letter: str) -> int:
        idx = ord(letter) - ord("A")
        if len(letter) != 1 or not 0 <= idx < self.size:
            raise DomainError(f"letter {letter!r} outside alphabet of size {self.size}")
        return idx


@dataclass(frozen=True)
class ControlStateSeq:
    """A sequence of control-state ids, one per word token."""

    states: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(int(s) for s in self.states))
        if any(s < 0 for s in self.states):
            raise DomainError("negative control state id")

    def __len__(self) -> int:
        return len(self.states)

    def __iter__(self):
        return iter(self.states)

    def letters(self) -> str:
        return "".join(chr(ord("A") + s) for s in self.states)

    @classmethod
    def from_letters(cls, text: str) -> "ControlStateSeq":
        ids = []
        for ch in text:
            idx = ord(ch) - ord("A")
            if not 0 <= idx < 26:
                raise DomainError(f"invalid control-state letter {ch!r}")
            ids.append(idx)
        return cls(tuple(ids))

    def validate(self, alphabet: ControlAlphabet) -> "ControlStateSeq":
        for s in self.states:
            if s >= alphabet.size:
                raise DomainError(
                    f"state {s} outside alphabet of size {alphabet.size}"
                )
        return self


@dataclass(frozen=True)
class Example:
    """A (table, text) pair, optionally with gold control states.

    ``text`` holds the visible tokens only; BOS/EOS are a modelling concern
    and never stored. When gold states are present there is exactly one per
    token.
    """

    table: DataTable
    text: tuple[str, ...]
    states: ControlStateSeq | None = None

    def __post_init__(self):
        object.__setattr__(self, "text", tuple(self.text))
        if self.states is not None and len(self.states) != len(self.text):
            raise DomainError(
                f"{len(self.states)} states for {len(self.text)} tokens"
            )


class Vocabulary:
    """Dense token-id mapping with fixed BOS/EOS/UNK specials at ids 0..2."""

    def __init__(self, tokens: list[str]):
        if tuple(tokens[:3]) != _SPECIALS:
            raise DomainError("vocabulary must start with BOS, EOS, UNK")
        if len(set(tokens)) != len(tokens):
            raise DomainError("duplicate tokens in vocabulary")
        self._tokens = list(tokens)
        self._ids = {t: i for i, t in enumerate(tokens)}

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    @property
    def tokens(self) -> list[str]:
        return list(self._tokens)

    def id(self, token: str) -> int:
        return self._ids.get(token, UNK_ID)

    def token(self, idx: int) -> str:
        return self._tokens[idx]

    def encode(self, tokens: list[str] | tuple[str, ...]) -> list[int]:
        return [self._ids.get(t, UNK_ID) for t in tokens]

    def decode(self, ids: list[int]) -> list[str]:
        return [self._tokens[i] for i in ids]

    def content_hash(self) -> str:
        payload = "\x00".join(self._tokens).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self._tokens == other._tokens


def build_vocab(examples: list[Example], min_count: int = 1) -> Vocabulary:
    """Build a vocabulary from example texts.

    Tokens with corpus count >= ``min_count`` get ids in first-occurrence
    order after the specials; rarer tokens fall back to UNK at encode time.
    """
    if not examples:
        raise DomainError("cannot build a vocabulary from an empty corpus")
    counts: Counter[str] = Counter()
    order: list[str] = []
    seen: set[str] = set()
    for ex in examples:
        for tok in ex.text:
            counts[tok] += 1
            if tok not in seen:
                seen.add(tok)
                order.append(tok)
    kept = [t for t in order if counts[t] >= min_count and t not in _SPECIALS]
    return Vocabulary(list(_SPECIALS) + kept)


# ---------------------------------------------------------------------------
# Canonical JSON encodings
# ---------------------------------------------------------------------------

def table_to_json(table: DataTable) -> dict:
    out: dict = {"fields": [[n, v] for n, v in table.entries]}
    if table.schema_id:
        out["schema_id"] = table.schema_id
    return out


def table_from_json(obj: dict) -> DataTable:
    try:
        entries = tuple((str(n), str(v)) for n, v in obj["fields"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DomainError(f"malformed table JSON: {exc}") from exc
    return DataTable(entries, str(obj.get("schema_id", "")))


def states_to_json(seq: ControlStateSeq) -> str:
    return seq.letters()


def states_from_json(text: str) -> ControlStateSeq:
    return ControlStateSeq.from_letters(text)


def example_to_json(ex: Example) -> dict:
    out: dict = {"table": table_to_json(ex.table), "text": detokenize(ex.text)}
    if ex.states is not None:
        out["states"] = states_to_json(ex.states)
    return out


def example_from_json(obj: dict) -> Example:
    states = None
    if "states" in obj and obj["states"] is not None:
        states = states_from_json(obj["states"])
    return Example(
        table=table_from_json(obj["table"]),
        text=tuple(tokenize(obj["text"])),
        states=states,
    )


def vocab_to_json(vocab: Vocabulary) -> dict:
    return {"tokens": vocab.tokens}


def vocab_from_json(obj: dict) -> Vocabulary:
    return Vocabulary(list(obj["tokens"]))
