"""Datasets: the synthetic date corpus with exact gold alignments, plus
loading of restaurant-style attribute/reference files.

Dates are rendered from eight fixed templates spanning three binary axes
(ordinal vs. nominal day, day-before-month vs. month-before-day, comma vs.
no comma before the year).  Because every token of a rendered sentence comes
from a known template position, gold control states are exact, which is what
lets the training loop be fully supervised.
"""

from __future__ import annotations

import csv
import enum
import itertools
import json
import logging
import re
import unicodedata
from dataclasses import dataclass

import numpy as np

from .core import (
    BOS,
    EOS,
    UNK,
    ControlStateSeq,
    DataTable,
    Example,
    Vocabulary,
    example_from_json,
    example_to_json,
    tokenize,
)
from .errors import AlignmentError, DomainError, FormatError, IoError

log = logging.getLogger(__name__)

DATE_K = 10  # state alphabet for the date task; four states stay unused


class GoldRole(enum.IntEnum):
    FILLER = 0
    DAY = 1
    MONTH = 2
    YEAR = 3
    PUNCT = 4
    CONNECTIVE = 5


ORDINALS = {
    1: "first", 2: "second", 3: "third", 4: "fourth", 5: "fifth",
    6: "sixth", 7: "seventh", 8: "eighth", 9: "ninth", 10: "tenth",
    11: "eleventh", 12: "twelfth", 13: "thirteenth", 14: "fourteenth",
    15: "fifteenth", 16: "sixteenth", 17: "seventeenth", 18: "eighteenth",
    19: "nineteenth", 20: "twentieth",
}
for _n, _w in list(ORDINALS.items())[:8]:
    ORDINALS[20 + _n] = f"twenty {_w}"

MONTHS = (
    "january", "february", "march", "april", "may", "june", "july",
    "august", "september", "october", "november", "december",
)

DAY_RANGE = range(1, 29)
YEAR_RANGE = range(1990, 2026)


@dataclass(frozen=True)
class DateFormatSpec:
    ordinal_day: bool
    day_first: bool
    comma_before_year: bool
    template: str

    def render(self, day: int, month: int, year: int) -> tuple[tuple[str, ...], tuple[int, ...]]:
        """Token/state pair for a date, states by template provenance."""
        tokens: list[str] = []
        states: list[int] = []
        for part in self.template.split():
            if part == "{DAY}":
                words = ORDINALS[day].split() if self.ordinal_day else [str(day)]
                for w in words:
                    tokens.append(w)
                    states.append(int(GoldRole.DAY))
            elif part == "{MONTH}":
                tokens.append(MONTHS[month - 1])
                states.append(int(GoldRole.MONTH))
            elif part == "{YEAR}":
                tokens.append(str(year))
                states.append(int(GoldRole.YEAR))
            else:
                tokens.append(part)
                states.append(int(_literal_role(part)))
        return tuple(tokens), tuple(states)


def _literal_role(token: str) -> GoldRole:
    if token in (",", "."):
        return GoldRole.PUNCT
    if token in ("today", "is"):
        return GoldRole.FILLER
    return GoldRole.CONNECTIVE


def _template(ordinal_day: bool, day_first: bool, comma: bool) -> str:
    day = "the {DAY} of" if ordinal_day and day_first else (
        "the {DAY}" if ordinal_day else "{DAY}")
    middle = f"{day} {{MONTH}}" if day_first else f"{{MONTH}} {day}"
    if comma:
        tail = ", {YEAR} ."
    elif day_first:
        tail = "{YEAR} ."
    else:
        tail = "in the year {YEAR} ."
    return f"today is {middle} {tail}"


DATE_FORMATS: tuple[DateFormatSpec, ...] = tuple(
    DateFormatSpec(o, d, c, _template(o, d, c))
    for o, d, c in itertools.product((True, False), repeat=3)
)


def date_table(day: int, month: int, year: int) -> DataTable:
    if day not in DAY_RANGE or month not in range(1, 13) or year not in YEAR_RANGE:
        raise DomainError(f"date out of range: {day}/{month}/{year}")
    return DataTable((
        ("day", str(day)),
        ("month", MONTHS[month - 1]),
        ("year", str(year)),
    ))


def render_date(day: int, month: int, year: int, fmt: int) -> Example:
    tokens, states = DATE_FORMATS[fmt].render(day, month, year)
    return Example(date_table(day, month, year), tokens, ControlStateSeq(states))


def gen_date_dataset(n: int, seed: int) -> list[Example]:
    """n uniformly random dates in uniformly random formats, gold-labeled."""
    if n < 1:
        raise DomainError("need n >= 1")
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        out.append(render_date(
            int(rng.integers(DAY_RANGE.start, DAY_RANGE.stop)),
            int(rng.integers(1, 13)),
            int(rng.integers(YEAR_RANGE.start, YEAR_RANGE.stop)),
            int(rng.integers(0, len(DATE_FORMATS))),
        ))
    return out


def detect_format(example: Example) -> int:
    """Index of the template that renders this example's exact text."""
    try:
        day = int(example.table.value("day"))
        month = MONTHS.index(example.table.value("month")) + 1
        year = int(example.table.value("year"))
    except (KeyError, ValueError) as exc:
        raise AlignmentError(f"not a date table: {exc}") from exc
    for fmt in range(len(DATE_FORMATS)):
        tokens, _ = DATE_FORMATS[fmt].render(day, month, year)
        if tokens == example.text:
            return fmt
    raise AlignmentError("text does not match any date template")


def align_date(example: Example) -> ControlStateSeq:
    """Recover gold states by re-rendering every format from the table."""
    fmt = detect_format(example)
    day = int(example.table.value("day"))
    month = MONTHS.index(example.table.value("month")) + 1
    year = int(example.table.value("year"))
    return ControlStateSeq(DATE_FORMATS[fmt].render(day, month, year)[1])


def format_constraint(fmt: int) -> str:
    """Gold control-state regex for one format, day under + when multi-token."""
    spec = DATE_FORMATS[fmt]
    out = []
    for part in spec.template.split():
        if part == "{DAY}":
            out.append("B+" if spec.ordinal_day else "B")
        elif part == "{MONTH}":
            out.append("C")
        elif part == "{YEAR}":
            out.append("D")
        else:
            out.append(chr(ord("A") + _literal_role(part)))
    return "".join(out)


def date_lexicon() -> list[str]:
    """Every surface token any template can emit, in a fixed order."""
    toks: list[str] = []
    seen = set()

    def add(t):
        if t not in seen:
            seen.add(t)
            toks.append(t)

    for spec in DATE_FORMATS:
        for part in spec.template.split():
            if not part.startswith("{"):
                add(part)
    for d in DAY_RANGE:
        for w in ORDINALS[d].split():
            add(w)
        add(str(d))
    for m in MONTHS:
        add(m)
    for y in YEAR_RANGE:
        add(str(y))
    return toks


def date_vocab() -> Vocabulary:
    return Vocabulary([BOS, EOS, UNK] + date_lexicon())


# ---------------------------------------------------------------------------
# Restaurant-style attribute data
# ---------------------------------------------------------------------------

_MR_FIELD = re.compile(r"\s*([^,\[\]]+?)\s*\[([^\]]*)\]")


def _normalize(text: str) -> str:
    stripped = "".join(c for c in unicodedata.normalize("NFKD", text)
                       if not unicodedata.combining(c))
    return " ".join(tokenize(stripped))


def load_table_dataset(path: str) -> list[Example]:
    """Read a CSV with columns mr ("field[value], ...") and ref (a sentence).

    Malformed rows are skipped and counted; they are not worth failing a
    whole load over.
    """
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    examples = []
    skipped = 0
    with fh:
        reader = csv.DictReader(fh)
        for row in reader:
            mr, ref = (row.get("mr") or "").strip(), (row.get("ref") or "").strip()
            fields = [(name.strip(), _normalize(value))
                      for name, value in _MR_FIELD.findall(mr)]
            fields = [(n, v) for n, v in fields if n and v]
            if not fields or not ref:
                skipped += 1
                continue
            try:
                table = DataTable(tuple(fields))
            except DomainError:
                skipped += 1
                continue
            examples.append(Example(table, tuple(tokenize(_normalize(ref)))))
    if skipped:
        log.warning("skipped %d malformed rows in %s", skipped, path)
    if not examples:
        raise FormatError(f"no valid rows in {path}")
    return examples


def heuristic_align(table: DataTable, tokens) -> tuple[str | None, ...]:
    """Label tokens with the field whose value text they repeat verbatim.

    Candidate spans are contiguous runs of a field's value tokens found in
    the text; longer matches win, then earlier ones, then field order.
    """
    tokens = list(tokens)
    spans = []
    for order, (field, value) in enumerate(table.entries):
        vtoks = tokenize(value)
        for i in range(len(vtoks)):
            for j in range(i + 1, len(vtoks) + 1):
                piece = vtoks[i:j]
                for start in _occurrences(tokens, piece):
                    spans.append((-(j - i), start, order, field))
    labels: list[str | None] = [None] * len(tokens)
    for neg_len, start, _, field in sorted(spans):
        end = start - neg_len
        if all(labels[t] is None for t in range(start, end)):
            for t in range(start, end):
                labels[t] = field
    return tuple(labels)


def _occurrences(tokens: list[str], piece: list[str]):
    for start in range(len(tokens) - len(piece) + 1):
        if tokens[start:start + len(piece)] == piece:
            yield start


# ---------------------------------------------------------------------------
# Dataset files
# ---------------------------------------------------------------------------

def save_dataset(examples: list[Example], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(json.dumps(example_to_json(ex), sort_keys=True) + "\n")


def load_dataset(path: str) -> list[Example]:
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    with fh:
        return [example_from_json(json.loads(line)) for line in fh if line.strip()]
