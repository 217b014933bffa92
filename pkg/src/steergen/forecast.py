"""Forecasting harnesses over many inputs.

Applies the model, optionally under a compiled constraint, to whole batches
of tables at once: global forecasts draw random test-set inputs, range
forecasts sweep selected fields through value lists, and alignment summaries
relate control states to table fields and emitted tokens. Results are plain
data so the HTTP layer can serialize them unchanged.
"""

from __future__ import annotations

import itertools
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .constraint import ConstraintDfa, accepts as dfa_accepts
from .core import DataTable, Example, table_to_json
from .data import heuristic_align
from .decode import GenerationResult, constrained_generate, free_generate
from .errors import DomainError, NoFeasibleOutput, RangeTooLarge, SchemaError
from .infer import infer_states
from .model import ModelParams

RANGE_CAP = 512  # cartesian-product ceiling for range forecasts


@dataclass(frozen=True)
class ForecastTuple:
    """One (input table, generated output) row of a forecast."""

    table: DataTable
    result: GenerationResult | None
    feasible: bool

    def __post_init__(self):
        if self.feasible != (self.result is not None):
            raise DomainError(
                "feasible tuples carry a result, infeasible ones carry none"
            )

    def to_json(self) -> dict:
        out: dict = {"table": table_to_json(self.table), "feasible": self.feasible}
        if self.result is not None:
            out["result"] = self.result.to_json()
        return out


@dataclass(frozen=True)
class StateHeatmap:
    """Per-position control-state histogram over a batch of outputs.

    ``counts[t][z]`` is the number of outputs whose t-th token carries state
    ``z``, so row ``t`` sums to the number of outputs longer than ``t``.
    """

    counts: tuple[tuple[int, ...], ...]
    max_len: int

    def __post_init__(self):
        if len(self.counts) != self.max_len:
            raise DomainError("heatmap needs one row per position up to max_len")
        if any(c < 0 for row in self.counts for c in row):
            raise DomainError("negative heatmap count")

    def to_json(self) -> dict:
        return {"counts": [list(row) for row in self.counts],
                "max_len": self.max_len}


@dataclass(frozen=True)
class AlignmentSummary:
    """Field co-occurrences and emitted-token frequencies per control state.

    Both members are indexed by state id; each entry is a (name, count)
    ranking sorted by descending count.
    """

    field_counts: tuple[tuple[tuple[str, int], ...], ...]
    token_counts: tuple[tuple[tuple[str, int], ...], ...]

    def __post_init__(self):
        if len(self.field_counts) != len(self.token_counts):
            raise DomainError("field and token rankings must cover the same states")
        for per_state in (self.field_counts, self.token_counts):
            for ranking in per_state:
                counts = [c for _, c in ranking]
                if any(c < 0 for c in counts):
                    raise DomainError("negative co-occurrence count")
                if counts != sorted(counts, reverse=True):
                    raise DomainError("rankings must be sorted by descending count")

    def to_json(self) -> dict:
        return {"states": [
            {"state": chr(ord("A") + z),
             "fields": [[name, c] for name, c in self.field_counts[z]],
             "tokens": [[tok, c] for tok, c in self.token_counts[z]]}
            for z in range(len(self.field_counts))]}


def forecast_global(params: ModelParams, dfa: ConstraintDfa | None, test_set,
                    n: int, seed: int, *, beam_width: int = 5,
                    max_len: int = 30) -> tuple[list[ForecastTuple], StateHeatmap]:
    """Decode ``n`` randomly sampled test inputs and aggregate a heatmap.

    ``test_set`` items may be examples or bare tables. Sampling is without
    replacement, falling back to replacement when ``n`` exceeds the set.
    """
    if n < 1:
        raise DomainError(f"need n >= 1, got {n}")
    if not test_set:
        raise DomainError("cannot forecast over an empty test set")
    tables = [item.table if isinstance(item, Example) else item
              for item in test_set]
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(tables), size=n, replace=n > len(tables))
    chosen = [tables[i] for i in idx]
    tuples = decode_batch(params, dfa, chosen, beam_width, max_len)
    return tuples, _heatmap(tuples, params.cfg.k)


def forecast_range(params: ModelParams, dfa: ConstraintDfa | None,
                   base_table: DataTable, ranges: dict, *,
                   cap: int = RANGE_CAP, beam_width: int = 5,
                   max_len: int = 30) -> list[ForecastTuple]:
    """Decode the cartesian product of range values applied to ``base_table``.

    The product iterates fields in table order, each field's values in the
    order given, so output order is deterministic.
    """
    for name, values in ranges.items():
        if name not in base_table.fields:
            raise SchemaError(
                f"range field {name!r} not in table fields {base_table.fields}"
            )
        if not values:
            raise DomainError(f"empty value list for field {name!r}")
    swept = [name for name in base_table.fields if name in ranges]
    size = 1
    for name in swept:
        size *= len(ranges[name])
    if size > cap:
        raise RangeTooLarge(f"range product of {size} tables exceeds cap {cap}")
    tables = []
    for combo in itertools.product(*(ranges[name] for name in swept)):
        table = base_table
        for name, value in zip(swept, combo):
            table = table.replace_value(name, str(value))
        tables.append(table)
    return decode_batch(params, dfa, tables, beam_width, max_len)


def alignment_summary(params: ModelParams, sample) -> AlignmentSummary:
    """Count, per control state, aligned table fields and emitted tokens.

    ``sample`` mixes examples and forecast tuples. Examples without gold
    states get them inferred; infeasible tuples contribute nothing.
    """
    if not sample:
        raise DomainError("cannot summarize an empty sample")
    k = params.cfg.k
    fields = [Counter() for _ in range(k)]
    tokens = [Counter() for _ in range(k)]
    for item in sample:
        if isinstance(item, ForecastTuple):
            if not item.feasible:
                continue
            table, toks, states = item.table, item.result.tokens, item.result.states
        elif isinstance(item, Example):
            table, toks = item.table, item.text
            states = (item.states if item.states is not None
                      else infer_states(params, table, toks))
        else:
            raise DomainError(f"cannot summarize a {type(item).__name__}")
        labels = heuristic_align(table, toks)
        for tok, z, field in zip(toks, states, labels):
            if not 0 <= z < k:
                raise DomainError(f"state {z} outside model alphabet of size {k}")
            tokens[z][tok] += 1
            if field is not None:
                fields[z][field] += 1
    return AlignmentSummary(_ranked(fields), _ranked(tokens))


def decode_batch(params, dfa, tables, beam_width, max_len):
    """Decode tables concurrently; output order matches input order."""

    def one(table: DataTable) -> ForecastTuple:
        try:
            if dfa is None:
                res = free_generate(params, table, beam_width=beam_width,
                                    max_len=max_len)
            else:
                res = constrained_generate(params, table, dfa,
                                           beam_width=beam_width,
                                           max_len=max_len)
        except NoFeasibleOutput:
            return ForecastTuple(table, None, False)
        if dfa is not None and not dfa_accepts(dfa, res.states):
            raise RuntimeError("constrained decode escaped its constraint")
        return ForecastTuple(table, res, True)

    if len(tables) <= 1:
        return [one(t) for t in tables]
    with ThreadPoolExecutor() as pool:
        return list(pool.map(one, tables))


def _heatmap(tuples, k):
    lengths = [len(t.result.tokens) for t in tuples if t.feasible]
    max_len = max(lengths, default=0)
    counts = [[0] * k for _ in range(max_len)]
    for t in tuples:
        if not t.feasible:
            continue
        for pos, z in enumerate(t.result.states):
            counts[pos][z] += 1
    return StateHeatmap(tuple(tuple(row) for row in counts), max_len)


def _ranked(counters):
    return tuple(
        tuple(sorted(c.items(), key=lambda kv: (-kv[1], kv[0])))
        for c in counters
    )
