"""End-to-end gates for the whole system, one test per gate.

Each test prints a single PASS line with the measured numbers once its
assertions hold, so a verbose run reads as a checklist. The date-task tests
share one trained model via a module fixture; everything else runs on tiny
throwaway models or plain numpy.
"""

from __future__ import annotations

import itertools
import re
import time
import zipfile

import numpy as np
import pytest

from steergen import decode as D
from steergen import infer as I
from steergen import train as T
from steergen.constraint import (
    Alternation,
    Concat,
    Epsilon,
    Literal,
    Optional,
    Star,
    Wildcard,
    accepts,
    compile_ast,
    dfa_equivalent,
    merge_examples,
    parse_regex,
    render_regex,
    to_graph,
)
from steergen.core import (
    ControlAlphabet,
    ControlStateSeq,
    DataTable,
    Example,
    detokenize,
)
from steergen.data import (
    DATE_K,
    date_table,
    detect_format,
    format_constraint,
    gen_date_dataset,
)
from steergen.errors import CompatibilityError, NoFeasibleOutput
from steergen.export import export_bundle, run_bundle
from steergen.forecast import decode_batch
from steergen.infer import infer_states
from steergen.model import ModelConfig, init_params, load_checkpoint

from oracles import all_sequences, naive_match
from test_decode import exhaustive_best, tiny_params
from test_export import rewrite_member
from test_infer import brute_scores


def report(name: str, **kv) -> None:
    parts = " ".join(f"{k}={v}" for k, v in kv.items())
    print(f"PASS {name}: {parts}")


# ---------------------------------------------------------------------------
# Automaton conformance
# ---------------------------------------------------------------------------

# Patterns over the letters A-D. The third entry mirrors the combined
# restaurant constraint: a free seed, the two location orders, then the
# family-friendly state with its optional "not" predecessor.
CONFORMANCE_CORPUS = [
    "A.B*",
    "",
    ".*(AB|BA).*D?C",
    "A",
    "D",
    "AB",
    "ABCD",
    "A*",
    "A+",
    "A?",
    ".",
    ".*",
    "..?",
    "(A|B)(C|D)",
    "A|B|C|D",
    "(AB)*",
    "(A|B)*C",
    "A(B|C)*D",
    "AA|AB|AC",
    "(A*B)+",
    "((A|B)(C|D))*",
    "A.B",
    ".A.",
    "(AB|BA)",
    "A?B?C?D?",
    "(A+|B+)C?",
    "AB*C+D?",
    "(.A)*",
    "(A|BC)(D|AB)",
    "A*B*C*D*",
    "(AB|ABC)D",
    "B(AA)*B",
    "D?C",
    "(A|B)?(C|D)+",
]


class TestAutomatonConformance:
    def test_dfa_matches_naive_matcher_exhaustively(self):
        alphabet = ControlAlphabet(4)
        assert len(CONFORMANCE_CORPUS) >= 30
        seqs = list(all_sequences(4, 6))
        assert len(seqs) == 5461
        t0 = time.monotonic()
        mismatches = 0
        for pattern in CONFORMANCE_CORPUS:
            ast = parse_regex(pattern, alphabet)
            dfa = compile_ast(ast, alphabet)
            # Second, unrelated oracle: the same pattern is valid Python re
            # syntax once whitespace is gone, matched over letter strings.
            rx = re.compile(pattern.replace(" ", ""))
            for seq in seqs:
                want = naive_match(ast, seq)
                letters = "".join("ABCD"[z] for z in seq)
                if accepts(dfa, seq) != want:
                    mismatches += 1
                if (rx.fullmatch(letters) is not None) != want:
                    mismatches += 1
        elapsed = time.monotonic() - t0
        assert mismatches == 0
        assert elapsed < 10.0
        report("automaton conformance", regexes=len(CONFORMANCE_CORPUS),
               sequences=len(seqs), mismatches=0, seconds=round(elapsed, 2))


# ---------------------------------------------------------------------------
# Decoder soundness
# ---------------------------------------------------------------------------

def _random_ast(rng, k, depth):
    roll = int(rng.integers(0, 7 if depth > 0 else 3))
    if roll == 0:
        return Literal(int(rng.integers(0, k)))
    if roll == 1:
        return Wildcard()
    if roll == 2:
        return Epsilon()
    if roll == 3:
        return Concat(tuple(_random_ast(rng, k, depth - 1) for _ in range(2)))
    if roll == 4:
        return Alternation(tuple(_random_ast(rng, k, depth - 1) for _ in range(2)))
    if roll == 5:
        return Optional(_random_ast(rng, k, depth - 1))
    return Star(_random_ast(rng, k, depth - 1))


def _shortest_accept(dfa):
    """Length of the shortest accepted sequence, or None if language empty."""
    if dfa.start in dfa.accepting:
        return 0
    dist = {dfa.start: 0}
    frontier = [dfa.start]
    while frontier:
        nxt = []
        for q in frontier:
            for t in dfa.delta[q]:
                if t >= 0 and t not in dist:
                    dist[t] = dist[q] + 1
                    if t in dfa.accepting:
                        return dist[t]
                    nxt.append(t)
        frontier = nxt
    return None


class TestDecoderSoundness:
    def test_thousand_constrained_decodes_all_satisfy(self):
        rng = np.random.default_rng(7)
        max_len = 6
        models = [tiny_params(s, k=3, words="aa bb cc") for s in range(8)]
        values = ["aa", "bb", "cc", "aa bb", "bb cc", "aa bb cc", "cc aa"]
        tables = [DataTable((("f", v),)) for v in values]

        alphabet = ControlAlphabet(3)
        dfas = []
        while len(dfas) < 40:
            dfa = compile_ast(_random_ast(rng, 3, depth=3), alphabet)
            shortest = _shortest_accept(dfa)
            if shortest is not None and shortest <= max_len:
                dfas.append(dfa)

        t0 = time.monotonic()
        satisfied = 0
        total = 1000
        for _ in range(total):
            params = models[int(rng.integers(0, len(models)))]
            table = tables[int(rng.integers(0, len(tables)))]
            dfa = dfas[int(rng.integers(0, len(dfas)))]
            try:
                res = D.constrained_generate(params, table, dfa,
                                             beam_width=5, max_len=max_len)
            except NoFeasibleOutput:
                continue  # leaves satisfied short of total
            satisfied += bool(accepts(dfa, res.states))
        rate = satisfied / total

        dotstar = compile_ast(parse_regex(".*", alphabet), alphabet)
        identical = 0
        pairs = [(m, t) for m in models[:5] for t in tables[:5]]
        for params, table in pairs:
            free = D.free_generate(params, table, beam_width=5, max_len=max_len)
            wild = D.constrained_generate(params, table, dotstar,
                                          beam_width=5, max_len=max_len)
            identical += wild.tokens == free.tokens
        elapsed = time.monotonic() - t0

        assert rate == 1.0
        assert identical == len(pairs)
        assert elapsed < 120.0
        report("decoder soundness", decodes=total, satisfaction_rate=rate,
               wildcard_identical=f"{identical}/{len(pairs)}",
               seconds=round(elapsed, 1))


# ---------------------------------------------------------------------------
# Oracle decode equivalence
# ---------------------------------------------------------------------------

class TestOracleDecodeEquivalence:
    def test_full_branching_beam_equals_exhaustive_argmax(self):
        rng = np.random.default_rng(11)
        t0 = time.monotonic()
        mismatches = 0
        for draw in range(100):
            k = int(rng.integers(2, 4))            # K <= 3
            words = "aa" if rng.integers(0, 2) else "aa bb"  # |V| <= 5
            max_len = int(rng.integers(2, 4))      # max_len <= 3
            params = tiny_params(int(rng.integers(0, 10_000)), k=k, words=words)
            table = DataTable((("f", words),))
            want = exhaustive_best(params, table, max_len=max_len)
            got = D.free_generate(params, table, beam_width=10_000,
                                  max_len=max_len)
            ok = (got.token_ids == want[1]
                  and got.states.states == want[2]
                  and abs(got.logprob - want[0]) < 1e-9)
            mismatches += not ok
        elapsed = time.monotonic() - t0
        assert mismatches == 0
        report("oracle decode equivalence", draws=100, mismatches=0,
               seconds=round(elapsed, 1))


# ---------------------------------------------------------------------------
# CRF correctness
# ---------------------------------------------------------------------------

class TestCrfCorrectness:
    def test_viterbi_partition_marginals_vs_enumeration(self):
        rng = np.random.default_rng(3)
        t0 = time.monotonic()
        worst_rel = 0.0
        worst_row = 0.0
        for _ in range(1000):
            T_ = int(rng.integers(1, 7))
            K = int(rng.integers(2, 5))
            em = rng.normal(scale=3.0, size=(T_, K))
            tr = rng.normal(scale=3.0, size=(K, K))
            pot = I.CrfPotentials(em, tr)

            seqs, scores = brute_scores(em, tr)
            best = seqs[int(np.argmax(scores))]
            assert I.viterbi(pot).states == tuple(best)

            m = float(scores.max())
            ref = m + np.log(np.exp(scores - m).sum())
            rel = abs(I.log_partition(pot) - ref) / max(abs(ref), 1e-30)
            worst_rel = max(worst_rel, rel)
            assert rel <= 1e-6

            rows = I.marginals(pot).sum(axis=1)
            worst_row = max(worst_row, float(np.abs(rows - 1.0).max()))
            assert np.allclose(rows, 1.0, atol=1e-6)
        elapsed = time.monotonic() - t0
        report("crf correctness", potentials=1000,
               worst_partition_rel=f"{worst_rel:.2e}",
               worst_marginal_row=f"{worst_row:.2e}",
               seconds=round(elapsed, 1))


# ---------------------------------------------------------------------------
# Gradient gate
# ---------------------------------------------------------------------------

class TestGradientGate:
    def test_analytic_vs_central_differences(self):
        vocab_words = "aa bb cc dd"
        ex = Example(DataTable((("f", "aa bb"), ("g", "cc"))),
                     ("aa", "cc", "bb", "dd"),
                     ControlStateSeq((0, 2, 1, 3)))
        from steergen.core import build_vocab
        vocab = build_vocab([Example(ex.table, tuple(vocab_words.split()))], 1)
        cfg = ModelConfig(vocab_size=len(vocab), k=4, n_fields=2,
                          d_e=6, d_h=8, d_crf=5)
        params = init_params(cfg, ("f", "g"), vocab, seed=5)

        t0 = time.monotonic()
        full = T.grad_check(params, ex, epsilon=1e-5, coords=200, part="full")
        crf = T.grad_check(params, ex, epsilon=1e-5, coords=200, part="crf")
        elapsed = time.monotonic() - t0
        assert full <= 1e-4
        assert crf <= 1e-5
        report("gradient gate", coords=200, full_err=f"{full:.2e}",
               crf_err=f"{crf:.2e}", seconds=round(elapsed, 1))


# ---------------------------------------------------------------------------
# Date task
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def date_model(tmp_path_factory):
    out = tmp_path_factory.mktemp("date-model")
    t0 = time.monotonic()
    params, rep = T.date_task_pipeline(str(out), n_train=5000, n_dev=500, seed=0)
    seconds = time.monotonic() - t0
    return {"params": params, "report": rep, "seconds": seconds, "dir": out}


@pytest.fixture(scope="module")
def date_dev():
    return gen_date_dataset(500, seed=1)


def _format_dfas():
    alphabet = ControlAlphabet(DATE_K)
    return [compile_ast(parse_regex(format_constraint(f), alphabet), alphabet)
            for f in range(8)]


class TestDateTask:
    def test_training_budget(self, date_model):
        assert len(date_model["report"].epochs) <= 20
        assert date_model["seconds"] < 900.0
        report("date training budget",
               epochs=len(date_model["report"].epochs),
               seconds=round(date_model["seconds"], 1),
               early_stopped=date_model["report"].early_stopped)

    def test_heldout_state_accuracy(self, date_model, date_dev):
        params = date_model["params"]
        hits = total = 0
        for ex in date_dev:
            got = infer_states(params, ex.table, ex.text)
            hits += sum(int(a == b) for a, b in zip(got.states, ex.states.states))
            total += len(ex.text)
        acc = hits / total
        assert acc >= 0.95
        report("date state accuracy", accuracy=round(acc, 4), tokens=total)

    def test_gold_constraint_exact_match(self, date_model, date_dev):
        params = date_model["params"]
        dfas = _format_dfas()
        hits = 0
        for ex in date_dev:
            try:
                res = D.constrained_generate(params, ex.table,
                                             dfas[detect_format(ex)],
                                             beam_width=5, max_len=30)
            except NoFeasibleOutput:
                continue
            hits += res.tokens == ex.text
        rate = hits / len(date_dev)
        assert rate >= 0.90
        report("date constrained exact match", rate=round(rate, 4),
               examples=len(date_dev))

    def test_plus_day_state_covers_both_lengths(self, date_model):
        # Day 14 verbalizes as one ordinal token, day 21 as two; the same
        # B+ constraint must admit both.
        params = date_model["params"]
        pattern = format_constraint(0)
        assert "B+" in pattern
        alphabet = ControlAlphabet(DATE_K)
        dfa = compile_ast(parse_regex(pattern, alphabet), alphabet)
        short = D.constrained_generate(params, date_table(14, 9, 2015), dfa,
                                       beam_width=5, max_len=30)
        long = D.constrained_generate(params, date_table(21, 9, 2015), dfa,
                                      beam_width=5, max_len=30)
        day_b = ControlAlphabet(DATE_K).state("B")
        n_short = sum(z == day_b for z in short.states)
        n_long = sum(z == day_b for z in long.states)
        assert accepts(dfa, short.states) and accepts(dfa, long.states)
        assert n_short == 1 and n_long == 2
        report("variable-length day state",
               one_token=detokenize(short.tokens),
               two_token=detokenize(long.tokens))


# ---------------------------------------------------------------------------
# Merge reproduction
# ---------------------------------------------------------------------------

class TestMergeReproduction:
    def test_optional_not_state(self):
        # "it is family friendly ." vs "it is not family friendly .":
        # identical states except one extra for the negation word.
        alphabet = ControlAlphabet(26)
        plain = ControlStateSeq.from_letters("FFCCT").validate(alphabet)
        negated = ControlStateSeq.from_letters("FFNCCT").validate(alphabet)
        merged = merge_examples([plain, negated])

        got = compile_ast(merged, alphabet)
        want = compile_ast(parse_regex("FFCCT|FFNCCT", alphabet), alphabet)
        assert dfa_equivalent(got, want)
        # Exhaustive cross-check over the letters that occur; anything using
        # other letters is rejected by construction of the literals.
        used = sorted({*plain, *negated})
        accepted = {s for length in range(8)
                    for s in itertools.product(used, repeat=length)
                    if accepts(got, s)}
        assert accepted == {tuple(plain), tuple(negated)}

        rendered = render_regex(merged)
        assert "N?" in rendered
        view = to_graph(merged)
        optional_nodes = [n for n in view.nodes if n.get("optional")]
        assert len(optional_nodes) == 1
        assert optional_nodes[0].get("state") == alphabet.state("N")
        report("merge reproduction", regex=rendered)


# ---------------------------------------------------------------------------
# Export fidelity
# ---------------------------------------------------------------------------

class TestExportFidelity:
    def test_bundle_roundtrip_bit_exact_and_tamper(self, date_model,
                                                   date_dev, tmp_path):
        # The checkpoint on disk is the reference weight view; the bundle
        # must reproduce its decodes exactly, not merely closely.
        params = load_checkpoint(str(date_model["dir"] / "model.ckpt"))
        regex = format_constraint(0)
        alphabet = ControlAlphabet(DATE_K)
        dfa = compile_ast(parse_regex(regex, alphabet), alphabet)
        path = tmp_path / "date.zip"
        export_bundle(params, dfa, regex, str(path))

        tables = [ex.table for ex in date_dev[:50]]
        want = decode_batch(params, dfa, tables, beam_width=5, max_len=30)
        got = run_bundle(str(path), tables, beam_width=5, max_len=30)
        assert len(got) == 50
        exact = 0
        for a, b in zip(got, want):
            assert a.feasible == b.feasible
            if a.feasible:
                same = (a.result.tokens == b.result.tokens
                        and a.result.states.states == b.result.states.states
                        and a.result.logprob == b.result.logprob)
                exact += same
        assert exact == sum(t.feasible for t in want)

        tampered = tmp_path / "tampered.zip"
        blob = bytearray(zipfile.ZipFile(path).read("model.ckpt"))
        blob[len(blob) // 2] ^= 0xFF
        rewrite_member(path, tampered, "model.ckpt", bytes(blob))
        with pytest.raises(CompatibilityError, match="hash"):
            run_bundle(str(tampered), tables[:1])
        report("export fidelity", tables=50, bit_exact=exact,
               tamper="detected")


# ---------------------------------------------------------------------------
# Determinism
# ---------------------------------------------------------------------------

class TestDeterminism:
    def test_repeated_pipeline_runs_are_byte_identical(self, tmp_path):
        # Scaled-down corpus: determinism is a property of the code path,
        # not of the corpus size, and two full runs would double suite time.
        dirs = [tmp_path / "run1", tmp_path / "run2"]
        for d in dirs:
            T.date_task_pipeline(str(d), n_train=300, n_dev=60, seed=0,
                                 epochs=3)
        ckpts = [(d / "model.ckpt").read_bytes() for d in dirs]
        reports = [(d / "report.json").read_bytes() for d in dirs]
        assert ckpts[0] == ckpts[1]
        assert reports[0] == reports[1]
        report("determinism", checkpoint_bytes=len(ckpts[0]),
               report_bytes=len(reports[0]), identical=True)
