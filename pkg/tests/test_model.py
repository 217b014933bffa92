import numpy as np
import pytest

from steergen import model as M
from steergen.core import EOS_ID, DataTable, Example, Vocabulary, build_vocab, tokenize
from steergen.errors import (
    CompatibilityError,
    DomainError,
    NumericalError,
    SchemaError,
)

PHOENIX = DataTable(
    (
        ("name", "the phoenix"),
        ("eat type", "pub"),
        ("food", "french"),
        ("area", "city center"),
        ("near", "cafe sicilia"),
    )
)


def tiny_vocab(words="alpha beta gamma"):
    return build_vocab([Example(DataTable((("f", "x"),)), tuple(tokenize(words)))], 1)


def make_params(seed=0, k=2, d_e=3, d_h=2, copy=False, schema=("f",), words="alpha beta gamma x"):
    vocab = tiny_vocab(words)
    cfg = M.ModelConfig(
        vocab_size=len(vocab), k=k, n_fields=len(schema),
        d_e=d_e, d_h=d_h, d_crf=2, copy=copy,
    )
    return M.init_params(cfg, schema, vocab, seed)


def zeroed(params):
    zt = {k: np.zeros_like(v) for k, v in params.tensors.items()}
    return M.ModelParams(params.cfg, params.schema, params.vocab, zt)


def _softmax(x):
    e = np.exp(x - x.max())
    return e / e.sum()


def _lse(x):
    m = x.max()
    return m + np.log(np.exp(x - m).sum())


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def manual_score(params, table, y_ids, z_ids):
    """Plain-numpy reimplementation of the scoring math, kept independent
    of the model module's computation graph."""
    T = params.tensors
    vocab = params.vocab
    cells = []
    for name, value in table.entries:
        fi = params.schema.index(name)
        ids = vocab.encode(tokenize(value))
        femb = T["field_E"][fi]
        vemb = T["val_E"][ids].mean(axis=0)
        cells.append(np.tanh(T["enc_W"] @ np.concatenate([femb, vemb]) + T["enc_b"]))
    E = np.stack(cells)
    pooled = E.mean(axis=0)
    h = np.tanh(T["init_W"] @ pooled + T["init_b"])

    def attend(h):
        w = _softmax(E @ (T["att_W"].T @ h))
        return E.T @ w, w

    def gru(x, h):
        r = _sigmoid(T["dec_W_r"] @ x + T["dec_U_r"] @ h + T["dec_b_r"])
        u = _sigmoid(T["dec_W_u"] @ x + T["dec_U_u"] @ h + T["dec_b_u"])
        c = np.tanh(T["dec_W_c"] @ x + T["dec_U_c"] @ (r * h) + T["dec_b_c"])
        return (1 - u) * h + u * c

    total = 0.0
    for y, z in zip(y_ids, z_ids):
        ctx, _ = attend(h)
        rep = np.concatenate([h, ctx])
        gate = T["stop_w"] @ rep + T["stop_b"][0]
        total += np.log(_sigmoid(-gate))
        sl = T["state_W"] @ rep
        total += sl[z] - _lse(sl)
        u = rep + T["wordg_W"] @ T["g_E"][z]
        wl = T["word_W"] @ u
        total += wl[y] - _lse(wl)
        h = gru(np.concatenate([T["word_E"][y], T["g_E"][z], ctx]), h)
    ctx, _ = attend(h)
    rep = np.concatenate([h, ctx])
    gate = T["stop_w"] @ rep + T["stop_b"][0]
    total += np.log(_sigmoid(gate))
    u = rep + T["wordg_W"] @ T["g_E"][params.cfg.k]
    wl = T["word_W"] @ u
    total += wl[EOS_ID] - _lse(wl)
    return float(total)


class TestEncodeTable:
    def test_one_cell_per_entry(self):
        params = make_params(schema=("a", "b", "c"))
        table = DataTable((("a", "alpha"), ("b", "beta"), ("c", "gamma")))
        enc = M.encode_table(params, table)
        assert enc.cells.value.shape == (3, params.cfg.d_h)

    def test_phoenix_table_five_cells(self):
        params = make_params(
            schema=("name", "eat type", "food", "area", "near"),
            words="the phoenix pub french city center cafe sicilia",
        )
        enc = M.encode_table(params, PHOENIX)
        assert enc.cells.value.shape[0] == 5

    def test_permutation_equivariance(self):
        params = make_params(schema=("a", "b", "c"))
        t1 = DataTable((("a", "alpha"), ("b", "beta"), ("c", "gamma")))
        t2 = DataTable((("c", "gamma"), ("a", "alpha"), ("b", "beta")))
        e1 = M.encode_table(params, t1).cells.value
        e2 = M.encode_table(params, t2).cells.value
        assert np.array_equal(e1[[2, 0, 1]], e2)

    def test_unknown_field_rejected(self):
        params = make_params(schema=("a",))
        with pytest.raises(SchemaError):
            M.encode_table(params, DataTable((("zz", "alpha"),)))


def fresh_state(params, table=None):
    table = table or DataTable((("f", "alpha"),))
    enc = M.encode_table(params, table)
    return M.initial_state(params, enc)


class TestStateLogits:
    def test_zero_params_uniform(self):
        params = zeroed(make_params(k=4))
        dstate = fresh_state(params)
        probs = _softmax(M.state_logits(params, dstate).value)
        assert np.allclose(probs, 0.25, atol=1e-12)

    def test_softmax_normalizes(self):
        params = make_params(seed=3, k=5)
        dstate = fresh_state(params)
        probs = _softmax(M.state_logits(params, dstate).value)
        assert probs.sum() == pytest.approx(1.0, abs=1e-9)

    def test_nonfinite_hidden_rejected(self):
        params = make_params()
        dstate = fresh_state(params)
        import steergen.autodiff as ad
        bad = M.DecoderState(h=ad.Var(np.full(params.cfg.d_h, np.inf)),
                             t=0, enc=dstate.enc)
        with pytest.raises(NumericalError):
            M.state_logits(params, bad)


class TestWordLogits:
    def test_zero_params_uniform(self):
        params = zeroed(make_params())
        dstate = fresh_state(params)
        probs = _softmax(M.word_logits(params, dstate, 0).value)
        assert np.allclose(probs, 1.0 / len(params.vocab), atol=1e-12)

    def test_state_out_of_range(self):
        params = make_params(k=2)
        dstate = fresh_state(params)
        with pytest.raises(DomainError):
            M.word_logits(params, dstate, 2)

    def test_control_state_changes_distribution(self):
        params = make_params(seed=5)
        dstate = fresh_state(params)
        p0 = M.word_logits(params, dstate, 0).value
        p1 = M.word_logits(params, dstate, 1).value
        assert not np.allclose(p0, p1)

    def test_entropy_positive(self):
        params = make_params(seed=7)
        dstate = fresh_state(params)
        p = _softmax(M.word_logits(params, dstate, 0).value)
        entropy = -(p * np.log(p)).sum()
        assert entropy > 0.1

    def test_logprobs_normalized_with_copy(self):
        params = make_params(seed=2, copy=True)
        dstate = fresh_state(params)
        lp = M.word_logprobs(params, dstate, 0).value
        assert np.exp(lp).sum() == pytest.approx(1.0, abs=1e-9)
        assert np.exp(M.word_logprobs(params, dstate, params.cfg.k).value).sum() == (
            pytest.approx(1.0, abs=1e-9)
        )


class TestAdvance:
    def test_shape_and_time(self):
        params = make_params()
        d0 = fresh_state(params)
        d1 = M.advance(params, d0, 1, 3)
        assert d1.h.value.shape == d0.h.value.shape
        assert d1.t == 1

    def test_deterministic(self):
        params = make_params()
        d0 = fresh_state(params)
        a = M.advance(params, d0, 0, 3).h.value
        b = M.advance(params, d0, 0, 3).h.value
        assert np.array_equal(a, b)

    def test_bad_ids(self):
        params = make_params(k=2)
        d0 = fresh_state(params)
        with pytest.raises(DomainError):
            M.advance(params, d0, 2, 0)
        with pytest.raises(DomainError):
            M.advance(params, d0, 0, 99)


class TestScoreSequence:
    def test_matches_manual_arithmetic(self):
        params = make_params(seed=11, k=2, d_e=3, d_h=2)
        table = DataTable((("f", "alpha beta"),))
        y = params.vocab.encode(["alpha", "x"])
        z = [0, 1]
        got = M.score_sequence(params, table, y, z).item()
        want = manual_score(params, table, y, z)
        assert got == pytest.approx(want, rel=1e-9)
        assert got < 0

    def test_stepwise_consistency(self):
        params = make_params(seed=4, k=3)
        table = DataTable((("f", "alpha"),))
        y = params.vocab.encode(["beta", "gamma", "alpha"])
        z = [0, 2, 1]
        total = 0.0
        dstate = fresh_state(params, table)
        for yi, zi in zip(y, z):
            _, log_cont = M.stop_logprobs(params, dstate)
            total += log_cont.item()
            sl = M.state_logits(params, dstate).value
            total += sl[zi] - _lse(sl)
            total += M.word_logprobs(params, dstate, zi).value[yi]
            dstate = M.advance(params, dstate, zi, yi)
        log_stop, _ = M.stop_logprobs(params, dstate)
        total += log_stop.item()
        total += M.word_logprobs(params, dstate, params.cfg.k).value[EOS_ID]
        assert M.score_sequence(params, table, y, z).item() == pytest.approx(
            total, abs=1e-9
        )

    def test_length_mismatch(self):
        params = make_params()
        with pytest.raises(DomainError):
            M.score_sequence(params, DataTable((("f", "alpha"),)), [3], [0, 1])

    def test_exhaustive_mass_at_most_one(self):
        params = make_params(seed=9, k=2)
        table = DataTable((("f", "alpha"),))
        V, K = params.cfg.vocab_size, params.cfg.k
        total = np.exp(M.score_sequence(params, table, [], []).item())
        for T in (1, 2):
            for ys in np.ndindex(*([V] * T)):
                for zs in np.ndindex(*([K] * T)):
                    total += np.exp(
                        M.score_sequence(params, table, list(ys), list(zs)).item()
                    )
        assert total <= 1.0 + 1e-9

    def test_copy_model_scores_finite(self):
        params = make_params(seed=13, copy=True)
        table = DataTable((("f", "alpha beta"),))
        y = params.vocab.encode(["alpha", "beta"])
        s = M.score_sequence(params, table, y, [0, 1]).item()
        assert np.isfinite(s) and s < 0


class TestCheckpoint:
    def test_roundtrip(self, tmp_path):
        params = make_params(seed=21, k=3, copy=True)
        path = str(tmp_path / "m.ckpt")
        M.save_checkpoint(params, path)
        loaded = M.load_checkpoint(path)
        assert loaded.cfg == params.cfg
        assert loaded.schema == params.schema
        assert loaded.vocab == params.vocab
        for name in params.tensors:
            assert np.allclose(loaded.tensors[name], params.tensors[name], atol=1e-6)

    def test_second_roundtrip_byte_identical(self, tmp_path):
        params = make_params(seed=22)
        p1, p2 = str(tmp_path / "a.ckpt"), str(tmp_path / "b.ckpt")
        M.save_checkpoint(params, p1)
        M.save_checkpoint(M.load_checkpoint(p1), p2)
        assert open(p1, "rb").read() == open(p2, "rb").read()

    def test_bad_version(self, tmp_path):
        params = make_params()
        path = str(tmp_path / "m.ckpt")
        M.save_checkpoint(params, path)
        raw = open(path, "rb").read()
        hacked = raw.replace(b'"version": 1', b'"version": 9', 1)
        open(path, "wb").write(hacked)
        with pytest.raises(CompatibilityError):
            M.load_checkpoint(path)

    def test_truncated_blob(self, tmp_path):
        params = make_params()
        path = str(tmp_path / "m.ckpt")
        M.save_checkpoint(params, path)
        raw = open(path, "rb").read()
        open(path, "wb").write(raw[:-40])
        with pytest.raises(CompatibilityError):
            M.load_checkpoint(path)

    def test_vocab_hash_mismatch(self, tmp_path):
        params = make_params()
        path = str(tmp_path / "m.ckpt")
        M.save_checkpoint(params, path)
        raw = open(path, "rb").read()
        nl = raw.find(b"\n")
        import json

        header = json.loads(raw[:nl])
        header["vocab"][3] = "swapped"
        open(path, "wb").write(json.dumps(header).encode() + raw[nl:])
        with pytest.raises(CompatibilityError):
            M.load_checkpoint(path)
