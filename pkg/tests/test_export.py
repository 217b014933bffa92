import json
import zipfile

import pytest

from steergen import export as X
from steergen import model as M
from steergen.constraint import ConstraintDfa, accepts, compile_ast, parse_regex
from steergen.core import ControlAlphabet, DataTable, Example, build_vocab, tokenize
from steergen.decode import constrained_generate, free_generate
from steergen.errors import CompatibilityError, ExportError, IoError


def tiny_params(seed=0, k=3, words="aa bb cc"):
    vocab = build_vocab([Example(DataTable((("f", "x"),)), tuple(tokenize(words)))], 1)
    cfg = M.ModelConfig(vocab_size=len(vocab), k=k, n_fields=1, d_e=3, d_h=4, d_crf=2)
    return M.init_params(cfg, ("f",), vocab, seed)


def dfa_for(pattern, k=3):
    alphabet = ControlAlphabet(k)
    return compile_ast(parse_regex(pattern, alphabet), alphabet)


def saved_view(params):
    """The model as it exists after any serialization: float32 weights."""
    return M.checkpoint_from_bytes(M.checkpoint_to_bytes(params))


TABLES = [DataTable((("f", v),)) for v in ("aa", "bb", "cc", "aa bb")]


def rewrite_member(src, dst, name, payload):
    with zipfile.ZipFile(src) as zf:
        members = {n: zf.read(n) for n in zf.namelist()}
    members[name] = payload
    with zipfile.ZipFile(dst, "w") as zf:
        for n, blob in members.items():
            zf.writestr(n, blob)


class TestExportBundle:
    def test_roundtrip_preserves_weights_and_constraint(self, tmp_path):
        params, dfa = tiny_params(1), dfa_for("A.*")
        path = str(tmp_path / "b.zip")
        bundle = X.export_bundle(params, dfa, "A.*", path)
        loaded = X.load_bundle(path)
        assert loaded.regex == "A.*"
        assert loaded.version == X.BUNDLE_VERSION
        assert loaded.content_hash == bundle.content_hash
        assert loaded.dfa == dfa
        want = saved_view(params)
        assert set(loaded.params.tensors) == set(want.tensors)
        for name, arr in want.tensors.items():
            assert (loaded.params.tensors[name] == arr).all()
        assert loaded.params.vocab.tokens == params.vocab.tokens

    def test_empty_language_rejected(self, tmp_path):
        dead = ConstraintDfa(k=3, n_states=1, start=0, accepting=frozenset(),
                             delta=((0, 0, 0),))
        with pytest.raises(ExportError):
            X.export_bundle(tiny_params(), dead, "<dead>",
                            str(tmp_path / "b.zip"))
        assert not (tmp_path / "b.zip").exists()

    def test_decode_equality_after_roundtrip(self, tmp_path):
        params, dfa = tiny_params(2), dfa_for(".?.?")
        path = str(tmp_path / "b.zip")
        X.export_bundle(params, dfa, ".?.?", path)
        base = saved_view(params)
        outs = X.run_bundle(path, TABLES, beam_width=4, max_len=4)
        for table, got in zip(TABLES, outs):
            want = constrained_generate(base, table, dfa, beam_width=4,
                                        max_len=4)
            assert got.feasible
            assert got.result.tokens == want.tokens
            assert got.result.states.states == want.states.states
            assert got.result.logprob == want.logprob


class TestLoadFailures:
    def make(self, tmp_path, regex="A.*"):
        path = str(tmp_path / "b.zip")
        X.export_bundle(tiny_params(), dfa_for(regex), regex, path)
        return path

    def test_missing_file(self, tmp_path):
        with pytest.raises(IoError):
            X.load_bundle(str(tmp_path / "absent.zip"))

    def test_not_an_archive(self, tmp_path):
        path = tmp_path / "junk.zip"
        path.write_bytes(b"this is not a zip archive")
        with pytest.raises(CompatibilityError):
            X.load_bundle(str(path))

    def test_missing_member(self, tmp_path):
        src = self.make(tmp_path)
        dst = str(tmp_path / "cut.zip")
        with zipfile.ZipFile(src) as zf:
            members = {n: zf.read(n) for n in zf.namelist() if n != "dfa.json"}
        with zipfile.ZipFile(dst, "w") as zf:
            for n, blob in members.items():
                zf.writestr(n, blob)
        with pytest.raises(CompatibilityError):
            X.load_bundle(dst)

    def test_tampered_weights_detected(self, tmp_path):
        src = self.make(tmp_path)
        with zipfile.ZipFile(src) as zf:
            ckpt = bytearray(zf.read("model.ckpt"))
        ckpt[-1] ^= 0xFF
        dst = str(tmp_path / "evil.zip")
        rewrite_member(src, dst, "model.ckpt", bytes(ckpt))
        with pytest.raises(CompatibilityError, match="hash"):
            X.load_bundle(dst)

    def test_tampered_constraint_detected(self, tmp_path):
        src = self.make(tmp_path)
        with zipfile.ZipFile(src) as zf:
            dfa_obj = json.loads(zf.read("dfa.json"))
        dfa_obj["accepting"] = [0]  # silently accept everything
        dst = str(tmp_path / "evil.zip")
        rewrite_member(src, dst, "dfa.json",
                       json.dumps(dfa_obj, sort_keys=True).encode())
        with pytest.raises(CompatibilityError, match="hash"):
            X.load_bundle(dst)

    def test_tampered_regex_detected(self, tmp_path):
        src = self.make(tmp_path)
        with zipfile.ZipFile(src) as zf:
            manifest = json.loads(zf.read("manifest.json"))
        manifest["regex"] = "B.*"
        dst = str(tmp_path / "evil.zip")
        rewrite_member(src, dst, "manifest.json",
                       json.dumps(manifest, sort_keys=True).encode())
        with pytest.raises(CompatibilityError, match="hash"):
            X.load_bundle(dst)

    def test_version_bump_rejected(self, tmp_path):
        src = self.make(tmp_path)
        with zipfile.ZipFile(src) as zf:
            manifest = json.loads(zf.read("manifest.json"))
        manifest["version"] = X.BUNDLE_VERSION + 1
        dst = str(tmp_path / "next.zip")
        rewrite_member(src, dst, "manifest.json",
                       json.dumps(manifest, sort_keys=True).encode())
        with pytest.raises(CompatibilityError, match="version"):
            X.load_bundle(dst)


class TestRunBundle:
    def test_single_table(self, tmp_path):
        path = str(tmp_path / "b.zip")
        dfa = dfa_for(".*")
        X.export_bundle(tiny_params(), dfa, ".*", path)
        outs = X.run_bundle(path, TABLES[0], max_len=3)
        assert len(outs) == 1 and outs[0].feasible
        assert accepts(dfa, outs[0].result.states)

    def test_dataset_of_examples(self, tmp_path):
        path = str(tmp_path / "b.zip")
        X.export_bundle(tiny_params(3), dfa_for(".*"), ".*", path)
        data = [Example(t, ("aa",)) for t in TABLES]
        outs = X.run_bundle(path, data, max_len=3)
        assert [o.table for o in outs] == TABLES

    def test_every_output_satisfies_embedded_dfa(self, tmp_path):
        path = str(tmp_path / "b.zip")
        dfa = dfa_for("(A|B).*")
        X.export_bundle(tiny_params(4), dfa, "(A|B).*", path)
        outs = X.run_bundle(path, TABLES, max_len=4)
        assert all(o.feasible for o in outs)
        assert all(accepts(dfa, o.result.states) for o in outs)

    def test_infeasible_inputs_reported_not_skipped(self, tmp_path):
        path = str(tmp_path / "b.zip")
        X.export_bundle(tiny_params(), dfa_for("AAAAAA"), "AAAAAA", path)
        outs = X.run_bundle(path, TABLES, max_len=3)
        assert len(outs) == len(TABLES)
        assert all(not o.feasible and o.result is None for o in outs)

    def test_dotstar_bundle_equals_free_generation(self, tmp_path):
        params = tiny_params(5)
        path = str(tmp_path / "b.zip")
        X.export_bundle(params, dfa_for(".*"), ".*", path)
        outs = X.run_bundle(path, TABLES, max_len=4)
        base = saved_view(params)
        for table, got in zip(TABLES, outs):
            want = free_generate(base, table, max_len=4)
            assert got.result.tokens == want.tokens
            assert got.result.states.states == want.states.states
