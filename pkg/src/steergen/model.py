"""Joint generative model p(y, z | x): attention encoder over table cells,
gated recurrent decoder, control-state head, and control-conditioned word
head.

Per-step factorization: a stop gate decides between ending the sequence and
emitting another visible token. Ending routes through the dedicated
terminal control state (index K, outside the user alphabet) whose word head
emits EOS, so constraint automata see exactly the visible tokens. A
sequence's log-probability is

    sum_t [ log(1 - s_t) + log p(z_t) + log p(y_t | z_t) ]
        + log s_{T+1} + log p(EOS | z_terminal)

where s_t is the stop gate at step t.

All math runs through the autodiff ops, so the same code serves training
(pass a dict of Vars) and inference (pass raw arrays, nothing is recorded).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .core import EOS_ID, Vocabulary, tokenize
from .errors import (
    CompatibilityError,
    DomainError,
    IoError,
    NumericalError,
    SchemaError,
)

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    k: int
    n_fields: int
    d_e: int = 32
    d_h: int = 64
    d_crf: int = 32
    copy: bool = False

    def __post_init__(self):
        if self.k < 1:
            raise DomainError("need at least one control state")
        if self.vocab_size < 4:
            raise DomainError("vocabulary too small")


class ModelParams:
    """All learned tensors plus the schema/vocab they are tied to.

    Treated as immutable during inference; only the trainer writes into the
    arrays, and it owns them exclusively while doing so.
    """

    def __init__(self, cfg: ModelConfig, schema: tuple[str, ...],
                 vocab: Vocabulary, tensors: dict[str, np.ndarray]):
        if len(schema) != cfg.n_fields:
            raise DomainError("schema length does not match config")
        if len(vocab) != cfg.vocab_size:
            raise DomainError("vocab size does not match config")
        expected = tensor_shapes(cfg)
        if set(tensors) != set(expected):
            missing = set(expected) ^ set(tensors)
            raise DomainError(f"tensor set mismatch: {sorted(missing)}")
        for name, arr in tensors.items():
            if tuple(arr.shape) != expected[name]:
                raise DomainError(
                    f"tensor {name} has shape {arr.shape}, want {expected[name]}"
                )
            if not np.isfinite(arr).all():
                raise NumericalError(f"tensor {name} contains non-finite values")
        self.cfg = cfg
        self.schema = tuple(schema)
        self.vocab = vocab
        self.tensors = {k: np.asarray(v, dtype=np.float64) for k, v in tensors.items()}
        self._field_index = {f: i for i, f in enumerate(schema)}

    def field_index(self, name: str) -> int:
        if name not in self._field_index:
            raise SchemaError(f"field {name!r} not in model schema {self.schema}")
        return self._field_index[name]

    def var_view(self) -> dict[str, ad.Var]:
        return {k: ad.Var(v) for k, v in self.tensors.items()}


def tensor_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    V, K, F = cfg.vocab_size, cfg.k, cfg.n_fields
    de, dh, dc = cfg.d_e, cfg.d_h, cfg.d_crf
    d_in = 2 * de + dh  # decoder cell input: [word emb; state emb; context]
    d_crf_in = de + F   # CRF encoder input: [word emb; match features]
    shapes: dict[str, tuple[int, ...]] = {
        "field_E": (F, de),
        "val_E": (V, de),
        "word_E": (V, de),
        "g_E": (K + 1, de),
        "enc_W": (dh, 2 * de),
        "enc_b": (dh,),
        "init_W": (dh, dh),
        "init_b": (dh,),
        "att_W": (dh, dh),
        "state_W": (K, 2 * dh),
        "word_W": (V, 2 * dh),
        "wordg_W": (2 * dh, de),
        "stop_w": (2 * dh,),
        "stop_b": (1,),
        "crf_E": (V, de),
        "crf_emit_W": (K, 2 * dc),
        "crf_emit_b": (K,),
        "crf_trans": (K, K),
    }
    for gate in ("r", "u", "c"):
        shapes[f"dec_W_{gate}"] = (dh, d_in)
        shapes[f"dec_U_{gate}"] = (dh, dh)
        shapes[f"dec_b_{gate}"] = (dh,)
        for direction in ("fwd", "bwd"):
            shapes[f"crf_{direction}_W_{gate}"] = (dc, d_crf_in)
            shapes[f"crf_{direction}_U_{gate}"] = (dc, dc)
            shapes[f"crf_{direction}_b_{gate}"] = (dc,)
    if cfg.copy:
        shapes["copy_w"] = (2 * dh,)
        shapes["copy_b"] = (1,)
    return shapes


def init_params(cfg: ModelConfig, schema: tuple[str, ...], vocab: Vocabulary,
                seed: int) -> ModelParams:
    """uniform(-0.08, 0.08) weights, zero biases, fully seeded."""
    rng = np.random.Generator(np.random.PCG64(seed))
    tensors: dict[str, np.ndarray] = {}
    for name, shape in sorted(tensor_shapes(cfg).items()):
        if name.endswith("_b") or "_b_" in name:
            tensors[name] = np.zeros(shape)
        else:
            tensors[name] = rng.uniform(-0.08, 0.08, size=shape)
    return ModelParams(cfg, schema, vocab, tensors)


# ---------------------------------------------------------------------------
# Encoder
# ---------------------------------------------------------------------------

@dataclass
class EncodedInput:
    cells: ad.Var            # (C, d_h) one encoding per table entry
    pooled: ad.Var           # (d_h,)
    copy_dist: np.ndarray | None  # (C, V) per-cell value-token distribution


@dataclass
class DecoderState:
    h: ad.Var
    t: int
    enc: EncodedInput

    def __post_init__(self):
        if self.t < 0:
            raise DomainError("negative time index")


def encode_table(params: ModelParams, table, P=None) -> EncodedInput:
    P = P or params.tensors
    cells = []
    copy_rows = []
    for name, value in table.entries:
        fi = params.field_index(name)
        ids = params.vocab.encode(tokenize(value))
        femb = ad.row(P["field_E"], fi)
        vemb = ad.scale(ad.add_n([ad.row(P["val_E"], i) for i in ids]), 1.0 / len(ids))
        cell = ad.tanh(ad.add(ad.matvec(P["enc_W"], ad.concat([femb, vemb])), P["enc_b"]))
        cells.append(cell)
        if params.cfg.copy:
            dist = np.zeros(params.cfg.vocab_size)
            for i in ids:
                dist[i] += 1.0 / len(ids)
            copy_rows.append(dist)
    mat = ad.stack(cells)
    pooled = ad.scale(ad.add_n(cells), 1.0 / len(cells))
    copy_dist = np.array(copy_rows) if params.cfg.copy else None
    return EncodedInput(cells=mat, pooled=pooled, copy_dist=copy_dist)


def initial_state(params: ModelParams, enc: EncodedInput, P=None) -> DecoderState:
    P = P or params.tensors
    h = ad.tanh(ad.add(ad.matvec(P["init_W"], enc.pooled), P["init_b"]))
    return DecoderState(h=h, t=0, enc=enc)


class StepContext:
    """Everything derivable from one decoder state: the attention context,
    the [h ; ctx] representation, and the three heads. Built once per step
    so beam search and scoring don't recompute attention per head."""

    def __init__(self, params: ModelParams, dstate: DecoderState, P=None):
        P = P or params.tensors
        if not np.isfinite(dstate.h.value).all():
            raise NumericalError("decoder hidden state is non-finite")
        self.params = params
        self.P = P
        self.dstate = dstate
        scores = ad.matvec(dstate.enc.cells, ad.tmatvec(P["att_W"], dstate.h))
        self.att_weights = ad.softmax(scores)
        self.ctx = ad.tmatvec(dstate.enc.cells, self.att_weights)
        self.rep = ad.concat([dstate.h, self.ctx])

    def state_logits(self) -> ad.Var:
        return ad.matvec(self.P["state_W"], self.rep)

    def state_logprobs(self) -> ad.Var:
        return ad.log_softmax(self.state_logits())

    def stop_logprobs(self) -> tuple[ad.Var, ad.Var]:
        """(log s_t, log(1 - s_t)) for the stop gate."""
        gate = ad.add(ad.dot(self.P["stop_w"], self.rep),
                      ad.take(self.P["stop_b"], (0,)))
        return ad.log(ad.sigmoid(gate)), ad.log(ad.sigmoid(ad.neg(gate)))

    def word_scores(self, z: int, normalize: bool = False) -> ad.Var:
        params, P = self.params, self.P
        u = ad.add(self.rep, ad.matvec(P["wordg_W"], ad.row(P["g_E"], z)))
        logits = ad.matvec(P["word_W"], u)
        if not params.cfg.copy:
            return ad.log_softmax(logits) if normalize else logits
        gate = ad.sigmoid(ad.add(ad.dot(P["copy_w"], u),
                                 ad.take(P["copy_b"], (0,))))
        gen = ad.softmax(logits)
        pointed = ad.tmatvec(self.dstate.enc.copy_dist, self.att_weights)
        mixed = ad.add(ad.mul(ad.sub(1.0, gate), gen), ad.mul(gate, pointed))
        return ad.log(mixed)

    def advance(self, z: int, y: int) -> DecoderState:
        params, P = self.params, self.P
        if not 0 <= z < params.cfg.k:
            raise DomainError(
                f"control state {z} outside alphabet of size {params.cfg.k}"
            )
        if not 0 <= y < params.cfg.vocab_size:
            raise DomainError(f"token id {y} outside vocabulary")
        x = ad.concat([ad.row(P["word_E"], y), ad.row(P["g_E"], z), self.ctx])
        h = _gru_step(P, "dec", x, self.dstate.h)
        return DecoderState(h=h, t=self.dstate.t + 1, enc=self.dstate.enc)


def prepare_step(params: ModelParams, dstate: DecoderState, P=None) -> StepContext:
    return StepContext(params, dstate, P)


# ---------------------------------------------------------------------------
# Heads (standalone entry points)
# ---------------------------------------------------------------------------

def state_logits(params: ModelParams, dstate: DecoderState, P=None) -> ad.Var:
    return StepContext(params, dstate, P).state_logits()


def stop_logprobs(params: ModelParams, dstate: DecoderState, P=None) -> tuple[ad.Var, ad.Var]:
    return StepContext(params, dstate, P).stop_logprobs()


def word_logits(params: ModelParams, dstate: DecoderState, z: int, P=None) -> ad.Var:
    if not 0 <= z < params.cfg.k:
        raise DomainError(f"control state {z} outside alphabet of size {params.cfg.k}")
    return StepContext(params, dstate, P).word_scores(z)


def word_logprobs(params: ModelParams, dstate: DecoderState, z: int, P=None) -> ad.Var:
    """Normalized log p(y | z); accepts the terminal state index K."""
    if not 0 <= z <= params.cfg.k:
        raise DomainError(f"control state {z} out of range")
    return StepContext(params, dstate, P).word_scores(z, normalize=True)


def advance(params: ModelParams, dstate: DecoderState, z: int, y: int, P=None) -> DecoderState:
    return StepContext(params, dstate, P).advance(z, y)


def _gru_step(P, prefix: str, x: ad.Var, h: ad.Var) -> ad.Var:
    def gate(name):
        return ad.add(
            ad.add(ad.matvec(P[f"{prefix}_W_{name}"], x),
                   ad.matvec(P[f"{prefix}_U_{name}"], h)),
            P[f"{prefix}_b_{name}"],
        )

    r = ad.sigmoid(gate("r"))
    u = ad.sigmoid(gate("u"))
    c = ad.tanh(ad.add(
        ad.add(ad.matvec(P[f"{prefix}_W_c"], x),
               ad.matvec(P[f"{prefix}_U_c"], ad.mul(r, h))),
        P[f"{prefix}_b_c"],
    ))
    one = ad.sub(1.0, u)
    return ad.add(ad.mul(one, h), ad.mul(u, c))


# ---------------------------------------------------------------------------
# Sequence scoring
# ---------------------------------------------------------------------------

def score_sequence(params: ModelParams, table, y_ids, z_ids, P=None) -> ad.Var:
    """log p(y, z | x) including the terminal step."""
    if len(y_ids) != len(z_ids):
        raise DomainError(
            f"{len(y_ids)} tokens vs {len(z_ids)} control states"
        )
    P = P or params.tensors
    enc = encode_table(params, table, P)
    dstate = initial_state(params, enc, P)
    terms = []
    for y, z in zip(y_ids, z_ids):
        step = StepContext(params, dstate, P)
        _, log_cont = step.stop_logprobs()
        terms.append(log_cont)
        terms.append(ad.take(step.state_logprobs(), (z,)))
        terms.append(ad.take(step.word_scores(z, normalize=True), (y,)))
        dstate = step.advance(z, y)
    step = StepContext(params, dstate, P)
    log_stop, _ = step.stop_logprobs()
    terms.append(log_stop)
    terms.append(ad.take(step.word_scores(params.cfg.k, normalize=True), (EOS_ID,)))
    return ad.add_n(terms)


# ---------------------------------------------------------------------------
# Checkpoint serialization
# ---------------------------------------------------------------------------

def save_checkpoint(params: ModelParams, path: str):
    with open(path, "wb") as fh:
        fh.write(checkpoint_to_bytes(params))


def checkpoint_to_bytes(params: ModelParams) -> bytes:
    header = {
        "version": CHECKPOINT_VERSION,
        "dims": {
            "d_e": params.cfg.d_e,
            "d_h": params.cfg.d_h,
            "d_crf": params.cfg.d_crf,
            "vocab_size": params.cfg.vocab_size,
            "n_fields": params.cfg.n_fields,
        },
        "k": params.cfg.k,
        "flags": {"copy": params.cfg.copy},
        "schema": list(params.schema),
        "vocab": params.vocab.tokens,
        "vocab_sha256": params.vocab.content_hash(),
        "tensors": [
            [name, list(params.tensors[name].shape)]
            for name in sorted(params.tensors)
        ],
    }
    blob = np.concatenate(
        [params.tensors[name].ravel() for name in sorted(params.tensors)]
    ).astype("<f4").tobytes()
    return json.dumps(header, sort_keys=True).encode("utf-8") + b"\n" + blob


def load_checkpoint(path: str) -> ModelParams:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read checkpoint: {exc}") from exc
    return checkpoint_from_bytes(raw)


def checkpoint_from_bytes(raw: bytes) -> ModelParams:
    nl = raw.find(b"\n")
    if nl < 0:
        raise CompatibilityError("checkpoint has no header line")
    try:
        header = json.loads(raw[:nl].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CompatibilityError(f"unreadable checkpoint header: {exc}") from exc
    if header.get("version") != CHECKPOINT_VERSION:
        raise CompatibilityError(
            f"checkpoint version {header.get('version')} unsupported"
        )
    dims = header["dims"]
    cfg = ModelConfig(
        vocab_size=dims["vocab_size"],
        k=header["k"],
        n_fields=dims["n_fields"],
        d_e=dims["d_e"],
        d_h=dims["d_h"],
        d_crf=dims["d_crf"],
        copy=header["flags"]["copy"],
    )
    vocab = Vocabulary(header["vocab"])
    if vocab.content_hash() != header["vocab_sha256"]:
        raise CompatibilityError("vocabulary hash mismatch in checkpoint header")
    blob = raw[nl + 1 :]
    flat = np.frombuffer(blob, dtype="<f4")
    tensors: dict[str, np.ndarray] = {}
    off = 0
    for name, shape in header["tensors"]:
        n = int(np.prod(shape)) if shape else 1
        chunk = flat[off : off + n]
        if chunk.size != n:
            raise CompatibilityError("checkpoint blob truncated")
        tensors[name] = chunk.astype(np.float64).reshape(shape)
        off += n
    if off != flat.size:
        raise CompatibilityError("checkpoint blob has trailing data")
    return ModelParams(cfg, tuple(header["schema"]), vocab, tensors)
