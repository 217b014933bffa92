"""Inference network q(z | x, y): a linear-chain CRF over control states.

The CRF is neurally parameterized: emission scores come from a bidirectional
recurrent encoder run over the output tokens, where each token is represented
by its embedding concatenated with binary table-match features (does this
token appear verbatim inside the value of field f).  Transition scores are a
learned K x K table shared across positions.

Potentials are built through the autodiff layer so the CRF log-likelihood is
differentiable during training; the decoding-time algorithms (Viterbi,
forward-backward) run on the raw score arrays in log space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .core import DataTable, ControlStateSeq, tokenize
from .errors import DomainError, NumericalError, SchemaError
from .model import ModelParams, _gru_step


@dataclass(frozen=True)
class CrfPotentials:
    """Scores of a linear-chain CRF: emissions (T, K) and transitions (K, K).

    The sequence score is sum_t emissions[t, z_t] + sum_{t>0}
    transitions[z_{t-1}, z_t].
    """

    emissions: ad.Var
    transitions: ad.Var

    def __post_init__(self):
        for name in ("emissions", "transitions"):
            v = getattr(self, name)
            if not isinstance(v, ad.Var):
                object.__setattr__(self, name, ad.as_var(v))
        em, tr = self.emissions.value, self.transitions.value
        if em.ndim != 2 or em.shape[0] < 1:
            raise DomainError("emissions must be a T x K matrix with T >= 1")
        if tr.shape != (em.shape[1], em.shape[1]):
            raise DomainError("transitions must be K x K")
        if not (np.isfinite(em).all() and np.isfinite(tr).all()):
            raise NumericalError("non-finite CRF potentials")

    @property
    def length(self) -> int:
        return self.emissions.value.shape[0]

    @property
    def k(self) -> int:
        return self.emissions.value.shape[1]


def match_features(schema: tuple[str, ...], table: DataTable, tokens) -> np.ndarray:
    """Binary (T, F) matrix: tokens[t] equals some value token of field f."""
    values = dict(table.entries)
    for name in values:
        if name not in schema:
            raise SchemaError(f"unknown field: {name!r}")
    token_sets = [frozenset(tokenize(values.get(name, ""))) for name in schema]
    feats = np.zeros((len(tokens), len(schema)), dtype=np.float64)
    for t, tok in enumerate(tokens):
        for f, toks in enumerate(token_sets):
            if tok in toks:
                feats[t, f] = 1.0
    return feats


def crf_potentials(params: ModelParams, table: DataTable, tokens, P=None) -> CrfPotentials:
    """Emission and transition scores for the token sequence `tokens`.

    `tokens` are surface strings; unknown ones embed as UNK but still
    contribute match features, which is what lets the CRF label rare
    values it has never seen as words.
    """
    tokens = list(tokens)
    if not tokens:
        raise DomainError("cannot build potentials for an empty sequence")
    if P is None:
        P = params.var_view()
    feats = match_features(params.schema, table, tokens)
    ids = params.vocab.encode(tokens)
    xs = [ad.concat([ad.row(P["crf_E"], i), ad.as_var(feats[t])])
          for t, i in enumerate(ids)]

    d = params.cfg.d_crf
    fwd, bwd = [], []
    h = ad.as_var(np.zeros(d))
    for x in xs:
        h = _gru_step(P, "crf_fwd", x, h)
        fwd.append(h)
    h = ad.as_var(np.zeros(d))
    for x in reversed(xs):
        h = _gru_step(P, "crf_bwd", x, h)
        bwd.append(h)
    bwd.reverse()

    rows = [ad.add(ad.matvec(P["crf_emit_W"], ad.concat([f, b])), P["crf_emit_b"])
            for f, b in zip(fwd, bwd)]
    return CrfPotentials(ad.stack(rows), P["crf_trans"])


def viterbi(pot: CrfPotentials) -> ControlStateSeq:
    """Highest-scoring state sequence; ties resolve to the lower state index."""
    em = pot.emissions.value
    tr = pot.transitions.value
    T, K = em.shape
    score = em[0].copy()
    back = np.zeros((T, K), dtype=np.int64)
    for t in range(1, T):
        cand = score[:, None] + tr  # cand[i, j]: best path ending i -> j
        back[t] = cand.argmax(axis=0)  # argmax takes the first (lowest) index
        score = cand.max(axis=0) + em[t]
    path = [int(score.argmax())]
    for t in range(T - 1, 0, -1):
        path.append(int(back[t, path[-1]]))
    path.reverse()
    return ControlStateSeq(tuple(path))


def log_partition(pot: CrfPotentials) -> float:
    em = pot.emissions.value
    tr = pot.transitions.value
    alpha = em[0]
    for t in range(1, em.shape[0]):
        alpha = _lse0(alpha[:, None] + tr) + em[t]
    return float(_lse0(alpha))


def marginals(pot: CrfPotentials) -> np.ndarray:
    """Posterior p(z_t = k) for every position, as a (T, K) matrix."""
    em = pot.emissions.value
    tr = pot.transitions.value
    T, K = em.shape
    alpha = np.zeros((T, K))
    beta = np.zeros((T, K))
    alpha[0] = em[0]
    for t in range(1, T):
        alpha[t] = _lse0(alpha[t - 1][:, None] + tr) + em[t]
    for t in range(T - 2, -1, -1):
        beta[t] = _lse0((tr + em[t + 1] + beta[t + 1]).T)
    joint = alpha + beta
    joint -= _lse0(joint.T)[:, None]
    return np.exp(joint)


def crf_log_likelihood(pot: CrfPotentials, z) -> ad.Var:
    """log q(z | x, y) = score(z) - log Z.  Differentiable through `pot`."""
    states = list(z.states if isinstance(z, ControlStateSeq) else z)
    T, K = pot.length, pot.k
    if len(states) != T:
        raise DomainError(f"state sequence length {len(states)} != {T}")
    if any(not 0 <= s < K for s in states):
        raise DomainError("state index out of range")

    terms = [ad.take(pot.emissions, (t, s)) for t, s in enumerate(states)]
    terms += [ad.take(pot.transitions, (a, b))
              for a, b in zip(states, states[1:])]
    score = ad.add_n(terms)

    alpha = ad.row(pot.emissions, 0)
    for t in range(1, T):
        prev = ad.reshape(alpha, (K, 1))
        alpha = ad.add(ad.logsumexp(ad.add(prev, pot.transitions), axis=0),
                       ad.row(pot.emissions, t))
    return ad.sub(score, ad.logsumexp(alpha))


def infer_states(params: ModelParams, table: DataTable, tokens) -> ControlStateSeq:
    """Mode M3: most plausible control states for existing text."""
    return viterbi(crf_potentials(params, table, tokens))


def _lse0(x: np.ndarray) -> np.ndarray:
    m = x.max(axis=0)
    return m + np.log(np.exp(x - m).sum(axis=0))
