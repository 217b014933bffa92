"""Supervised training of the joint generator and the CRF inference net.

Both networks train together on gold-aligned examples: the loss per example
is -log p(y, z | x) - log q(z | x, y).  Optimization is plain mini-batch
Adam with global gradient-norm clipping.  Everything is seeded, so a rerun
of the same configuration reproduces the checkpoint byte for byte.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from .constraint import ConstraintDfa, accepts
from .core import Example, Vocabulary, build_vocab
from .decode import constrained_generate, free_generate
from .errors import DomainError, NoFeasibleOutput, NumericalError
from .infer import crf_log_likelihood, crf_potentials, infer_states
from .model import (
    ModelConfig,
    ModelParams,
    encode_table,
    initial_state,
    init_params,
    prepare_step,
    score_sequence,
)

ADAM_EPS = 1e-8


@dataclass(frozen=True)
class TrainConfig:
    k: int
    epochs: int = 20
    batch_size: int = 32
    lr: float = 1e-3
    betas: tuple[float, float] = (0.9, 0.999)
    clip: float = 5.0
    seed: int = 0
    d_e: int = 32
    d_h: int = 64
    d_crf: int = 32
    copy: bool = False

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.k < 1:
            raise DomainError("epochs, batch_size and k must be positive")
        if self.lr < 0 or self.clip <= 0:
            raise DomainError("lr must be >= 0 and clip > 0")
        if not (0 <= self.betas[0] < 1 and 0 <= self.betas[1] < 1):
            raise DomainError("moment decays must lie in [0, 1)")


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    joint_nll: float
    crf_nll: float
    dev_nll: float
    dev_token_acc: float
    dev_state_acc: float


@dataclass
class TrainReport:
    epochs: list[EpochStats] = field(default_factory=list)
    best_epoch: int = -1
    early_stopped: bool = False

    def to_json(self) -> dict:
        return {
            "epochs": [asdict(e) for e in self.epochs],
            "best_epoch": self.best_epoch,
            "early_stopped": self.early_stopped,
        }


def train(config: TrainConfig, train_set: list[Example], dev_set: list[Example],
          vocab: Vocabulary | None = None, schema: tuple[str, ...] | None = None,
          stop_fn=None) -> tuple[ModelParams, TrainReport]:
    """Fit model + CRF on gold-aligned examples; returns the best-dev params.

    `stop_fn(params, stats)` may end training early (evaluated after each
    epoch); the best-dev snapshot is still what gets returned.
    """
    if not train_set or not dev_set:
        raise DomainError("need non-empty train and dev sets")
    for ex in train_set + dev_set:
        if ex.states is None:
            raise DomainError("training requires gold control states")

    if vocab is None:
        vocab = build_vocab(train_set)
    if schema is None:
        schema = _schema_of(train_set)
    cfg = ModelConfig(vocab_size=len(vocab), k=config.k, n_fields=len(schema),
                      d_e=config.d_e, d_h=config.d_h, d_crf=config.d_crf,
                      copy=config.copy)
    params = init_params(cfg, schema, vocab, config.seed)

    rng = np.random.default_rng(config.seed)
    adam_m = {n: np.zeros_like(t) for n, t in params.tensors.items()}
    adam_v = {n: np.zeros_like(t) for n, t in params.tensors.items()}
    step_no = 0
    report = TrainReport()
    best = (-1.0, -1.0, -math.inf)
    best_tensors = {n: t.copy() for n, t in params.tensors.items()}

    for epoch in range(config.epochs):
        order = rng.permutation(len(train_set))
        joint_sum = crf_sum = 0.0
        for bi in range(0, len(order), config.batch_size):
            batch = [train_set[i] for i in order[bi:bi + config.batch_size]]
            grads, joint_nll, crf_nll = _batch_grads(params, batch)
            if not (math.isfinite(joint_nll) and math.isfinite(crf_nll)):
                raise NumericalError(
                    f"non-finite loss in epoch {epoch} batch {bi // config.batch_size}")
            joint_sum += joint_nll * len(batch)
            crf_sum += crf_nll * len(batch)
            step_no += 1
            _adam_update(params.tensors, grads, adam_m, adam_v, step_no, config)

        stats = EpochStats(
            epoch=epoch,
            joint_nll=joint_sum / len(train_set),
            crf_nll=crf_sum / len(train_set),
            dev_nll=_dev_nll(params, dev_set),
            dev_token_acc=_teacher_forced_acc(params, dev_set),
            dev_state_acc=_viterbi_acc(params, dev_set),
        )
        report.epochs.append(stats)
        key = (stats.dev_state_acc, stats.dev_token_acc, -stats.dev_nll)
        if key > best:
            best = key
            report.best_epoch = epoch
            best_tensors = {n: t.copy() for n, t in params.tensors.items()}
        if stop_fn is not None and stop_fn(params, stats):
            report.early_stopped = True
            break

    return ModelParams(cfg, schema, vocab, best_tensors), report


def _schema_of(examples) -> tuple[str, ...]:
    seen: dict[str, None] = {}
    for ex in examples:
        for name, _ in ex.table.entries:
            seen.setdefault(name)
    return tuple(seen)


def _batch_grads(params: ModelParams, batch):
    P = params.var_view()
    joint_nll = crf_nll = 0.0
    for ex in batch:
        # fresh tape per example; gradients pile up on the shared P vars
        with ad.Tape() as tape:
            y = params.vocab.encode(list(ex.text))
            z = list(ex.states.states)
            joint = score_sequence(params, ex.table, y, z, P=P)
            crf = crf_log_likelihood(
                crf_potentials(params, ex.table, list(ex.text), P=P), z)
            loss = ad.neg(ad.add(joint, crf))
            tape.backward(loss)
        joint_nll -= joint.item()
        crf_nll -= crf.item()
    n = len(batch)
    grads = {}
    for name, var in P.items():
        g = var.grad if var.grad is not None else np.zeros_like(var.value)
        grads[name] = g / n
    return grads, joint_nll / n, crf_nll / n


def _adam_update(tensors, grads, m, v, t, config: TrainConfig):
    norm = math.sqrt(sum(float((g * g).sum()) for g in grads.values()))
    scale = config.clip / norm if norm > config.clip else 1.0
    b1, b2 = config.betas
    for name in sorted(tensors):
        g = grads[name] * scale
        m[name] = b1 * m[name] + (1 - b1) * g
        v[name] = b2 * v[name] + (1 - b2) * (g * g)
        mhat = m[name] / (1 - b1 ** t)
        vhat = v[name] / (1 - b2 ** t)
        tensors[name] -= config.lr * mhat / (np.sqrt(vhat) + ADAM_EPS)


def _dev_nll(params: ModelParams, dataset) -> float:
    total = 0.0
    for ex in dataset:
        y = params.vocab.encode(list(ex.text))
        z = list(ex.states.states)
        total -= score_sequence(params, ex.table, y, z).item()
        total -= crf_log_likelihood(
            crf_potentials(params, ex.table, list(ex.text)), z).item()
    return total / len(dataset)


def _teacher_forced_acc(params: ModelParams, dataset) -> float:
    """Next-token accuracy with the gold history fed back in."""
    hits = total = 0
    for ex in dataset:
        y = params.vocab.encode(list(ex.text))
        z = list(ex.states.states)
        dstate = initial_state(params, encode_table(params, ex.table))
        for yt, zt in zip(y, z):
            step = prepare_step(params, dstate)
            pred = int(step.word_scores(zt, normalize=False).value.argmax())
            hits += pred == yt
            total += 1
            dstate = step.advance(zt, yt)
    return hits / max(total, 1)


def _viterbi_acc(params: ModelParams, dataset) -> float:
    hits = total = 0
    for ex in dataset:
        got = infer_states(params, ex.table, list(ex.text)).states
        hits += sum(a == b for a, b in zip(got, ex.states.states))
        total += len(got)
    return hits / max(total, 1)


def evaluate(params: ModelParams, dataset, dfa: ConstraintDfa | None = None,
             beam_width: int = 5, max_len: int = 30) -> dict:
    """Decode every example and score against its reference and gold states.

    An infeasible decode (the constraint admits nothing reachable) counts as
    a miss, not a constraint violation: soundness is about emitted outputs.
    """
    if not dataset:
        raise DomainError("cannot evaluate on an empty dataset")
    exact = overlap = sat = 0.0
    infeasible = 0
    state_hits = state_total = 0
    for ex in dataset:
        try:
            if dfa is None:
                res = free_generate(params, ex.table, beam_width, max_len)
            else:
                res = constrained_generate(params, ex.table, dfa, beam_width, max_len)
        except NoFeasibleOutput:
            infeasible += 1
            sat += 1
            res = None
        if res is not None:
            exact += res.tokens == ex.text
            lim = max(len(res.tokens), len(ex.text))
            overlap += sum(a == b for a, b in zip(res.tokens, ex.text)) / max(lim, 1)
            sat += dfa is None or accepts(dfa, res.states.states)
        if ex.states is not None:
            got = infer_states(params, ex.table, list(ex.text)).states
            state_hits += sum(a == b for a, b in zip(got, ex.states.states))
            state_total += len(got)
    n = len(dataset)
    return {
        "exact_match": exact / n,
        "token_accuracy": overlap / n,
        "state_accuracy": state_hits / max(state_total, 1),
        "constraint_satisfaction_rate": sat / n,
        "infeasible": infeasible,
    }


def grad_check(params: ModelParams, example: Example, epsilon: float = 1e-5,
               coords: int = 200, seed: int = 0, part: str = "full") -> float:
    """Worst disagreement between analytic and central-difference gradients.

    Errors are relative above unit gradient magnitude and absolute below it
    (|a - n| / max(1, |a|, |n|)), over `coords` randomly sampled coordinates.
    """
    if epsilon <= 0:
        raise DomainError("epsilon must be positive")
    if part not in ("full", "joint", "crf"):
        raise DomainError(f"unknown part {part!r}")
    y = params.vocab.encode(list(example.text))
    z = list(example.states.states)

    def build_loss(p: ModelParams, P=None):
        terms = []
        if part in ("full", "joint"):
            terms.append(score_sequence(p, example.table, y, z, P=P))
        if part in ("full", "crf"):
            terms.append(crf_log_likelihood(
                crf_potentials(p, example.table, list(example.text), P=P), z))
        return ad.neg(ad.add_n(terms))

    with ad.Tape() as tape:
        P = params.var_view()
        tape.backward(build_loss(params, P))

    def loss_value(tensors):
        p = ModelParams(params.cfg, params.schema, params.vocab, tensors)
        return build_loss(p).item()

    rng = np.random.default_rng(seed)
    names = sorted(params.tensors)
    sizes = np.array([params.tensors[n].size for n in names], dtype=np.float64)
    worst = 0.0
    for _ in range(coords):
        name = names[int(rng.choice(len(names), p=sizes / sizes.sum()))]
        idx = tuple(int(rng.integers(0, s)) for s in params.tensors[name].shape)
        analytic = P[name].grad[idx] if P[name].grad is not None else 0.0
        numeric = ad.numeric_gradient(loss_value, dict(params.tensors),
                                      name, idx, eps=epsilon)
        err = abs(analytic - numeric) / max(1.0, abs(analytic), abs(numeric))
        worst = max(worst, err)
    return worst


def save_report(report: TrainReport, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def date_task_pipeline(out_dir: str, n_train: int = 5000, n_dev: int = 500,
                       seed: int = 0, epochs: int = 20, batch_size: int = 32,
                       lr: float = 3e-3,
                       stop_state_acc: float = 0.995,
                       stop_exact: float = 0.98,
                       stop_eval_n: int = 100) -> tuple[ModelParams, TrainReport]:
    """Generate the date corpus, train, and write checkpoint + report.

    Early stopping fires once held-out Viterbi accuracy and gold-constrained
    exact match both clear their bars, so converged runs do not burn the
    remaining epochs.  Every output file is a pure function of the arguments.
    """
    import os

    from .constraint import compile_ast, parse_regex
    from .core import ControlAlphabet
    from .data import (
        DATE_K,
        date_vocab,
        detect_format,
        format_constraint,
        gen_date_dataset,
    )
    from .model import save_checkpoint

    train_set = gen_date_dataset(n_train, seed=seed)
    dev_set = gen_date_dataset(n_dev, seed=seed + 1)
    alphabet = ControlAlphabet(DATE_K)
    dfas = [compile_ast(parse_regex(format_constraint(f), alphabet), alphabet)
            for f in range(8)]
    probe = dev_set[:stop_eval_n]

    def converged(params, stats) -> bool:
        if stats.dev_state_acc < stop_state_acc:
            return False
        hits = 0
        for ex in probe:
            dfa = dfas[detect_format(ex)]
            try:
                res = constrained_generate(params, ex.table, dfa, 5, 30)
            except NoFeasibleOutput:
                continue
            hits += res.tokens == ex.text
        return hits / max(len(probe), 1) >= stop_exact

    config = TrainConfig(k=DATE_K, epochs=epochs, batch_size=batch_size,
                         lr=lr, seed=seed)
    params, report = train(config, train_set, dev_set,
                           vocab=date_vocab(), schema=("day", "month", "year"),
                           stop_fn=converged)
    os.makedirs(out_dir, exist_ok=True)
    save_checkpoint(params, os.path.join(out_dir, "model.ckpt"))
    save_report(report, os.path.join(out_dir, "report.json"))
    return params, report
