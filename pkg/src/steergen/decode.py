"""Beam search over joint (word, control-state) sequences.

Decoding alternates two choice layers per emitted token: first the next
control state, then the word conditioned on that state.  A constraint
automaton, when given, gates the state layer: only transitions the DFA
allows are expanded, and the end-of-sequence move is only available in
accepting DFA states.  Scores are raw model log-probabilities throughout
(no renormalization after masking), so a returned hypothesis scores
exactly what `model.score_sequence` assigns it.

The search can capture its expansion tree for interactive display: nodes
alternate state choices and word choices, each recording the cumulative
log-prob and whether the node stayed on the beam.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constraint import REJECT, ConstraintDfa
from .constraint import allowed as dfa_allowed
from .constraint import step as dfa_step
from .core import BOS_ID, EOS_ID, ControlStateSeq, DataTable
from .errors import ConstraintViolation, DomainError, NoFeasibleOutput
from .model import ModelParams, encode_table, initial_state, prepare_step

TREE_FANOUT = 8  # alternatives recorded per tree node


@dataclass(frozen=True)
class GenerationResult:
    tokens: tuple[str, ...]
    token_ids: tuple[int, ...]
    states: ControlStateSeq
    logprob: float
    step_logprobs: tuple[float, ...]  # per-token increments, then the stop step
    tree: dict | None = None
    truncated: bool = False

    def to_json(self) -> dict:
        out = {
            "tokens": list(self.tokens),
            "text": " ".join(self.tokens),
            "states": self.states.letters(),
            "logprob": self.logprob,
            "step_logprobs": list(self.step_logprobs),
            "truncated": self.truncated,
        }
        if self.tree is not None:
            out["tree"] = self.tree
        return out


class _Hyp:
    __slots__ = ("tokens", "states", "lp", "steps", "dstate", "dfa_state", "node")

    def __init__(self, tokens, states, lp, steps, dstate, dfa_state, node):
        self.tokens = tokens        # tuple of token ids
        self.states = states        # tuple of control states
        self.lp = lp
        self.steps = steps          # tuple of per-step log-prob increments
        self.dstate = dstate
        self.dfa_state = dfa_state  # -2 when unconstrained
        self.node = node            # tree node of the last word choice


_FREE = -2


def free_generate(params: ModelParams, table: DataTable, beam_width: int = 5,
                  max_len: int = 30, capture_tree: bool = False) -> GenerationResult:
    """Mode M1: best (y, z) under the model alone."""
    return _beam(params, table, None, beam_width, max_len, capture_tree)


def constrained_generate(params: ModelParams, table: DataTable, dfa: ConstraintDfa,
                         beam_width: int = 5, max_len: int = 30,
                         capture_tree: bool = False) -> GenerationResult:
    """Mode M2: best (y, z) whose state sequence the automaton accepts."""
    return _beam(params, table, dfa, beam_width, max_len, capture_tree)


def forced_generate(params: ModelParams, table: DataTable, prefix,
                    dfa: ConstraintDfa | None = None, beam_width: int = 5,
                    max_len: int = 30, capture_tree: bool = False) -> GenerationResult:
    """Decode with the first len(prefix) (state, word) choices pinned.

    The prefix is scored under the model like any other hypothesis, so
    probing an alternative decision shows its true cost.
    """
    prefix = list(prefix)
    for z, y in prefix:
        if not 0 <= z < params.cfg.k:
            raise DomainError(f"forced state {z} out of range")
        if not 0 <= y < params.cfg.vocab_size or y in (BOS_ID, EOS_ID):
            raise DomainError(f"forced word id {y} not emittable")
    if dfa is not None:
        q = dfa.start
        for z, _ in prefix:
            q = dfa_step(dfa, q, z)
            if q == REJECT:
                raise ConstraintViolation(
                    "forced prefix leaves the constraint language")
    return _beam(params, table, dfa, beam_width, max_len, capture_tree, prefix)


def _beam(params, table, dfa, beam_width, max_len, capture_tree, prefix=()):
    if beam_width < 1 or max_len < 1:
        raise DomainError("beam_width and max_len must be >= 1")
    if dfa is not None and not dfa.accepting:
        raise NoFeasibleOutput("constraint language is empty")
    if len(prefix) > max_len:
        raise DomainError("forced prefix longer than max_len")

    K = params.cfg.k
    vocab = params.vocab
    enc = encode_table(params, table)
    root = _node("BOS", "word", 0.0, True) if capture_tree else None
    hyp = _Hyp((), (), 0.0, (), initial_state(params, enc),
               dfa.start if dfa is not None else _FREE, root)

    for z, y in prefix:
        hyp = _advance_forced(params, hyp, z, y, dfa, capture_tree)

    live = [hyp]
    finished: list[_Hyp] = []
    for t in range(len(prefix), max_len + 1):
        cands = []
        for h in live:
            step = prepare_step(params, h.dstate)
            log_stop, log_cont = step.stop_logprobs()
            log_stop, log_cont = log_stop.item(), log_cont.item()

            if h.dfa_state == _FREE or h.dfa_state in dfa.accepting:
                eos_lp = float(step.word_scores(K, normalize=True).value[EOS_ID])
                inc = log_stop + eos_lp
                fin = _Hyp(h.tokens, h.states, h.lp + inc, h.steps + (inc,),
                           h.dstate, h.dfa_state, None)
                if capture_tree:
                    fin.node = _child(h.node, "$", "word", fin.lp, True)
                finished.append(fin)

            if t == max_len:
                continue
            state_lps = step.state_logprobs().value
            if h.dfa_state == _FREE:
                states = _top(state_lps, beam_width)
            else:
                mask = np.full(K, -np.inf)
                ok = list(dfa_allowed(dfa, h.dfa_state))
                if not ok:
                    continue  # dead end: no transition and EOS handled above
                mask[ok] = state_lps[ok]
                states = _top(mask, min(beam_width, len(ok)))
            snodes = _state_children(h, step, state_lps, log_cont, states) \
                if capture_tree else {}
            for z in states:
                word_lps = step.word_scores(z, normalize=True).value.copy()
                word_lps[BOS_ID] = word_lps[EOS_ID] = -np.inf
                base = h.lp + log_cont + state_lps[z]
                wnode_parent = snodes.get(z)
                if capture_tree:
                    _word_children(wnode_parent, word_lps, base, vocab)
                for y in _top(word_lps, beam_width):
                    inc = log_cont + state_lps[z] + word_lps[y]
                    cands.append((h, z, int(y), inc, step, wnode_parent))

        if t == max_len or not cands:
            break
        cands.sort(key=lambda c: (-(c[0].lp + c[3]),
                                  c[0].tokens + (c[2],),
                                  c[0].states + (c[1],)))
        best_fin = max((f.lp for f in finished), default=-np.inf)
        live = []
        for h, z, y, inc, step, wnode in cands[:beam_width]:
            nd = None
            if capture_tree:
                nd = _ensure_child(wnode, vocab.token(y), "word", h.lp + inc)
                nd["on_beam"] = True
                wnode["on_beam"] = True
            live.append(_Hyp(h.tokens + (y,), h.states + (z,), h.lp + inc,
                             h.steps + (inc,), step.advance(z, y),
                             dfa_step(dfa, h.dfa_state, z) if dfa is not None else _FREE,
                             nd))
        if finished and all(best_fin > h.lp for h in live):
            break

    if finished:
        finished.sort(key=lambda f: (-f.lp, f.tokens, f.states))
        return _result(finished[0], vocab, root, truncated=False)
    if dfa is not None:
        raise NoFeasibleOutput(
            f"no accepted output within {max_len} tokens; "
            "the constraint may be too strict for this model")
    live.sort(key=lambda h: (-h.lp, h.tokens, h.states))
    return _result(live[0], vocab, root, truncated=True)


def _advance_forced(params, h, z, y, dfa, capture_tree):
    step = prepare_step(params, h.dstate)
    _, log_cont = step.stop_logprobs()
    state_lps = step.state_logprobs().value
    word_lp = float(step.word_scores(z, normalize=True).value[y])
    inc = log_cont.item() + state_lps[z] + word_lp
    node = None
    if capture_tree:
        snode = _child(h.node, _letter(z), "state",
                       h.lp + log_cont.item() + state_lps[z], True)
        node = _child(snode, params.vocab.token(y), "word", h.lp + inc, True)
    return _Hyp(h.tokens + (y,), h.states + (z,), h.lp + inc, h.steps + (inc,),
                step.advance(z, y),
                dfa_step(dfa, h.dfa_state, z) if dfa is not None else _FREE, node)


def _result(h, vocab, root, truncated):
    return GenerationResult(
        tokens=tuple(vocab.token(i) for i in h.tokens),
        token_ids=h.tokens,
        states=ControlStateSeq(h.states),
        logprob=h.lp,
        step_logprobs=h.steps,
        tree=root,
        truncated=truncated,
    )


def _top(scores, n):
    order = np.lexsort((np.arange(len(scores)), -scores))
    picked = [int(i) for i in order[:n] if scores[i] > -np.inf]
    return picked


def _letter(z):
    return chr(ord("A") + z)


def _node(sym, kind, lp, on_beam):
    return {"sym": sym, "kind": kind, "lp": lp, "on_beam": on_beam, "children": []}


def _child(parent, sym, kind, lp, on_beam):
    nd = _node(sym, kind, lp, on_beam)
    parent["children"].append(nd)
    return nd


def _ensure_child(parent, sym, kind, lp):
    for nd in parent["children"]:
        if nd["sym"] == sym and nd["kind"] == kind:
            return nd
    return _child(parent, sym, kind, lp, False)


def _state_children(h, step, state_lps, log_cont, expanded):
    nodes = {}
    shown = set(_top(state_lps, TREE_FANOUT)) | set(expanded)
    for z in sorted(shown, key=lambda z: (-state_lps[z], z)):
        nodes[z] = _child(h.node, _letter(z), "state",
                          h.lp + log_cont + state_lps[z], False)
    return nodes


def _word_children(snode, word_lps, base, vocab):
    for y in _top(word_lps, TREE_FANOUT):
        _child(snode, vocab.token(y), "word", base + word_lps[y], False)
