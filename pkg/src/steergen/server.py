"""HTTP service over one loaded model and test set.

Exposes generation (free, constrained, forced), control-state inference,
constraint parsing/merging, forecasting, alignment, and bundle export as a
JSON API for the browser client. Compute endpoints are stateless: identical
request bodies produce identical responses. The constraint history is the
single mutable store and appends are serialized under a lock.
"""

from __future__ import annotations

import hashlib
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import forecast as fc
from .constraint import (
    ast_to_json,
    compile_ast,
    dfa_to_json,
    merge_examples,
    parse_regex,
    render_regex,
    to_graph,
)
from .core import (
    ControlAlphabet,
    ControlStateSeq,
    Example,
    example_to_json,
    table_from_json,
    tokenize,
)
from .data import load_dataset, load_table_dataset
from .decode import constrained_generate, forced_generate, free_generate
from .errors import DomainError, SteergenError
from .export import export_bundle
from .infer import crf_potentials, marginals, viterbi
from .model import ModelParams, load_checkpoint

import numpy as np

# HTTP status per error code; anything unlisted is the client's fault.
_STATUS = {
    "no_feasible_output": 422,
    "constraint_violation": 422,
    "range_too_large": 413,
    "io": 500,
    "numerical": 500,
    "compatibility": 500,
}


@dataclass
class SessionState:
    """Everything one server process holds: model, data, history, exports."""

    params: ModelParams
    test_set: list[Example]
    export_dir: Path
    history: list[dict] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)


@dataclass(frozen=True)
class ServeConfig:
    checkpoint: str
    dataset: str
    port: int = 8000
    export_dir: str = "exports"


class GenerateRequest(BaseModel):
    table: dict
    constraint: str | None = None
    forced_prefix: list[list[str]] | None = None  # [state letter, token] pairs
    beam: int = 5
    max_len: int = 30
    tree: bool = False


class InferRequest(BaseModel):
    table: dict
    text: str


class ParseRequest(BaseModel):
    regex: str


class MergeRequest(BaseModel):
    state_strings: list[str]


class HistoryPost(BaseModel):
    regex: str


class GlobalForecastRequest(BaseModel):
    constraint: str | None = None
    n: int = 20
    seed: int = 0
    beam: int = 5
    max_len: int = 30


class RangeForecastRequest(BaseModel):
    base_table: dict
    ranges: dict[str, list[str]]
    constraint: str | None = None
    beam: int = 5
    max_len: int = 30


class ExportRequest(BaseModel):
    constraint: str


def create_app(session: SessionState) -> FastAPI:
    app = FastAPI()
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    params = session.params
    alphabet = ControlAlphabet(params.cfg.k)
    vocab = params.vocab

    def compiled(regex: str | None):
        if regex is None:
            return None
        return compile_ast(parse_regex(regex, alphabet), alphabet)

    @app.exception_handler(SteergenError)
    async def steergen_error(request, exc: SteergenError):
        return JSONResponse(
            status_code=_STATUS.get(exc.code, 400),
            content={"error": exc.code, "detail": str(exc)},
        )

    @app.exception_handler(RequestValidationError)
    async def validation_error(request, exc: RequestValidationError):
        # str(exc) appends a source-file frame; keep only loc/msg pairs.
        detail = "; ".join(
            f"{'.'.join(str(p) for p in e['loc'])}: {e['msg']}"
            for e in exc.errors()
        )
        return JSONResponse(
            status_code=422,
            content={"error": "validation", "detail": detail},
        )

    @app.exception_handler(Exception)
    async def internal_error(request, exc: Exception):
        return JSONResponse(
            status_code=500,
            content={"error": "internal", "detail": str(exc)},
        )

    @app.get("/api/example")
    def get_example(id: int = 0):
        if not 0 <= id < len(session.test_set):
            raise DomainError(
                f"example id {id} outside 0..{len(session.test_set) - 1}"
            )
        return {"id": id, **example_to_json(session.test_set[id])}

    @app.get("/api/sample")
    def sample(count: int = 1, seed: int = 0):
        if count < 1:
            raise DomainError(f"need count >= 1, got {count}")
        if not session.test_set:
            raise DomainError("server has no test examples")
        rng = np.random.default_rng(seed)
        idx = rng.choice(len(session.test_set), size=count,
                         replace=count > len(session.test_set))
        return {"examples": [
            {"id": int(i), **example_to_json(session.test_set[int(i)])}
            for i in idx
        ]}

    @app.post("/api/generate")
    def generate(body: GenerateRequest):
        table = table_from_json(body.table)
        dfa = compiled(body.constraint)
        if body.forced_prefix is not None:
            prefix = []
            for pair in body.forced_prefix:
                if len(pair) != 2:
                    raise DomainError(
                        f"forced prefix entries are [letter, token] pairs,"
                        f" got {pair!r}"
                    )
                letter, token = pair
                prefix.append((alphabet.state(letter), vocab.id(token)))
            result = forced_generate(params, table, prefix, dfa,
                                     beam_width=body.beam,
                                     max_len=body.max_len,
                                     capture_tree=body.tree)
        elif dfa is not None:
            result = constrained_generate(params, table, dfa,
                                          beam_width=body.beam,
                                          max_len=body.max_len,
                                          capture_tree=body.tree)
        else:
            result = free_generate(params, table, beam_width=body.beam,
                                   max_len=body.max_len,
                                   capture_tree=body.tree)
        return result.to_json()

    @app.post("/api/infer")
    def infer(body: InferRequest):
        table = table_from_json(body.table)
        tokens = tuple(tokenize(body.text))
        pot = crf_potentials(params, table, tokens)
        states = viterbi(pot)
        marg = marginals(pot)
        return {
            "tokens": list(tokens),
            "states": states.letters(),
            "confidence": [float(marg[t][z]) for t, z in enumerate(states)],
        }

    @app.post("/api/constraint/parse")
    def parse(body: ParseRequest):
        ast = parse_regex(body.regex, alphabet)
        dfa = compile_ast(ast, alphabet)
        return {
            "ast": ast_to_json(ast),
            "graph": to_graph(ast).to_json(),
            "dfa_summary": dfa_to_json(dfa),
        }

    @app.post("/api/constraint/merge")
    def merge(body: MergeRequest):
        if not body.state_strings:
            raise DomainError("nothing to merge")
        seqs = [ControlStateSeq.from_letters(s).validate(alphabet)
                for s in body.state_strings]
        ast = merge_examples(seqs)
        return {"regex": render_regex(ast), "graph": to_graph(ast).to_json()}

    @app.get("/api/constraint/history")
    def history():
        with session.lock:
            return {"history": list(session.history)}

    @app.post("/api/constraint/history")
    def append_history(body: HistoryPost):
        parse_regex(body.regex, alphabet)  # history keeps well-formed entries
        entry = {"timestamp": time.time(), "regex": body.regex}
        with session.lock:
            session.history.append(entry)
            index = len(session.history) - 1
        return {"index": index, **entry}

    @app.post("/api/forecast/global")
    def forecast_global(body: GlobalForecastRequest):
        tuples, heat = fc.forecast_global(
            params, compiled(body.constraint), session.test_set,
            body.n, body.seed, beam_width=body.beam, max_len=body.max_len)
        return {"tuples": [t.to_json() for t in tuples],
                "heatmap": heat.to_json()}

    @app.post("/api/forecast/range")
    def forecast_range(body: RangeForecastRequest):
        tuples = fc.forecast_range(
            params, compiled(body.constraint), table_from_json(body.base_table),
            body.ranges, beam_width=body.beam, max_len=body.max_len)
        return {"tuples": [t.to_json() for t in tuples]}

    @app.get("/api/align")
    def align(n: int = 50):
        if n < 1:
            raise DomainError(f"need n >= 1, got {n}")
        return fc.alignment_summary(params, session.test_set[:n]).to_json()

    @app.post("/api/export")
    def export(body: ExportRequest):
        dfa = compiled(body.constraint)
        stamp = hashlib.sha256(body.constraint.encode("utf-8")).hexdigest()[:12]
        session.export_dir.mkdir(parents=True, exist_ok=True)
        path = session.export_dir / f"bundle-{stamp}.zip"
        export_bundle(params, dfa, body.constraint, str(path))
        return {"bundle_path": str(path)}

    return app


def build_session(config: ServeConfig) -> SessionState:
    params = load_checkpoint(config.checkpoint)
    if config.dataset.endswith(".csv"):
        examples = load_table_dataset(config.dataset)
    else:
        examples = load_dataset(config.dataset)
    return SessionState(params, examples, Path(config.export_dir))


def serve(config: ServeConfig):
    import uvicorn

    session = build_session(config)
    app = create_app(session)
    uvicorn.run(app, host="127.0.0.1", port=config.port)
