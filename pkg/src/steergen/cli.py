"""Command-line entry points.

Each subcommand is a thin adapter over one package operation: it parses
flags, loads files, calls through, and prints either human-readable text or,
with --json, the operation's JSON form. Exit codes: 0 success, 1 usage,
2 data or constraint problem, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import train as T
from .constraint import compile_ast, parse_regex
from .core import ControlAlphabet, table_from_json, tokenize
from .data import gen_date_dataset, load_dataset, load_table_dataset, save_dataset
from .decode import constrained_generate, free_generate
from .errors import DomainError, FormatError, IoError, NumericalError, SteergenError
from .export import export_bundle, load_bundle, run_bundle
from .forecast import alignment_summary, forecast_global, forecast_range
from .infer import infer_states
from .model import load_checkpoint, save_checkpoint


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        args.fn(args)
        return 0
    except NumericalError as exc:
        _diag(exc)
        return 3
    except SteergenError as exc:
        _diag(exc)
        return 2


def _diag(exc: SteergenError):
    print(json.dumps({"error": exc.code, "detail": str(exc)}),
          file=sys.stderr)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="steergen",
        description="controllable table-to-text with constraint graphs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate the synthetic date dataset")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=_gen_data)

    p = sub.add_parser("train", help="train a model from JSONL datasets")
    p.add_argument("--config", required=True, help="TrainConfig fields as JSON")
    p.add_argument("--train", dest="train_path", required=True)
    p.add_argument("--dev", dest="dev_path", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=_train)

    p = sub.add_parser("generate", help="decode one table")
    p.add_argument("--model", required=True)
    p.add_argument("--table", required=True,
                   help="table JSON, inline or a file path")
    p.add_argument("--constraint")
    p.add_argument("--beam", type=int, default=5)
    p.add_argument("--max-len", type=int, default=30)
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=_generate)

    p = sub.add_parser("infer", help="infer control states for written text")
    p.add_argument("--model", required=True)
    p.add_argument("--table", required=True)
    p.add_argument("--text", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=_infer)

    p = sub.add_parser("forecast", help="decode many inputs at once")
    p.add_argument("--model", required=True)
    p.add_argument("--constraint")
    p.add_argument("--data", help="test set (JSONL or CSV), for --global")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--global", dest="global_args", nargs=2,
                       metavar=("N", "SEED"), type=int)
    group.add_argument("--range", dest="range_spec",
                       help='{"base_table": ..., "ranges": ...} inline or file')
    p.add_argument("--beam", type=int, default=5)
    p.add_argument("--max-len", type=int, default=30)
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=_forecast)

    p = sub.add_parser("align", help="state/field/token alignment summary")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=_align)

    p = sub.add_parser("export", help="package model + constraint as a bundle")
    p.add_argument("--model", required=True)
    p.add_argument("--constraint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=_export)

    p = sub.add_parser("run-export", help="decode through a saved bundle")
    p.add_argument("--bundle", required=True)
    p.add_argument("--input", required=True,
                   help="table JSON or dataset file (.jsonl/.csv)")
    p.add_argument("--beam", type=int, default=5)
    p.add_argument("--max-len", type=int, default=30)
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=_run_export)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--export-dir", default="exports")
    p.set_defaults(fn=_serve)

    return parser


def _gen_data(args):
    examples = gen_date_dataset(args.n, args.seed)
    save_dataset(examples, args.out)
    if args.json:
        print(json.dumps({"n": len(examples), "path": args.out}))
    else:
        print(f"wrote {len(examples)} examples to {args.out}")


def _train(args):
    cfg_obj = _load_json_arg(args.config)
    try:
        config = T.TrainConfig(**cfg_obj)
    except TypeError as exc:
        raise FormatError(f"bad training config: {exc}") from exc
    train_set = load_dataset(args.train_path)
    dev_set = load_dataset(args.dev_path)
    params, report = T.train(config, train_set, dev_set)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(params, str(out / "model.ckpt"))
    T.save_report(report, str(out / "report.json"))
    last = report.epochs[-1]
    if args.json:
        print(json.dumps({"checkpoint": str(out / "model.ckpt"),
                          "report": str(out / "report.json"),
                          "best_epoch": report.best_epoch,
                          "dev_state_acc": last.dev_state_acc,
                          "dev_token_acc": last.dev_token_acc}))
    else:
        print(f"saved {out / 'model.ckpt'}; best epoch {report.best_epoch},"
              f" dev state acc {last.dev_state_acc:.3f},"
              f" dev token acc {last.dev_token_acc:.3f}")


def _generate(args):
    params = load_checkpoint(args.model)
    table = table_from_json(_load_json_arg(args.table))
    if args.constraint is not None:
        dfa = _compile(args.constraint, params.cfg.k)
        result = constrained_generate(params, table, dfa,
                                      beam_width=args.beam,
                                      max_len=args.max_len)
    else:
        result = free_generate(params, table, beam_width=args.beam,
                               max_len=args.max_len)
    if args.json:
        print(json.dumps(result.to_json()))
    else:
        print(" ".join(result.tokens))
        print(result.states.letters())


def _infer(args):
    params = load_checkpoint(args.model)
    table = table_from_json(_load_json_arg(args.table))
    tokens = tuple(tokenize(args.text))
    states = infer_states(params, table, tokens)
    if args.json:
        print(json.dumps({"tokens": list(tokens),
                          "states": states.letters()}))
    else:
        print(states.letters())


def _forecast(args):
    params = load_checkpoint(args.model)
    dfa = (_compile(args.constraint, params.cfg.k)
           if args.constraint is not None else None)
    if args.global_args is not None:
        if args.data is None:
            raise DomainError("--global requires --data")
        n, seed = args.global_args
        test_set = _load_examples(args.data)
        tuples, heat = forecast_global(params, dfa, test_set, n, seed,
                                       beam_width=args.beam,
                                       max_len=args.max_len)
        if args.json:
            print(json.dumps({"tuples": [t.to_json() for t in tuples],
                              "heatmap": heat.to_json()}))
        else:
            _print_tuples(tuples)
        return
    spec = _load_json_arg(args.range_spec)
    try:
        base = table_from_json(spec["base_table"])
        ranges = dict(spec["ranges"])
    except (KeyError, TypeError) as exc:
        raise FormatError(f"range spec needs base_table and ranges: {exc}") \
            from exc
    tuples = forecast_range(params, dfa, base, ranges, beam_width=args.beam,
                            max_len=args.max_len)
    if args.json:
        print(json.dumps({"tuples": [t.to_json() for t in tuples]}))
    else:
        _print_tuples(tuples)


def _align(args):
    params = load_checkpoint(args.model)
    sample = _load_examples(args.data)[: args.n]
    summary = alignment_summary(params, sample)
    if args.json:
        print(json.dumps(summary.to_json()))
        return
    for row in summary.to_json()["states"]:
        fields = " ".join(f"{n}:{c}" for n, c in row["fields"]) or "-"
        tokens = " ".join(f"{t}:{c}" for t, c in row["tokens"][:5]) or "-"
        print(f"{row['state']}  fields[{fields}]  tokens[{tokens}]")


def _export(args):
    params = load_checkpoint(args.model)
    dfa = _compile(args.constraint, params.cfg.k)
    export_bundle(params, dfa, args.constraint, args.out)
    if args.json:
        print(json.dumps({"bundle_path": args.out}))
    else:
        print(f"wrote bundle {args.out}")


def _run_export(args):
    if args.input.lstrip().startswith("{") or args.input.endswith(".json"):
        data = [table_from_json(_load_json_arg(args.input))]
    else:
        data = _load_examples(args.input)
    outs = run_bundle(args.bundle, data, beam_width=args.beam,
                      max_len=args.max_len)
    if args.json:
        print(json.dumps({"tuples": [t.to_json() for t in outs]}))
    else:
        _print_tuples(outs)


def _serve(args):
    from .server import ServeConfig, serve

    serve(ServeConfig(checkpoint=args.model, dataset=args.data,
                      port=args.port, export_dir=args.export_dir))


def _print_tuples(tuples):
    for t in tuples:
        if t.feasible:
            print(f"{' '.join(t.result.tokens)} | {t.result.states.letters()}")
        else:
            print("<no feasible output>")


def _compile(regex: str, k: int):
    alphabet = ControlAlphabet(k)
    return compile_ast(parse_regex(regex, alphabet), alphabet)


def _load_json_arg(arg: str) -> dict:
    """Accept inline JSON or a path to a JSON file."""
    text = arg
    if not arg.lstrip().startswith("{"):
        try:
            text = Path(arg).read_text(encoding="utf-8")
        except OSError as exc:
            raise IoError(f"cannot read {arg}: {exc}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"bad JSON in {arg!r}: {exc}") from exc
    if not isinstance(obj, dict):
        raise FormatError(f"expected a JSON object in {arg!r}")
    return obj


def _load_examples(path: str):
    if path.endswith(".csv"):
        return load_table_dataset(path)
    return load_dataset(path)


if __name__ == "__main__":
    sys.exit(main())
