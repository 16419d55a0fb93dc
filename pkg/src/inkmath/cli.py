"""Command line interface.

Subcommands cover the full workflow: generate a synthetic corpus, train
a model, recognize ink files, evaluate a model over a corpus, inspect
tree linearizations, and serve the HTTP API.  Commands print JSON on
stdout; failures print a JSON error object on stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from pathlib import Path

from .grammar import load_grammar
from .ink import parse_ink_text
from .net import save_checkpoint
from .recognizer import Recognizer
from .srt import (
    extract_leaf_paths,
    extract_random_path,
    extract_writing_order_path,
    parse_srt,
    path_targets,
)
from .synth import generate_corpus, load_spec, load_corpus, write_corpus
from .training import TrainConfig, train


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="inkmath", description="Handwritten math recognition.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model on a corpus directory")
    p.add_argument("--data", required=True, help="corpus directory (*.ink.json with *.srt.json)")
    p.add_argument("--grammar", required=True, help="grammar file")
    p.add_argument("--out", required=True, help="checkpoint path to write")
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--lambda", dest="lam", type=float, default=0.1, help="constraint loss weight")
    p.add_argument("--gap-lambda", type=float, default=0.1, help="intra-symbol gap penalty weight")
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epsilon", type=float, default=0.02, help="polyline simplification tolerance")
    p.add_argument("--hidden", type=int, default=128, help="LSTM units per direction")
    p.add_argument("--layers", type=int, default=3, help="stacked bidirectional layers")
    p.add_argument("--pool", choices=("frame", "stroke"), default="frame")
    p.add_argument("--clip-norm", type=float, default=None)
    p.add_argument("--no-pair-paths", action="store_true", help="skip per-edge pair sequences")
    p.add_argument("--eval-every", type=int, default=0, help="epochs between training-set evaluations")
    p.add_argument("--target-rate", type=float, default=None, help="stop once training expression rate reaches this")
    p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("recognize", help="recognize one ink file")
    p.add_argument("--model", required=True)
    p.add_argument("--grammar", required=True)
    p.add_argument("--ink", required=True)
    p.add_argument("--format", choices=("native", "inkml"), default="native")
    p.add_argument("--topk", type=int, default=5)

    p = sub.add_parser("evaluate", help="evaluate a model over a corpus directory")
    p.add_argument("--model", required=True)
    p.add_argument("--grammar", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--report", required=True, help="where to write the report JSON")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--paths", type=int, default=10, help="random linearizations per sample")

    p = sub.add_parser("gen-synth", help="generate a synthetic corpus")
    p.add_argument("--spec", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("extract-paths", help="linearize a ground-truth tree")
    p.add_argument("--srt", required=True)
    p.add_argument("--method", choices=("all", "order", "random"), required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=1, help="draws for --method random")

    p = sub.add_parser("serve", help="run the HTTP recognition service")
    p.add_argument("--model", required=True)
    p.add_argument("--grammar", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--static", default=None, help="directory to serve at / (e.g. the web pad)")

    return parser


def _cmd_train(args) -> int:
    samples = load_corpus(args.data)
    grammar = load_grammar(args.grammar)
    config = TrainConfig(
        hidden_size=args.hidden,
        num_layers=args.layers,
        lr=args.lr,
        momentum=args.momentum,
        lam=args.lam,
        gap_lam=args.gap_lambda,
        epochs=args.epochs,
        seed=args.seed,
        epsilon=args.epsilon,
        pool=args.pool,
        clip_norm=args.clip_norm,
        pair_paths=not args.no_pair_paths,
        eval_every=args.eval_every,
        target_rate=args.target_rate,
    )

    def progress(stats):
        if args.quiet:
            return
        rate = "" if stats.expression_rate is None else f" expr={stats.expression_rate:.3f}"
        print(
            f"epoch {stats.epoch:4d} loss={stats.mean_combined:.4f}"
            f" ctc={stats.mean_ctc:.4f} constraint={stats.mean_constraint:.4f}{rate}",
            file=sys.stderr,
        )

    result = train(samples, config, grammar=grammar, progress=progress)
    save_checkpoint(args.out, result.net)
    last = result.history[-1]
    summary = {
        "checkpoint": str(args.out),
        "epochs_run": len(result.history),
        "stopped_early": result.stopped_early,
        "final_loss": last.mean_combined,
        "dropped_sequences": result.dropped_sequences,
    }
    if last.expression_rate is not None:
        summary["expression_rate"] = last.expression_rate
    print(json.dumps(summary, sort_keys=True))
    return 0


def _cmd_recognize(args) -> int:
    ink = parse_ink_text(Path(args.ink).read_text(encoding="utf-8"), args.format)
    recognizer = Recognizer.from_files(args.model, args.grammar)
    result = recognizer.recognize(ink, topk=args.topk)
    print(json.dumps(result.to_json(), sort_keys=True, indent=2))
    return 0


def _cmd_evaluate(args) -> int:
    from .metrics import evaluate_corpus

    recognizer = Recognizer.from_files(args.model, args.grammar)
    samples = load_corpus(args.data)
    report = evaluate_corpus(recognizer, samples, seed=args.seed, paths_per_sample=args.paths)
    blob = json.dumps(report.to_json(), sort_keys=True, indent=2)
    Path(args.report).write_text(blob + "\n", encoding="utf-8")
    print(
        json.dumps(
            {
                "report": str(args.report),
                "num_samples": report.num_samples,
                "expression_rate": report.expression_rate,
            },
            sort_keys=True,
        )
    )
    return 0


def _cmd_gen_synth(args) -> int:
    spec = load_spec(args.spec)
    samples = generate_corpus(spec, count=args.count, seed=args.seed)
    write_corpus(samples, args.out)
    print(json.dumps({"dir": str(args.out), "written": len(samples)}, sort_keys=True))
    return 0


def _cmd_extract_paths(args) -> int:
    root = parse_srt(json.loads(Path(args.srt).read_text(encoding="utf-8")))
    if args.method == "all":
        paths = extract_leaf_paths(root)
    elif args.method == "order":
        paths = [extract_writing_order_path(root)]
    else:
        rng = random.Random(args.seed)
        paths = [extract_random_path(root, rng) for _ in range(args.count)]
    out = []
    for path in paths:
        targets = path_targets(path)
        out.append({"labels": list(targets.labels), "stroke_order": list(targets.stroke_order)})
    print(json.dumps({"method": args.method, "paths": out}, sort_keys=True, indent=2))
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    recognizer = Recognizer.from_files(args.model, args.grammar)
    app = create_app(recognizer, static_dir=args.static)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "recognize": _cmd_recognize,
    "evaluate": _cmd_evaluate,
    "gen-synth": _cmd_gen_synth,
    "extract-paths": _cmd_extract_paths,
    "serve": _cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except Exception as exc:  # noqa: BLE001 - contract: JSON error on stderr
        payload = {"error": {"type": type(exc).__name__, "message": str(exc)}}
        print(json.dumps(payload), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
