"""Command line entry points: build a toy checkpoint, train, serve."""

from __future__ import annotations

import argparse
import logging
import sys
import threading

import uvicorn

from .checkpoint import DEFAULT_TEXTS, build_toy_checkpoint
from .data import DatasetSchemaError, load_examples
from .service import create_app
from .training import TrainConfig, train


def cmd_make_toy_checkpoint(args: argparse.Namespace) -> int:
    texts = list(DEFAULT_TEXTS)
    if args.data:
        examples = load_examples(args.data)
        texts = [x.input_text for x in examples]
        texts += [x.target_text for x in examples]
    path = build_toy_checkpoint(args.out, texts=texts, seed=args.seed)
    print(f"wrote toy checkpoint -> {path}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    config = TrainConfig(
        checkpoint=args.checkpoint,
        epochs=args.epochs,
        batch_size=args.batch_size,
        grad_accumulation=args.grad_accumulation,
        max_source_length=args.max_source_length,
        max_target_length=args.max_target_length,
        seed=args.seed,
        max_steps=args.max_steps,
    )
    result = train(args.data, config, args.out)
    print(f"trained {result.steps} steps "
          f"(first loss {result.losses[0]:.4f}, "
          f"last loss {result.losses[-1]:.4f}), "
          f"{result.truncated_sources} truncated sources "
          f"-> {result.checkpoint_dir}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    app = create_app(preload=False)
    loader = threading.Thread(
        target=app.state.holder.load, args=(args.checkpoint,), daemon=True)
    loader.start()
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sotabackend",
        description="Train and serve the extraction generation model")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("make-toy-checkpoint",
                       help="write a tiny random local checkpoint")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--data",
                   help="prompt-instance JSONL to build the vocabulary from")
    p.set_defaults(func=cmd_make_toy_checkpoint)

    p = sub.add_parser("train", help="fine-tune on a prompt-instance file")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--batch-size", type=int, default=4)
    p.add_argument("--grad-accumulation", type=int, default=1)
    p.add_argument("--max-source-length", type=int, default=512)
    p.add_argument("--max-target-length", type=int, default=256)
    p.add_argument("--seed", type=int, default=13)
    p.add_argument("--max-steps", type=int,
                   help="stop after this many optimizer steps")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("serve", help="serve a checkpoint over HTTP")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (DatasetSchemaError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
