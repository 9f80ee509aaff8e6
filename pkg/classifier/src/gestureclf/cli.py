"""CLI: train a classifier on a dataset manifest, evaluate a checkpoint."""

from __future__ import annotations

import argparse
import json
import sys

from .data import PairDataset, stratified_split
from .evaluate import evaluate
from .train import TrainConfig, load_checkpoint, train


def _cmd_train(args) -> int:
    cfg = TrainConfig.from_file(args.config) if args.config else TrainConfig()
    dataset = PairDataset(args.manifest)
    train_set, val_set = stratified_split(dataset, cfg.val_fraction, cfg.seed)
    _, history = train(None, train_set, val_set, cfg, checkpoint_path=args.checkpoint)
    if args.history:
        with open(args.history, "w") as fh:
            json.dump(history, fh, indent=2)
    last = history[-1]
    print(
        json.dumps(
            {
                "checkpoint": args.checkpoint,
                "epochs_run": len(history),
                "best_val_loss": min(h["val_loss"] for h in history),
                "final_train_accuracy": last["train_accuracy"],
            },
            indent=2,
        )
    )
    return 0


def _cmd_eval(args) -> int:
    model, _ = load_checkpoint(args.checkpoint)
    report = evaluate(model, PairDataset(args.manifest))
    report.save(args.report)
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gestureclf",
        description="Train/evaluate the hand-sign classifier on radar image-pair datasets.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train on a dataset manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--config", default=None, help="TrainConfig JSON; defaults when omitted")
    p.add_argument("--checkpoint", required=True, help="output checkpoint path (.pt)")
    p.add_argument("--history", default=None, help="optional per-epoch history JSON")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a labeled manifest")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--report", required=True, help="output EvalReport JSON")
    p.set_defaults(func=_cmd_eval)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
