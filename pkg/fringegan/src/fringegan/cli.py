"""Command line front end: train on a dataset, predict from a checkpoint."""

import argparse
import sys

from .errors import FringeGanError
from .networks import GeneratorConfig, DiscriminatorConfig
from .predict import predict_folder
from .train import TrainConfig, train


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="fringegan",
        description="conditional adversarial mapping from fringe patches to optical property patches",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a generator/discriminator pair on a dataset")
    p.add_argument("--dataset", required=True, help="dataset root containing manifest.json")
    p.add_argument("--out", required=True, help="directory for checkpoint and loss CSV")
    p.add_argument("--mode", default="ac", help="dataset mode to train on (default ac)")
    p.add_argument(
        "--scale", choices=("desk", "full"), default="desk",
        help="desk: small network for quick runs; full: 8-level 64-channel network",
    )
    p.add_argument("--steps", type=int, default=None, help="total steps (overrides --epochs)")
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lambda-l1", type=float, default=60.0)
    p.add_argument("--lr", type=float, default=2e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--checkpoint-every", type=int, default=0)

    p = sub.add_parser("predict", help="write predicted patches for a dataset mode")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", default=None, help="dataset mode (default: the mode trained on)")
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "train":
            if args.scale == "full":
                gen_cfg = GeneratorConfig.full_scale()
                disc_cfg = DiscriminatorConfig()
            else:
                gen_cfg = GeneratorConfig.desk()
                disc_cfg = DiscriminatorConfig.desk()
            cfg = TrainConfig(
                lambda_l1=args.lambda_l1,
                epochs=args.epochs,
                steps=args.steps,
                lr=args.lr,
                seed=args.seed,
                mode=args.mode,
                checkpoint_every=args.checkpoint_every,
            )
            result = train(args.dataset, args.out, gen_cfg, disc_cfg, cfg)
            last = result.rows[-1]
            print(
                f"trained {last['step'] + 1} steps: loss_d {last['loss_d']:.4f}, "
                f"loss_g {last['loss_g']:.4f} -> {result.checkpoint_path}"
            )
        else:
            written = predict_folder(args.checkpoint, args.dataset, args.out, mode=args.mode)
            print(f"wrote {len(written)} predicted patches to {args.out}")
    except FringeGanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
