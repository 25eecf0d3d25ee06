"""Command-line entry point.

    rwmlab <tag> --config <file.json> [--seed N] [--out DIR]

with tag one of simulate, sweep, theory, diffusion, coupling, pseudo.  The
JSON config carries the experiment description (see ExperimentConfig); --seed
and --out override the corresponding config entries.
"""

from __future__ import annotations

import argparse
import logging

from .harness import TAGS, ExperimentConfig, run_experiment


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rwmlab",
        description="Random-walk Metropolis experiments on discontinuous product targets",
    )
    sub = parser.add_subparsers(dest="tag", required=True)
    for tag in TAGS:
        p = sub.add_parser(tag, help=f"run a {tag} experiment")
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="override the output directory")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    config = ExperimentConfig.from_json(args.config, tag=args.tag)
    if args.seed is not None:
        config.seed = args.seed
    if args.out is not None:
        config.out = args.out
    paths = run_experiment(config)
    for path in paths:
        print(path)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
