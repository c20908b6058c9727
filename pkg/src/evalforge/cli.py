"""Operator entry point: run one pipeline stage against a config file.

Exit codes: 0 success, 2 config error, 3 missing input, 4 backend failure,
5 synthesis budget exhausted without a validated artifact.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .gateway import BackendError
from .pipeline import STAGES, ConfigError, MissingInputError, load_config, run_stage
from .synthesis import UnvalidatedArtifactError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MISSING_INPUT = 3
EXIT_BACKEND = 4
EXIT_UNVALIDATED = 5


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evalforge",
        description="Curate a balanced benchmark and synthesize its evaluation pipeline.",
    )
    parser.add_argument("--config", required=True, help="path to the pipeline config (JSON)")
    parser.add_argument("--stage", required=True, choices=STAGES, help="pipeline stage to run")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--k", type=int, default=None, help="override the cluster count K")
    parser.add_argument("--n-voters", type=int, default=None, help="override the voter count")
    parser.add_argument("--out", default=None, help="override the output directory")
    parser.add_argument(
        "--max-inner", type=int, default=None, help="override the inner induction budget"
    )
    parser.add_argument(
        "--max-outer", type=int, default=None, help="override the outer induction budget"
    )
    parser.add_argument(
        "--domain-desc", default=None, help="override the domain description fed to the roles"
    )
    parser.add_argument(
        "--force", action="store_true", help="overwrite outputs produced by a different config"
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = load_config(
            args.config,
            overrides={
                "seed": args.seed,
                "k": args.k,
                "n_voters": args.n_voters,
                "out": args.out,
                "max_inner": args.max_inner,
                "max_outer": args.max_outer,
                "domain_desc": args.domain_desc,
            },
        )
        outputs = run_stage(args.stage, cfg, force=args.force)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingInputError as exc:
        print(f"missing input: {exc}", file=sys.stderr)
        return EXIT_MISSING_INPUT
    except UnvalidatedArtifactError as exc:
        print(f"unvalidated artifact: {exc}", file=sys.stderr)
        return EXIT_UNVALIDATED
    except BackendError as exc:
        print(f"backend failure: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    for name, path in outputs.items():
        print(f"{name}: {path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
