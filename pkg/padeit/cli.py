"""Command-line entrypoint: ``python -m padeit.cli <subcommand> [options]``."""

from __future__ import annotations

import argparse
import logging
import sys
from typing import List, Optional

from pydantic import ValidationError

from padeit.commands import ANALYZE_MODES, RunContext
from padeit.config import LOG_FORMAT, get_settings
from padeit.errors import UsageError
from padeit.experiment_models import ErrorResponse, ExperimentConfig, load_config
from padeit.output_formatter import OutputFormatter
from padeit.run_dispatcher import RunDispatcher

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="padeit", description="Wearable-pad EIT bladder simulation and analysis")
    common = _Parser(add_help=False)
    common.add_argument("--config", help="experiment config JSON (defaults when absent)")
    common.add_argument("--out", help="output directory (overrides config.output_dir)")
    common.add_argument("--seed", type=int, help="master seed (overrides config.seed)")
    common.add_argument("--threads", type=int, help="worker threads (default PADEIT_THREADS)")

    sub = parser.add_subparsers(dest="command", metavar="subcommand")
    sub.required = True
    sub.add_parser("simulate", parents=[common], help="empty/full frames, reconstruction and slice")
    sub.add_parser("sweep-layout", parents=[common], help="RoI response ratio per electrode layout")
    sub.add_parser("sweep-perturbation", parents=[common], help="perturbed dataset and accuracy versus k")

    analyze = sub.add_parser("analyze", parents=[common], help="signal analysis of a frame CSV")
    analyze.add_argument("mode", choices=ANALYZE_MODES)
    analyze.add_argument("--input", required=True, help="frame CSV")
    analyze.add_argument("--input-b", help="second frame CSV for compare")
    analyze.add_argument("--window", type=float, help="window length in seconds")
    analyze.add_argument("--group-size", type=int, help="frames per group")
    analyze.add_argument("--rate", type=float, help="frame rate in Hz (inferred from timestamps when absent)")

    classify = sub.add_parser("classify", parents=[common], help="accuracy, fullness AUC and ROC from a dataset CSV")
    classify.add_argument("--dataset", required=True, help="dataset CSV written by sweep-perturbation")
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out:
        overrides["output_dir"] = args.out
    rate = getattr(args, "rate", None)
    if rate is not None:
        overrides["analysis"] = {**config.analysis.model_dump(), "rate": rate}
    if overrides:
        config = ExperimentConfig.model_validate({**config.model_dump(), **overrides})
    return config


def _options(args: argparse.Namespace) -> dict:
    if args.command == "analyze":
        inputs = [args.input] + ([args.input_b] if args.input_b else [])
        if args.window is not None and not args.window > 0:
            raise UsageError("--window must be positive")
        if args.group_size is not None and args.group_size < 1:
            raise UsageError("--group-size must be at least 1")
        return {"mode": args.mode, "inputs": inputs, "window": args.window, "group_size": args.group_size}
    if args.command == "classify":
        return {"dataset": args.dataset}
    return {}


def _report(exc: BaseException) -> None:
    response = ErrorResponse(error=type(exc).__name__, detail=str(exc) or None)
    sys.stderr.write(response.model_dump_json() + "\n")


def run(argv: Optional[List[str]] = None) -> int:
    """Parse ``argv``, run one subcommand and return the process exit code."""
    settings = get_settings()
    logging.basicConfig(
        level=getattr(logging, settings.log_level),
        format=LOG_FORMAT,
        handlers=[logging.StreamHandler(sys.stdout)],
    )
    try:
        args = build_parser().parse_args(argv)
        threads = args.threads if args.threads is not None else settings.threads
        if threads < 1:
            raise UsageError("--threads must be at least 1")
        config = resolve_config(args)
        ctx = RunContext(
            config=config,
            formatter=OutputFormatter(config.output_dir),
            threads=threads,
            options=_options(args),
        )
        RunDispatcher().execute(args.command, ctx)
    except (ValidationError, ValueError, OSError) as exc:
        _report(exc)
        return EXIT_USAGE
    except Exception as exc:
        logger.exception("Run failed")
        _report(exc)
        return EXIT_RUNTIME
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
