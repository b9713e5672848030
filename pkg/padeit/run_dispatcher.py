"""Dispatch CLI subcommands to their handlers."""

from __future__ import annotations

import logging
from typing import Callable, Dict, List

from padeit import commands
from padeit.commands import RunContext
from padeit.errors import UsageError

logger = logging.getLogger(__name__)

Handler = Callable[[RunContext], List[dict]]


class RunDispatcher:
    """Look up a subcommand and execute it with the matching handler."""

    def __init__(self):
        self.handlers: Dict[str, Handler] = {
            "simulate": commands.cmd_simulate,
            "sweep-layout": commands.cmd_sweep_layout,
            "sweep-perturbation": commands.cmd_sweep_perturbation,
            "analyze": commands.cmd_analyze,
            "classify": commands.cmd_classify,
        }

    @property
    def subcommands(self) -> List[str]:
        return list(self.handlers)

    def execute(self, name: str, ctx: RunContext) -> List[dict]:
        handler = self.handlers.get(name)
        if handler is None:
            logger.error("Unsupported subcommand %s", name)
            raise UsageError(f"unsupported subcommand: {name}")
        logger.info("Running %s (seed %d, %d threads)", name, ctx.config.seed, ctx.threads)
        written = handler(ctx)
        logger.info("%s wrote %d files to %s", name, len(written), ctx.formatter.output_dir)
        return written
