"""
Command-line interface.

Subcommands live in `edgefuse.commands`; each module exposes
`register(subparsers)` and sets a `handler(args, context)` default on the
parser it adds.
"""

from __future__ import annotations

import argparse
import importlib
import sys
from dataclasses import dataclass, replace
from pathlib import Path

from edgefuse.config import Config, RunConfig, load_config, load_run_config
from edgefuse.utils.errors import EdgefuseError
from edgefuse.utils.logging import get_logger, setup_logging

logger = get_logger(__name__)

COMMANDS: list[tuple[str, bool]] = [
    ("edgefuse.commands.gen", True),
    ("edgefuse.commands.gt", True),
    ("edgefuse.commands.train", True),
    ("edgefuse.commands.infer", True),
    ("edgefuse.commands.segment", True),
    ("edgefuse.commands.refine", True),
    ("edgefuse.commands.evaluate", True),
]


@dataclass(frozen=True)
class CommandContext:
    """What every subcommand handler receives besides its arguments."""

    config: Config
    run_config: RunConfig
    config_given: bool


def _load_commands(subparsers: argparse._SubParsersAction) -> None:
    """Register all enabled subcommands."""
    for module_path, enabled in COMMANDS:
        if enabled:
            module = importlib.import_module(module_path)
            module.register(subparsers)
            logger.debug("Loaded command: %s", module_path)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="edgefuse",
        description="Depth-edge fusion, hierarchical segmentation and disparity refinement.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("--config", type=Path, default=None, help="run config file (section.key = value)")
    parser.add_argument(
        "--log-level",
        default=None,
        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
        help="override EDGEFUSE_LOG_LEVEL",
    )
    parser.add_argument("--log-file", default=None, help="override EDGEFUSE_LOG_FILE")
    parser.add_argument("--jobs", type=int, default=None, help="worker processes; 1 is fully reproducible")
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    _load_commands(subparsers)
    return parser


def run(argv: list[str] | None = None) -> int:
    """
    Parse arguments, run one subcommand and map failures to exit codes.

    Returns:
        int: 0 on success, the error's exit code otherwise
    """
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        config = load_config()
    except ValueError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        return 1
    config = replace(
        config,
        log_level=args.log_level or config.log_level,
        log_file=args.log_file or config.log_file,
        jobs=args.jobs if args.jobs is not None else config.jobs,
    )
    if config.jobs < 1:
        parser.error("--jobs must be >= 1")
    setup_logging(config)

    try:
        context = CommandContext(
            config=config,
            run_config=load_run_config(args.config),
            config_given=args.config is not None,
        )
        args.handler(args, context)
    except EdgefuseError as e:
        logger.error("%s failed: %s", args.command, e)
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        logger.exception("%s crashed: %s", args.command, e)
        return 1
    return 0
