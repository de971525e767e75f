"""
Command-line router - assembles every subcommand module
"""

import argparse
import logging
import sys
from typing import List, Optional

from pydantic import ValidationError

from app.cli.commands import check, counterexample, derivative, semigroup, sweep, verify
from app.core.config import settings
from app.core.exceptions import (
    ConfigError,
    DomainError,
    ExpectationError,
    GeneratorError,
    InvariantViolation,
    LabError,
)
from app.core.logging import setup_logging

logger = logging.getLogger(__name__)

COMMANDS = (verify, sweep, counterexample, derivative, semigroup, check)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nclp",
        description=f"{settings.PROJECT_NAME} {settings.VERSION}: numerical checks of the L_p trace inequality "
                    "tau(|a-b|^p) <= tau((a-b)(a^(p-1) - b^(p-1))) and its corollaries.",
    )
    parser.add_argument("--threads", type=int, default=None,
                        help="Worker processes for campaign cells (0 = all cores; default: settings.THREADS).")
    parser.add_argument("--log-level", type=str, default=None, dest="log_level",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="Logging level on stderr.")
    parser.add_argument("--quiet", action="store_true", help="Disable progress bars.")
    subparsers = parser.add_subparsers(dest="command", metavar="<command>")
    subparsers.required = True
    for command in COMMANDS:
        command.register(subparsers)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits with 2 on usage errors and 0 on --help
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    setup_logging(args.log_level or settings.LOG_LEVEL)
    if args.threads is not None and args.threads < 0:
        print("error: --threads must be >= 0", file=sys.stderr)
        return EXIT_USAGE
    args.progress = not args.quiet and sys.stderr.isatty()

    try:
        return args.run(args)
    except ValidationError as e:
        print(f"error: invalid configuration or operands\n{e}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, DomainError, ExpectationError, GeneratorError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except InvariantViolation as e:
        print(f"check failed: {e}")
        return EXIT_FAILURE
    except LabError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_USAGE
