"""
verify: run the full check campaign and write a gap report
"""

import argparse
import logging

from app.cli.options import add_campaign_arguments, default_out, load_campaign_config
from app.services.campaign_runner import run_campaign
from app.services.report_writer import console_summary, write_report

logger = logging.getLogger(__name__)


def register(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser("verify", help="Run every configured check over its cells.")
    add_campaign_arguments(parser)
    parser.add_argument("--inject-fault", action="store_true", dest="inject_fault",
                        help="Append a deliberately corrupted theorem cell (exercises exit code 1).")
    parser.set_defaults(run=run)
    return parser


def run(args: argparse.Namespace) -> int:
    config = load_campaign_config(args)
    report = run_campaign(config, threads=args.threads, progress=args.progress)
    path = write_report(report, default_out(args, "verify"), args.format)
    print(console_summary(report))
    print(f"report: {path}")
    return 0 if report.ok else 1
