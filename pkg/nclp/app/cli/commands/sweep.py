"""
sweep: minimum normalized theorem gap over the (dim x p) grid as CSV
"""

import argparse

from app.cli.options import add_campaign_arguments, default_out, load_campaign_config
from app.services.campaign_runner import sweep
from app.services.report_writer import write_report


def register(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser("sweep", help="Theorem gaps over dims x p grid, one CSV row per pair.")
    add_campaign_arguments(parser, default_format="csv")
    parser.set_defaults(run=run)
    return parser


def run(args: argparse.Namespace) -> int:
    config = load_campaign_config(args)
    report = sweep(config, threads=args.threads, progress=args.progress)
    path = write_report(report, default_out(args, "sweep"), args.format)

    print(f"{'dim':>4} {'p':>6} {'normalized_min_gap':>20} {'failures':>9}")
    for cell in report.cells:
        gap = "" if cell.normalized_min_gap is None else f"{cell.normalized_min_gap: .6e}"
        print(f"{cell.dim:>4} {cell.p:>6g} {gap:>20} {len(cell.failures):>9}")
    print(f"rows: {len(report.cells)}  failures: {report.failure_count}")
    print(f"table: {path}")
    return 0 if report.ok else 1
