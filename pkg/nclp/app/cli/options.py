"""
Flags shared by the campaign subcommands and their merge into a CampaignConfig

Precedence: settings (NCLP_* environment, .env) < --config JSON file < flags.
"""

import argparse
import json
import logging
from pathlib import Path
from typing import Any, Callable, Dict, List

from app.core.config import settings
from app.core.exceptions import ConfigError
from app.schemas.campaign import CampaignConfig

logger = logging.getLogger(__name__)


def _list_of(cast: Callable[[str], Any], name: str) -> Callable[[str], List[Any]]:
    def parse(text: str) -> List[Any]:
        items = [item.strip() for item in text.split(",") if item.strip()]
        if not items:
            raise argparse.ArgumentTypeError(f"empty {name} list")
        try:
            return [cast(item) for item in items]
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid {name} list: '{text}'")

    return parse


int_list = _list_of(int, "integer")
float_list = _list_of(float, "number")


def add_campaign_arguments(parser: argparse.ArgumentParser, default_format: str = "json") -> None:
    parser.add_argument("--seed", type=int, default=None, help="Master seed (default: NCLP_SEED or settings).")
    parser.add_argument("--dims", type=int_list, default=None, help="Comma-separated matrix dimensions, e.g. 2,3,4.")
    parser.add_argument("--p-grid", type=float_list, default=None, dest="p_grid",
                        help="Comma-separated exponents p >= 2, e.g. 2,2.5,3.")
    parser.add_argument("--trials", type=int, default=None, help="Trials per cell.")
    parser.add_argument("--tol", type=float, default=None, help="Relative slack for gap assertions.")
    parser.add_argument("--out", type=str, default=None, help="Report path.")
    parser.add_argument("--format", choices=["json", "csv"], default=default_format, help="Report format.")
    parser.add_argument("--config", type=str, default=None, help="JSON file mirroring CampaignConfig.")


def read_config_file(path: str) -> Dict[str, Any]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"Config file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config file {path} is not valid JSON: {e}")
    if not isinstance(data, dict):
        raise ConfigError(f"Config file {path} must hold a JSON object")
    return data


def flag_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    overrides = {
        "seed": args.seed,
        "dims": args.dims,
        "p_grid": args.p_grid,
        "trials": args.trials,
        "rel_slack": args.tol,
    }
    if getattr(args, "inject_fault", False):
        overrides["inject_fault"] = True
    return {key: value for key, value in overrides.items() if value is not None}


def load_campaign_config(args: argparse.Namespace, **fixed: Any) -> CampaignConfig:
    """Merge config file and flags; pydantic ValidationError escapes to the CLI"""
    data = read_config_file(args.config) if args.config else {}
    data.update(flag_overrides(args))
    data.update(fixed)
    config = CampaignConfig.model_validate(data)
    logger.debug("Campaign config: %s", config.model_dump_json())
    return config


def default_out(args: argparse.Namespace, stem: str) -> str:
    if args.out:
        return args.out
    if stem == "verify" and args.format == "json":
        return str(Path(settings.REPORTS_PATH) / settings.REPORT_FILE)
    return str(Path(settings.REPORTS_PATH) / f"{stem}_report.{args.format}")
