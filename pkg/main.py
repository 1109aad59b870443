"""
Verdoorn Toolkit - Entry Point
------------------------------
Command-line entry point: fit, unitroot, simulate and scatter.
"""

import argparse
import logging
import os
import sys
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv

# Add the project root to the path to allow imports
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from core.command_processor import EXIT_CONFIG, CommandProcessor
from core.errors import ConfigError
from core.run_config import load_defaults

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def setup_logging(config: Optional[Dict[str, Any]] = None):
    """Configure the logging system from the ``logging`` section and VERDOORN_LOG_LEVEL."""
    config = config or {}
    level_name = os.environ.get("VERDOORN_LOG_LEVEL") or config.get("level", "INFO")
    level = getattr(logging, str(level_name).upper(), logging.INFO)
    handlers: List[logging.Handler] = [logging.StreamHandler()]
    if config.get("file"):
        handlers.append(logging.FileHandler(config["file"]))
    logging.basicConfig(level=level, format=LOG_FORMAT, handlers=handlers, force=True)


def load_config(path: Optional[str] = None) -> Dict[str, Any]:
    """Load config.yml (or VERDOORN_CONFIG)."""
    return load_defaults(path)


def _add_data_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--input", help="panel CSV file")
    parser.add_argument("--industries", help="comma-separated industry filter, labels taken verbatim")
    parser.add_argument("--periods", action="append", metavar="START-END", help="period window, repeatable")
    parser.add_argument("--growth-method", choices=["log", "simple"])
    parser.add_argument("--entity-col", help="entity (region) column")
    parser.add_argument("--period-col", help="period (year) column")
    parser.add_argument("--industry-col", help="industry column")
    parser.add_argument("--output-col", help="output level column")
    parser.add_argument("--productivity-col", help="productivity level column ('' to derive it)")
    parser.add_argument("--employment-col", help="employment column used to derive productivity")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--formats", help="comma-separated subset of text,csv,jsonl")
    parser.add_argument("--workers", type=int, help="panels analysed concurrently")
    parser.add_argument("--config", help="YAML file overriding flags and defaults")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="verdoorn", description="Verdoorn-law panel econometrics toolkit")
    subcommands = parser.add_subparsers(dest="command", required=True)

    fit = subcommands.add_parser("fit", help="FE/RE/OLS/DPD estimation tables")
    _add_data_flags(fit)
    fit.add_argument("--estimators", help="comma-separated subset of FE,RE,OLS,DPD")
    fit.add_argument("--max-instrument-lags", type=int, help="deepest lag used as a DPD instrument")
    fit.add_argument("--no-lagged-dependent", action="store_true", help="drop the lagged dependent variable from DPD")

    unitroot = subcommands.add_parser("unitroot", help="Fisher-type panel unit-root tests")
    _add_data_flags(unitroot)
    unitroot.add_argument("--lag-policy", help="fixed:K, escalate or until_significant")

    scatter = subcommands.add_parser("scatter", help="(q, p) growth pairs and level data per industry as CSV")
    _add_data_flags(scatter)

    simulate = subcommands.add_parser("simulate", help="Monte Carlo study summary")
    simulate.add_argument("--study", help="key = value study file")
    simulate.add_argument("--estimator", help="OLS, FE, RE, DPD, F_FE_OLS, BP_LM or HAUSMAN")
    simulate.add_argument("--replications", type=int)
    simulate.add_argument("--seed", type=int)
    simulate.add_argument("--workers", type=int)
    simulate.add_argument("--out", help="output directory")
    return parser


def overrides_from_args(args: argparse.Namespace) -> Dict[str, Any]:
    """Nest the data flags like config.yml; unset flags stay None and never override."""
    get = lambda name: getattr(args, name, None)
    variables = {"output": get("output_col"), "productivity": get("productivity_col"), "employment": get("employment_col")}
    return {
        "run": {
            "input": get("input"),
            "industries": get("industries"),
            "periods": get("periods"),
            "growth_method": get("growth_method"),
            "workers": get("workers"),
        },
        "schema": {
            "entity": get("entity_col"),
            "period": get("period_col"),
            "industry": get("industry_col"),
            "variables": {k: v for k, v in variables.items() if v is not None} or None,
        },
        "fit": {
            "estimators": get("estimators"),
            "max_instrument_lags": get("max_instrument_lags"),
            "lagged_dependent": False if get("no_lagged_dependent") else None,
        },
        "unitroot": {"lag_policy": get("lag_policy")},
        "output": {"dir": get("out"), "formats": get("formats")},
    }


def parameters_from_args(args: argparse.Namespace) -> Dict[str, Any]:
    if args.command == "simulate":
        study = {"estimator": args.estimator, "replications": args.replications, "seed": args.seed, "workers": args.workers}
        return {
            "study": args.study,
            "study_overrides": {k: v for k, v in study.items() if v is not None},
            "out": args.out,
        }
    return {"overrides": overrides_from_args(args), "config_path": args.config}


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point; returns the process exit code."""
    load_dotenv()
    args = build_parser().parse_args(argv)

    try:
        config = load_config()
    except ConfigError as e:
        setup_logging()
        logging.getLogger("verdoorn").error(f"Error loading configuration: {e}")
        return EXIT_CONFIG

    setup_logging(config.get("logging"))
    logger = logging.getLogger("verdoorn")
    logger.info(f"Starting {config.get('toolkit', {}).get('name', 'verdoorn')} {args.command}")

    processor = CommandProcessor(config)
    result = processor.execute(args.command, parameters_from_args(args))

    print(result.get("message", ""))
    for path in result.get("outputs", []):
        print(f"  {path}")
    if not result.get("success"):
        print(f"  error: {result.get('error')}", file=sys.stderr)
    logger.info(f"{args.command} finished with exit code {result['exit_code']}")
    return result["exit_code"]


if __name__ == "__main__":
    sys.exit(main())
