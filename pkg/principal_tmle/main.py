"""
Command-line entry point: estimate, simulate, coverage and diagnose
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import pandas as pd

from principal_tmle.estimation_service import EstimationService
from principal_tmle.exceptions import ConfigError, PrincipalTMLEError
from principal_tmle.io import (
    ingest_csv,
    load_run_config,
    report_payload,
    write_dataset,
    write_influence,
    write_json,
    write_manifest,
    write_table,
)
from principal_tmle.models import Dataset, ErrorResponse, RunConfig
from principal_tmle.utils.helpers import configure_logging

logger = logging.getLogger(__name__)

COMMANDS = ("estimate", "simulate", "coverage", "diagnose")
EXIT_OK, EXIT_UNEXPECTED, EXIT_ERROR = 0, 1, 2

# CLI flag -> (section, key)
FLAG_KEYS: Dict[str, Tuple[str, str]] = {
    "input": ("data", "input"),
    "output": ("run", "output"),
    "seed": ("run", "seed"),
    "workers": ("run", "workers"),
    "mode": ("run", "mode"),
    "log_level": ("run", "log_level"),
    "s1_star": ("target", "s1_star"),
    "bandwidth": ("continuous", "bandwidth"),
    "kernel": ("continuous", "kernel"),
    "folds": ("nuisance", "folds"),
    "reps": ("simulation", "reps"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="principal_tmle",
        description="Principally stratified treatment effects under crossover designs",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="SECTION__KEY=value configuration file")
    common.add_argument("--input", help="Input CSV (estimate, diagnose)")
    common.add_argument("--output", help="Output directory")
    common.add_argument("--seed", type=int)
    common.add_argument("--workers", type=int, help="Worker processes for replications")
    common.add_argument("--mode", help="tmle | cv_tmle | ipw_tmle | one_step | continuous_cv_tmle")
    common.add_argument("--s1-star", dest="s1_star", help="Biomarker stratum value or label")
    common.add_argument("--bandwidth", help="Bandwidth or lscv_density")
    common.add_argument("--kernel", help="uniform | gaussian | gaussian4")
    common.add_argument("--folds", type=int, help="Cross-fitting folds")
    common.add_argument("--reps", type=int, help="Replications of the coverage study")
    common.add_argument("--log-level", dest="log_level", help="DEBUG | INFO | WARNING | ERROR")

    subparsers = parser.add_subparsers(dest="command", required=True)
    subparsers.add_parser("estimate", parents=[common], help="Estimate a contrast on a CSV dataset")
    subparsers.add_parser("simulate", parents=[common], help="Simulate a crossover trial")
    subparsers.add_parser("coverage", parents=[common], help="Monte Carlo coverage study")
    subparsers.add_parser("diagnose", parents=[common], help="Psi_4, influence-function and identification checks")
    return parser


def overrides_from_args(args: argparse.Namespace) -> Dict[Tuple[str, str], Any]:
    return {key: getattr(args, flag) for flag, key in FLAG_KEYS.items() if getattr(args, flag, None) is not None}


def _load_input(cfg: RunConfig) -> Dataset:
    if cfg.data.input is None:
        raise ConfigError("An input file is required (--input or DATA__INPUT)")
    return ingest_csv(cfg.data.input, cfg.data.column_map(), cfg.data.covariates or None, cfg.data.biomarker)


def _emit(payload: Dict[str, Any], path: Path) -> None:
    write_json(payload, path)
    sys.stdout.write(path.read_text(encoding="utf-8"))


def run(command: str, cfg: RunConfig) -> int:
    """
    Execute one command and write its artifacts under RUN__OUTPUT

    estimate -> report.json, influence.csv, manifest.json
    simulate -> dataset.csv, manifest.json
    coverage -> coverage.csv, bias_probe.csv, manifest.json
    diagnose -> diagnose.json, manifest.json

    Returns:
        Exit status (0 on success)
    """
    if command not in COMMANDS:
        raise ConfigError(f"Unknown command '{command}'", {"commands": list(COMMANDS)})
    output = Path(cfg.run.output)
    service = EstimationService(cfg)
    extra: Dict[str, Any] = {}

    if command == "estimate":
        d = _load_input(cfg)
        est, report = service.estimate_and_summarize(d)
        write_influence(est, output / "influence.csv")
        _emit(report_payload(report, est, cfg.run.seed), output / "report.json")
    elif command == "simulate":
        d = service.simulate()
        write_dataset(d, output / "dataset.csv")
        extra["assignment"] = "fixed_margins" if cfg.simulation.fixed_margins else "bernoulli"
        extra["n"] = d.n
    elif command == "coverage":
        frame = service.coverage()
        write_table(frame, output / "coverage.csv")
        bias_tables: List[pd.DataFrame] = []
        slopes: Dict[str, Optional[float]] = {}
        for s1_star in cfg.simulation.s1_grid:
            slope, table = service.bias_probe(s1_star)
            bias_tables.append(table.assign(s1_star=s1_star))
            slopes[repr(float(s1_star))] = slope
        write_table(pd.concat(bias_tables, ignore_index=True), output / "bias_probe.csv")
        extra["bias_decay_slopes"] = slopes
        extra["assignment"] = "fixed_margins" if cfg.simulation.fixed_margins else "bernoulli"
    else:
        d = _load_input(cfg)
        _emit(service.diagnose(d), output / "diagnose.json")

    write_manifest(cfg, command, output / "manifest.json", extra)
    logger.info("%s finished; artifacts in %s", command, output)
    return EXIT_OK


def _report_error(error: str, message: str, details: Dict[str, Any]) -> None:
    response = ErrorResponse(error=error, message=message, details=details)
    sys.stderr.write(json.dumps(response.model_dump(mode="json"), default=str) + "\n")


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_run_config(args.config, overrides_from_args(args))
        configure_logging(cfg.run.log_level)
        return run(args.command, cfg)
    except PrincipalTMLEError as exc:
        payload = exc.payload()
        _report_error(payload["error"], payload["message"], payload["details"])
        return EXIT_ERROR
    except Exception as exc:  # noqa: BLE001
        logger.exception("Unexpected failure")
        _report_error(exc.__class__.__name__, str(exc), {})
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())
