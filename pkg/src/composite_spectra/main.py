import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence, get_args

from pydantic import ValidationError

from composite_spectra.experiments import EXIT_INVALID_CONFIG, ExperimentRunner
from composite_spectra.settings import (
    Command,
    ExperimentConfig,
    Family,
    OutputSettings,
    PrecisionSettings,
)

# Flags that map one to one onto ExperimentConfig fields.
CONFIG_FLAGS = (
    "family",
    "theta",
    "k",
    "n",
    "rows",
    "cols",
    "quadrature",
    "bits",
    "tag",
    "grid",
    "delta_min",
    "delta_max",
    "delta_points",
    "pair",
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="composite-spectra: singular spectra and stability of composite ill-posed operators"
    )
    parser.add_argument("command", choices=get_args(Command))
    parser.add_argument("--config", type=Path, help="JSON file with an experiment configuration")
    parser.add_argument("--family", choices=get_args(Family))
    parser.add_argument("--theta", type=float)
    parser.add_argument("--k", type=int)
    parser.add_argument("--n", type=int)
    parser.add_argument("--rows", type=int)
    parser.add_argument("--cols", type=int)
    parser.add_argument("--quadrature", type=int)
    parser.add_argument("--bits", type=int)
    parser.add_argument("--output-dir", type=Path)
    parser.add_argument("--no-cache", action="store_true")
    parser.add_argument("--tag")
    parser.add_argument("--grid", type=int)
    parser.add_argument("--delta-min", type=float)
    parser.add_argument("--delta-max", type=float)
    parser.add_argument("--delta-points", type=int)
    parser.add_argument("--pair", choices=["j", "embedding"])
    parser.add_argument("--quick", action="store_true", help="desk-scale acceptance run")
    parser.add_argument("--export-matrix", action="store_true")
    parser.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    return parser


def load_config_file(path: Path) -> dict[str, Any]:
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ValueError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from e
    if not isinstance(payload, dict):
        raise ValueError(f"{path}: the configuration must be a JSON object")
    return payload


def merge_arguments(args: argparse.Namespace, file_values: dict[str, Any]) -> dict[str, Any]:
    """File values first, environment defaults where the file is silent, flags last."""
    output = OutputSettings()
    values: dict[str, Any] = {
        "bits": PrecisionSettings().bits,
        "output_dir": output.output_dir,
        "cache": output.cache,
    }
    values.update(file_values)
    values["command"] = args.command
    for name in CONFIG_FLAGS:
        flag = getattr(args, name)
        if flag is not None:
            values[name] = flag
    if args.output_dir is not None:
        values["output_dir"] = args.output_dir
    if args.no_cache:
        values["cache"] = False
    if args.quick:
        values["quick"] = True
    if args.export_matrix:
        values["export_matrix"] = True
    return values


def main(argv: Sequence[str] | None = None) -> int:
    """
    Main entry point for the composite-spectra script defined in
    pyproject.toml. It validates the configuration, runs one command and
    returns its exit status.
    """
    args = build_parser().parse_args(argv)
    level = args.log_level or OutputSettings().log_level
    logging.basicConfig(
        level=getattr(logging, level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    logger = logging.getLogger("composite_spectra")

    try:
        file_values = load_config_file(args.config) if args.config else {}
        config = ExperimentConfig.model_validate(merge_arguments(args, file_values))
    except ValidationError as e:
        logger.error(f"Invalid configuration with {e.error_count()} error(s)")
        for error in e.errors():
            location = ".".join(str(part) for part in error["loc"]) or "<config>"
            print(f"{location}: {error['msg']}", file=sys.stderr)
        return EXIT_INVALID_CONFIG
    except (OSError, ValueError) as e:
        logger.error(f"Cannot load configuration: {e}")
        print(str(e), file=sys.stderr)
        return EXIT_INVALID_CONFIG

    outcome = ExperimentRunner(config).run()
    suffix = " (cached)" if outcome.cached else ""
    logger.info(f"'{outcome.command}' exited with {outcome.exit_status}{suffix}")
    for artifact in outcome.artifacts:
        print(config.output_dir / artifact)
    return outcome.exit_status


if __name__ == "__main__":
    sys.exit(main())
