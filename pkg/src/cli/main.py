"""Command-line entry point: ``ftrsec truncation|metric|sweep|validate``."""
import argparse
import sys
from typing import Optional, Sequence

import structlog

from src.channel.coefficient_store import create_coefficient_store, set_default_store
from src.cli.commands import RunOptions, cmd_metric, cmd_truncation, parse_metrics
from src.cli.sweep import SWEEP_VARS, SweepRange, cmd_sweep
from src.cli.validate import cmd_validate
from src.utils.config import Config
from src.utils.errors import ConfigError, FtrsecError
from src.utils.logging_setup import LOG_LEVELS, configure_logging
from src.utils.scenario_config import ScenarioConfig

logger = structlog.get_logger(__name__)

EXIT_OK = 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario file (key = value lines)")
    common.add_argument("--out", help="write the CSV/report here instead of stdout")
    common.add_argument("--log-level", choices=LOG_LEVELS, type=str.upper, help="overrides FTRSEC_LOG_LEVEL")
    common.add_argument("--workers", type=int, help="process pool size, overrides FTRSEC_WORKERS")
    common.add_argument("--samples", type=int, help="Monte Carlo samples, overrides mc.samples")
    common.add_argument("--seed", type=int, help="Monte Carlo seed, overrides mc.seed")

    parser = argparse.ArgumentParser(
        prog="ftrsec",
        description="Secrecy metrics of FTR fading wiretap links",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    truncation = sub.add_parser("truncation", parents=[common], help="series truncation order per channel")
    truncation.add_argument(
        "--reference-sets", action="store_true", help="also tabulate the three reference (m, K, delta) sets"
    )

    metric = sub.add_parser("metric", parents=[common], help="evaluate secrecy metrics")
    metric.add_argument("--metric", default="asc", help="asc, sop, sopl, spsc or a comma-separated list")
    metric.add_argument("--oracle", action="store_true", help="compare with the quadrature oracle")
    metric.add_argument("--mc", action="store_true", help="add a Monte Carlo estimate")

    sweep = sub.add_parser("sweep", parents=[common], help="sweep one variable and write CSV")
    sweep.add_argument("--metric", default="asc", help="asc, sop, sopl, spsc or a comma-separated list")
    sweep.add_argument("--var", required=True, choices=SWEEP_VARS)
    sweep.add_argument("--from", dest="start", type=float, required=True)
    sweep.add_argument("--to", dest="stop", type=float, required=True)
    sweep.add_argument("--points", type=int, default=11)
    sweep.add_argument("--oracle", action="store_true", help="add the quadrature oracle column")
    sweep.add_argument("--mc", action="store_true", help="add Monte Carlo columns")
    sweep.add_argument("--gnuplot", action="store_true", help="write a companion .gp script next to --out")

    validate = sub.add_parser("validate", parents=[common], help="run the validation gate")
    validate.add_argument(
        "--perturb-d1", type=float, metavar="FACTOR", help="scale d_1 of the main channel (gate sensitivity)"
    )
    return parser


def runtime_config(args: argparse.Namespace) -> Config:
    config = Config.from_env()
    if args.log_level:
        config.log_level = args.log_level
    if args.workers is not None:
        config.workers = args.workers
    errors = config.validate()
    if errors:
        raise ConfigError(errors)
    return config


def load_scenario(args: argparse.Namespace, required: bool = True) -> Optional[ScenarioConfig]:
    if not args.config:
        if required:
            raise ConfigError("--config is required")
        return None
    return ScenarioConfig.load(args.config)


def dispatch(args: argparse.Namespace, config: Config) -> None:
    options = RunOptions(out=args.out, samples=args.samples, seed=args.seed)
    if args.samples is not None and args.samples < 1:
        raise ConfigError(f"--samples must be positive, got {args.samples}")

    if args.command == "truncation":
        cmd_truncation(load_scenario(args, required=not args.reference_sets), options, args.reference_sets)
    elif args.command == "metric":
        cmd_metric(load_scenario(args), config, options, parse_metrics(args.metric), args.oracle, args.mc)
    elif args.command == "sweep":
        sweep = SweepRange(args.var, args.start, args.stop, args.points)
        cmd_sweep(
            load_scenario(args), config, options, sweep, parse_metrics(args.metric),
            args.oracle, args.mc, args.gnuplot,
        )
    elif args.command == "validate":
        cmd_validate(load_scenario(args), config, options, args.perturb_d1)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the CLI and return its exit code."""
    args = build_parser().parse_args(argv)

    try:
        config = runtime_config(args)
    except ConfigError as e:
        configure_logging("INFO")
        for message in e.messages:
            logger.error(message)
        return e.exit_code

    configure_logging(config.log_level)
    store = create_coefficient_store(config)
    set_default_store(store)

    try:
        dispatch(args, config)
    except ConfigError as e:
        for message in e.messages:
            logger.error(message)
        return e.exit_code
    except FtrsecError as e:
        logger.error(str(e))
        return e.exit_code
    finally:
        try:
            store.save()
        except Exception as e:
            logger.warning(f"Could not save the coefficient cache: {e}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
