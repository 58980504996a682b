"""Parameter sweeps over a scenario, evaluated point by point in a process pool."""
import asyncio
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np
import structlog

from src.channel.coefficient_store import create_coefficient_store, set_default_store
from src.cli.commands import RunOptions, strict_tables
from src.cli.report import csv_text, write_output
from src.secrecy.metrics import evaluate_metric
from src.simulation.mc_oracle import estimate_metrics
from src.utils.config import Config
from src.utils.errors import ConfigError
from src.utils.logging_setup import configure_logging
from src.utils.scenario_config import ScenarioConfig

logger = structlog.get_logger(__name__)

SWEEP_HEADER = (
    "sweep_var", "value", "metric", "analytic", "oracle",
    "mc_mean", "mc_stderr", "n_trunc_d", "n_trunc_e",
)

SWEEP_VARS = ("gamma_d_db", "gamma_e_db", "rho_db", "rate", "m_d", "m_e")

AXIS_LABELS = {
    "gamma_d_db": "average SNR of the main channel (dB)",
    "gamma_e_db": "average SNR of the eavesdropper channel (dB)",
    "rho_db": "rho (dB)",
    "rate": "target secrecy rate",
    "m_d": "m of the main channel",
    "m_e": "m of the eavesdropper channel",
}


@dataclass(frozen=True)
class SweepRange:
    var: str
    start: float
    stop: float
    points: int

    def __post_init__(self):
        errors = []
        if self.var not in SWEEP_VARS:
            errors.append(f"--var must be one of {', '.join(SWEEP_VARS)}, got {self.var!r}")
        if not self.start < self.stop:
            errors.append(f"--from must be smaller than --to (got {self.start} and {self.stop})")
        if self.points < 2:
            errors.append(f"--points must be at least 2, got {self.points}")
        if errors:
            raise ConfigError(errors)

    def values(self) -> list[float]:
        return [float(v) for v in np.linspace(self.start, self.stop, self.points)]


@dataclass(frozen=True)
class SweepPoint:
    """Everything one worker needs to evaluate one sweep value."""

    scenario_config: ScenarioConfig
    var: str
    value: float
    metrics: tuple
    oracle: bool
    mc: bool
    mc_batch: int
    samples: Optional[int]
    seed: Optional[int]


def apply_sweep_value(scenario_config: ScenarioConfig, var: str, value: float) -> ScenarioConfig:
    """Scenario with the swept quantity set to ``value``."""
    if var == "gamma_d_db":
        swept = scenario_config.with_avg_snr_db("main", value)
    elif var == "gamma_e_db":
        swept = scenario_config.with_avg_snr_db("eaves", value)
    elif var == "rho_db":
        # rho = avg SNR_D / avg SNR_E with the eavesdropper held fixed
        swept = scenario_config.with_avg_snr_db("main", scenario_config.avg_snr_db("eaves") + value)
    elif var == "rate":
        swept = replace(scenario_config, rate_value=value)
    elif var == "m_d":
        swept = scenario_config.with_channel("main", m=value)
    elif var == "m_e":
        swept = scenario_config.with_channel("eaves", m=value)
    else:
        raise ConfigError(f"unknown sweep variable {var!r}")

    errors = swept.validate()
    if errors:
        raise ConfigError([f"{var}={value:g}: {message}" for message in errors])
    return swept


def run_point(point: SweepPoint) -> list[tuple]:
    """CSV rows (one per metric) for one sweep value."""
    scenario_config = apply_sweep_value(point.scenario_config, point.var, point.value)
    scenario = scenario_config.scenario()
    tables = strict_tables(scenario, scenario_config.truncation_targets())

    estimates = {}
    if point.mc:
        cfg = scenario_config.sample_config(point.mc_batch, point.samples, point.seed)
        estimates = estimate_metrics(scenario, point.metrics, cfg=cfg)

    rows = []
    for name in point.metrics:
        result = evaluate_metric(
            name, scenario, tables=tables, oracle=point.oracle, rel_tol=scenario_config.quad_rel_tol
        )
        estimate = estimates.get(name)
        rows.append((
            point.var,
            point.value,
            name,
            result.value,
            result.oracle_value,
            estimate.mean if estimate else None,
            estimate.std_error if estimate else None,
            result.n_trunc_main,
            result.n_trunc_eaves,
        ))
    return rows


def _init_worker(config: Config) -> None:
    configure_logging(config.log_level)
    # Workers share a read-only view of the cache; only the parent saves it.
    set_default_store(create_coefficient_store(config))


class SweepOrchestrator:
    """Dispatches sweep points to a process pool and gathers them in order."""

    def __init__(self, config: Config):
        """Initialize orchestrator.

        Args:
            config: Runtime configuration (worker count, cache backend)
        """
        self.config = config

    async def run(self, points: list[SweepPoint]) -> list[tuple]:
        """Rows of all points, in submission order whatever the completion order."""
        if self.config.workers <= 1 or len(points) <= 1:
            results = []
            for index, point in enumerate(points, 1):
                results.append(run_point(point))
                logger.info(f"Sweep point {index}/{len(points)}: {point.var}={point.value:g}")
            return [row for rows in results for row in rows]

        loop = asyncio.get_running_loop()
        with ProcessPoolExecutor(
            max_workers=self.config.workers,
            initializer=_init_worker,
            initargs=(self.config,),
        ) as pool:
            tasks = [loop.run_in_executor(pool, run_point, point) for point in points]
            results = await asyncio.gather(*tasks)
        logger.info(f"Sweep finished: {len(points)} points on {self.config.workers} workers")
        return [row for rows in results for row in rows]


def gnuplot_script(csv_path: str, sweep: SweepRange, metrics: tuple) -> str:
    """Companion gnuplot script plotting the analytic column per metric."""
    lines = [
        "set datafile separator ','",
        "set key autotitle columnhead",
        f"set xlabel '{AXIS_LABELS[sweep.var]}'",
        "set ylabel 'metric'",
        "set grid",
    ]
    plots = [
        f"'{csv_path}' using 2:(strcol(3) eq '{name}' ? $4 : 1/0) with linespoints title '{name}'"
        for name in metrics
    ]
    lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"


def cmd_sweep(
    scenario_config: ScenarioConfig,
    config: Config,
    options: RunOptions,
    sweep: SweepRange,
    metrics: tuple,
    oracle: bool = False,
    mc: bool = False,
    gnuplot: bool = False,
) -> None:
    """Evaluate ``metrics`` over the sweep range and write the CSV."""
    if gnuplot and not options.out:
        raise ConfigError("--gnuplot needs --out (the script is written next to the CSV)")

    points = [
        SweepPoint(
            scenario_config=scenario_config,
            var=sweep.var,
            value=value,
            metrics=metrics,
            oracle=oracle,
            mc=mc,
            mc_batch=config.mc_batch,
            samples=options.samples,
            seed=options.seed,
        )
        for value in sweep.values()
    ]
    # Fail on an out-of-domain sweep point before any work is dispatched.
    for point in points:
        apply_sweep_value(scenario_config, point.var, point.value)

    rows = asyncio.run(SweepOrchestrator(config).run(points))
    write_output(csv_text(SWEEP_HEADER, rows), options.out)

    if gnuplot:
        script_path = Path(options.out).with_suffix(".gp")
        script_path.write_text(gnuplot_script(options.out, sweep, metrics), encoding="utf-8")
        logger.info(f"gnuplot script written to {script_path}")
