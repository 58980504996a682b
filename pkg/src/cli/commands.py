"""``truncation`` and ``metric`` commands."""
from dataclasses import dataclass
from typing import Optional

import structlog

from src.channel.ftr_model import (
    DEFAULT_N_MAX,
    DEFAULT_TARGET_EPS,
    FtrParams,
    build_coefficient_table,
    truncation_error,
)
from src.cli.report import csv_text, key_value_report, write_output
from src.secrecy.metrics import METRICS, evaluate_metric
from src.secrecy.scenario import ChannelTables, TruncationTargets, WiretapScenario, build_channel_tables
from src.simulation.mc_oracle import estimate_metrics
from src.utils.config import Config
from src.utils.errors import ConfigError, NumericsError, ValidationFailure
from src.utils.scenario_config import ScenarioConfig

logger = structlog.get_logger(__name__)

TRUNCATION_HEADER = ("channel", "m", "k", "delta", "n_trunc", "eps", "verified")

# (m, K, Delta) of the published truncation table; sigma2 does not affect N.
REFERENCE_SETS = (
    (15.5, 5.0, 0.4),
    (8.5, 5.0, 0.35),
    (25.5, 3.0, 0.48),
)

METRIC_UNITS = {"asc": "nats", "sop": "probability", "sopl": "probability", "spsc": "probability"}


@dataclass(frozen=True)
class RunOptions:
    """Flags shared by the commands."""

    out: Optional[str] = None
    samples: Optional[int] = None
    seed: Optional[int] = None


def parse_metrics(text: str) -> tuple:
    """Comma-separated metric names, in the given order."""
    names = tuple(name.strip().lower() for name in text.split(",") if name.strip())
    unknown = [name for name in names if name not in METRICS]
    if not names or unknown:
        raise ConfigError(f"--metric must list metrics from {', '.join(METRICS)}, got {text!r}")
    return names


def strict_tables(scenario: WiretapScenario, trunc: TruncationTargets) -> ChannelTables:
    """Channel tables, raising NumericsError when a truncation target is unmet."""
    tables = build_channel_tables(scenario, trunc)
    notes = tables.diagnostics()
    if notes:
        raise NumericsError("; ".join(notes))
    return tables


def verify_truncation(table) -> bool:
    """Recompute eps(N) <= target < eps(N - 1) independently of the search."""
    n = table.n_trunc
    if truncation_error(table, n) > table.target_eps:
        return False
    return n == 0 or truncation_error(table, n - 1) > table.target_eps


def truncation_rows(channels: list[tuple[str, FtrParams]], target_eps: float, n_max: int) -> tuple[list, list]:
    """CSV rows and the channels whose targets were not met."""
    rows = []
    failed = []
    for name, params in channels:
        table = build_coefficient_table(params, target_eps, n_max)
        verified = table.converged and verify_truncation(table)
        if not table.converged:
            failed.append(name)
        rows.append((name, params.m, params.k, params.delta, table.n_trunc, table.eps, verified))
        logger.info(f"{name}: N={table.n_trunc}, eps={table.eps:.3e}, verified={verified}")
    return rows, failed


def cmd_truncation(
    scenario_config: Optional[ScenarioConfig],
    options: RunOptions,
    reference_sets: bool = False,
) -> None:
    """Truncation order N and error eps(N) per channel."""
    channels = []
    target_eps, n_max = DEFAULT_TARGET_EPS, DEFAULT_N_MAX
    if scenario_config is not None:
        target_eps, n_max = scenario_config.target_eps, scenario_config.n_max
        channels += [(name, scenario_config.channel_params(name)) for name in ("main", "eaves")]
    elif not reference_sets:
        raise ConfigError("--config is required unless --reference-sets is given")
    if reference_sets:
        channels += [
            ("reference", FtrParams(m=m, k=k, delta=delta, sigma2=0.5)) for m, k, delta in REFERENCE_SETS
        ]

    rows, failed = truncation_rows(channels, target_eps, n_max)
    write_output(csv_text(TRUNCATION_HEADER, rows), options.out)
    if failed:
        raise NumericsError(f"truncation target {target_eps:g} not met by N={n_max} for {', '.join(failed)}")


def cmd_metric(
    scenario_config: ScenarioConfig,
    config: Config,
    options: RunOptions,
    metrics: tuple,
    oracle: bool = False,
    mc: bool = False,
) -> None:
    """Evaluate one or more metrics, optionally against the oracles."""
    scenario = scenario_config.scenario()
    tables = strict_tables(scenario, scenario_config.truncation_targets())

    estimates = {}
    if mc:
        cfg = scenario_config.sample_config(config.mc_batch, options.samples, options.seed)
        estimates = estimate_metrics(scenario, metrics, cfg=cfg, workers=config.workers)

    sections = []
    disagreements = []
    for name in metrics:
        result = evaluate_metric(
            name, scenario, tables=tables, oracle=oracle, rel_tol=scenario_config.quad_rel_tol
        )
        estimate = estimates.get(name)
        pairs = [
            ("metric", name),
            ("value", result.value),
            ("unit", METRIC_UNITS[name]),
            ("n_trunc_main", result.n_trunc_main),
            ("n_trunc_eaves", result.n_trunc_eaves),
            ("eps_bound", result.eps_bound),
            ("oracle", result.oracle_value),
            ("oracle_delta", result.oracle_delta),
            ("mc_mean", estimate.mean if estimate else None),
            ("mc_stderr", estimate.std_error if estimate else None),
        ]
        pairs += [("note", note) for note in result.diagnostics]
        sections.append(key_value_report(pairs))
        if oracle and not result.oracle_agrees:
            disagreements.append(f"{name} (delta {result.oracle_delta:.3e})")

    write_output("\n".join(sections), options.out)
    if disagreements:
        raise ValidationFailure(f"closed form disagrees with quadrature for {', '.join(disagreements)}")
