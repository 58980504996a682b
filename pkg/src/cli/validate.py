"""Validation gate: closed forms against quadrature and Monte Carlo.

The report is one line per check, ``name | observed | threshold | PASS/FAIL``,
followed by a summary line. It holds no timings, so a fixed seed gives a
byte-identical report.
"""
import math
from dataclasses import dataclass
from typing import Optional

import structlog

from src.channel.ftr_model import mean_snr
from src.cli.commands import RunOptions, strict_tables
from src.cli.report import write_output
from src.secrecy.metrics import METRICS, evaluate_metric, sop, sop_lower
from src.secrecy.oracles import pdf_normalization
from src.secrecy.scenario import ChannelTables
from src.simulation.mc_oracle import (
    EAVES_CHANNEL,
    MAIN_CHANNEL,
    MIN_ACCEPTANCE_SAMPLES,
    RunningStats,
    collect_samples,
    estimate_metrics,
    ks_check,
)
from src.utils.config import Config
from src.utils.errors import ConfigError, ValidationFailure
from src.utils.scenario_config import ScenarioConfig

logger = structlog.get_logger(__name__)

MC_SIGMAS = 3.0
MASS_SLACK = 1e-9
NORMALIZATION_SLACK = 1e-8
SPSC_IDENTITY_TOL = 1e-12
SOP_IDENTITY_TOL = 1e-10


@dataclass(frozen=True)
class CheckResult:
    name: str
    observed: float
    threshold: str
    passed: bool

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"{self.name} | {self.observed:.6e} | {self.threshold} | {verdict}"


def _upper(name: str, observed: float, limit: float) -> CheckResult:
    return CheckResult(name, observed, f"<= {limit:.6e}", observed <= limit)


def series_mass_checks(tables: ChannelTables) -> list[CheckResult]:
    """sum_j a_j within [1 - target, 1]."""
    checks = []
    for label, table in (("main", tables.main), ("eaves", tables.eaves)):
        mass = math.fsum(table.weights)
        low, high = 1.0 - table.target_eps - MASS_SLACK, 1.0 + MASS_SLACK
        checks.append(
            CheckResult(f"series_mass[{label}]", mass, f"[{low:.6e}, {high:.6e}]", low <= mass <= high)
        )
    return checks


def normalization_checks(tables: ChannelTables, rel_tol: float) -> list[CheckResult]:
    """|1 - int f| by quadrature of the truncated density."""
    checks = []
    for label, table in (("main", tables.main), ("eaves", tables.eaves)):
        integral = pdf_normalization(table, rel_tol)
        checks.append(
            _upper(f"pdf_normalization[{label}]", abs(1.0 - integral.value), table.target_eps + NORMALIZATION_SLACK)
        )
    return checks


def distribution_checks(scenario, tables: ChannelTables, cfg) -> list[CheckResult]:
    """Monte Carlo mean against 2 sigma^2 (1 + K), and KS distance per channel."""
    checks = []
    channels = (
        ("main", scenario.main, tables.main, MAIN_CHANNEL),
        ("eaves", scenario.eaves, tables.eaves, EAVES_CHANNEL),
    )
    for label, params, table, channel in channels:
        samples = collect_samples(params, cfg=cfg, channel=channel)
        estimate = RunningStats.from_array(samples).estimate()
        checks.append(
            _upper(f"mc_mean[{label}]", abs(estimate.mean - params.mean_snr), MC_SIGMAS * estimate.std_error)
        )
        ks = ks_check(samples, table)
        checks.append(_upper(f"ks[{label}]", ks.statistic, ks.critical))
        logger.info(f"KS {label}: D={ks.statistic:.3e}, critical={ks.critical:.3e}, series mean={mean_snr(table):.6g}")
    return checks


def metric_checks(scenario, tables: ChannelTables, cfg, rel_tol: float, workers: int) -> list[CheckResult]:
    """Every metric against its quadrature oracle and against Monte Carlo."""
    metrics = tuple(METRICS)
    estimates = estimate_metrics(scenario, metrics, cfg=cfg, workers=workers)
    checks = []
    for name in metrics:
        result = evaluate_metric(name, scenario, tables=tables, oracle=True, rel_tol=rel_tol)
        checks.append(_upper(f"oracle[{name}]", abs(result.oracle_delta), result.oracle_tolerance()))
    for name in metrics:
        result = evaluate_metric(name, scenario, tables=tables)
        estimate = estimates[name]
        limit = MC_SIGMAS * estimate.std_error + result.eps_bound
        checks.append(_upper(f"mc[{name}]", abs(result.value - estimate.mean), limit))
    return checks


def identity_checks(scenario, tables: ChannelTables) -> list[CheckResult]:
    """spsc + sop_lower(0) = 1 and sop(0) = sop_lower(0)."""
    at_zero = scenario.with_rate(0.0)
    lower = sop_lower(at_zero, tables=tables).value
    spsc_value = evaluate_metric("spsc", at_zero, tables=tables).value
    sop_value = sop(at_zero, tables=tables).value
    return [
        _upper("identity[spsc+sopl]", abs(spsc_value + lower - 1.0), SPSC_IDENTITY_TOL),
        _upper("identity[sop=sopl]", abs(sop_value - lower), SOP_IDENTITY_TOL),
    ]


def run_checks(
    scenario_config: ScenarioConfig,
    config: Config,
    options: RunOptions,
    perturb_d1: Optional[float] = None,
) -> list[CheckResult]:
    """All checks of the gate, in report order."""
    cfg = scenario_config.sample_config(config.mc_batch, options.samples, options.seed)
    if not cfg.acceptance_ready:
        raise ConfigError(
            f"mc.samples must be at least {MIN_ACCEPTANCE_SAMPLES} for validation, got {cfg.n_samples}"
        )

    scenario = scenario_config.scenario()
    tables = strict_tables(scenario, scenario_config.truncation_targets())
    if perturb_d1 is not None:
        if not perturb_d1 > 0:
            raise ConfigError(f"--perturb-d1 must be positive, got {perturb_d1}")
        logger.warning(f"Scaling d_1 of the main channel by {perturb_d1}")
        tables = ChannelTables(main=tables.main.perturbed(1, perturb_d1), eaves=tables.eaves)

    rel_tol = scenario_config.quad_rel_tol
    checks = []
    checks += series_mass_checks(tables)
    checks += normalization_checks(tables, rel_tol)
    checks += distribution_checks(scenario, tables, cfg)
    checks += metric_checks(scenario, tables, cfg, rel_tol, config.workers)
    checks += identity_checks(scenario, tables)

    for check in checks:
        logger.info(f"{check.name}: {'PASS' if check.passed else 'FAIL'}")
    return checks


def format_report(checks: list[CheckResult]) -> str:
    failed = [check.name for check in checks if not check.passed]
    lines = [check.line() for check in checks]
    verdict = "FAIL" if failed else "PASS"
    lines.append(f"summary | {len(checks)} checks | {len(failed)} failed | {verdict}")
    return "\n".join(lines) + "\n"


def cmd_validate(
    scenario_config: ScenarioConfig,
    config: Config,
    options: RunOptions,
    perturb_d1: Optional[float] = None,
) -> None:
    """Write the validation report; raise ValidationFailure when any check fails."""
    checks = run_checks(scenario_config, config, options, perturb_d1)
    write_output(format_report(checks), options.out)
    failed = [check.name for check in checks if not check.passed]
    if failed:
        raise ValidationFailure(f"validation failed: {', '.join(failed)}")
