"""Wiretap scenario, truncation targets and metric results."""
import math
from dataclasses import dataclass, field, replace
from typing import Optional

from src.channel.coefficient_store import CoefficientStore
from src.channel.ftr_model import (
    DEFAULT_N_MAX,
    DEFAULT_TARGET_EPS,
    CoefficientTable,
    FtrParams,
    build_coefficient_table,
    coefficient_table_at_order,
)
from src.utils.errors import DomainError

RATE_UNITS = ("nats", "bits")


def rate_unit_convert(rate: float, unit: str) -> float:
    """Secrecy rate in nats; bits are scaled by ln 2 so that e^R_nats = 2^R_bits."""
    if not rate >= 0:
        raise DomainError(f"secrecy rate must be nonnegative, got {rate}")
    if unit == "nats":
        return float(rate)
    if unit == "bits":
        return float(rate) * math.log(2.0)
    raise DomainError(f"unknown rate unit {unit!r} (expected one of {RATE_UNITS})")


@dataclass(frozen=True)
class WiretapScenario:
    """Main channel D, eavesdropper channel E and the target secrecy rate.

    Both parameter sets describe received SNRs (link budget already applied).
    """

    main: FtrParams
    eaves: FtrParams
    rate_nats: float = 0.0

    def __post_init__(self):
        if not (self.rate_nats >= 0 and not math.isnan(self.rate_nats)):
            raise DomainError(f"rate_nats must be nonnegative, got {self.rate_nats}")

    @property
    def theta(self) -> float:
        """e^R_s."""
        return math.exp(self.rate_nats)

    @property
    def rho(self) -> float:
        """Average-SNR ratio of main to eavesdropper channel."""
        return self.main.mean_snr / self.eaves.mean_snr

    @property
    def eta_ratio(self) -> float:
        """(K_E + 1) / (K_D + 1)."""
        return (self.eaves.k + 1.0) / (self.main.k + 1.0)

    @property
    def sigma_ratio(self) -> float:
        """sigma_D^2 / sigma_E^2, equal to rho * eta_ratio."""
        return self.main.sigma2 / self.eaves.sigma2

    def with_rate(self, rate_nats: float) -> "WiretapScenario":
        return replace(self, rate_nats=rate_nats)

    def swapped(self) -> "WiretapScenario":
        """Same scenario with the roles of D and E exchanged."""
        return replace(self, main=self.eaves, eaves=self.main)


@dataclass(frozen=True)
class TruncationTargets:
    """Per-channel truncation targets.

    With ``common_order`` both series are cut at N = max(N_D, N_E).
    """

    main_eps: float = DEFAULT_TARGET_EPS
    eaves_eps: float = DEFAULT_TARGET_EPS
    n_max: int = DEFAULT_N_MAX
    common_order: bool = False


@dataclass(frozen=True)
class ChannelTables:
    """Coefficient tables of both channels of a scenario."""

    main: CoefficientTable
    eaves: CoefficientTable

    @property
    def eps_bound(self) -> float:
        """eps_D + eps_E, a heuristic bound on the double-series truncation."""
        return max(self.main.eps, 0.0) + max(self.eaves.eps, 0.0)

    def diagnostics(self) -> tuple:
        notes = []
        for name, table in (("main", self.main), ("eaves", self.eaves)):
            if not table.converged:
                notes.append(
                    f"{name} channel truncation target {table.target_eps:g} not met "
                    f"(N={table.n_trunc}, eps={table.eps:.3e})"
                )
        return tuple(notes)


def build_channel_tables(
    scenario: WiretapScenario,
    trunc: TruncationTargets = TruncationTargets(),
    store: Optional[CoefficientStore] = None,
) -> ChannelTables:
    """Coefficient tables for both channels of ``scenario``."""
    main = build_coefficient_table(scenario.main, trunc.main_eps, trunc.n_max, store)
    eaves = build_coefficient_table(scenario.eaves, trunc.eaves_eps, trunc.n_max, store)
    if trunc.common_order and main.n_trunc != eaves.n_trunc:
        n_common = max(main.n_trunc, eaves.n_trunc)
        main = coefficient_table_at_order(scenario.main, n_common, trunc.main_eps, store)
        eaves = coefficient_table_at_order(scenario.eaves, n_common, trunc.eaves_eps, store)
    return ChannelTables(main=main, eaves=eaves)


@dataclass(frozen=True)
class MetricResult:
    """A secrecy metric with its numerical diagnostics.

    Attributes:
        value: Metric value (nats for ASC, probability otherwise)
        n_trunc_main: Truncation order of the main-channel series
        n_trunc_eaves: Truncation order of the eavesdropper series
        eps_bound: eps_D + eps_E
        oracle_delta: value minus the quadrature oracle, when requested
        oracle_value: The quadrature oracle value, when requested
        diagnostics: Non-fatal notes (unmet targets, clamping, fallbacks)
    """

    value: float
    n_trunc_main: int
    n_trunc_eaves: int
    eps_bound: float
    oracle_delta: Optional[float] = None
    oracle_value: Optional[float] = None
    diagnostics: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise DomainError(f"metric value must be finite, got {self.value}")
        if self.eps_bound < 0:
            raise DomainError(f"eps_bound must be nonnegative, got {self.eps_bound}")

    def with_oracle(self, oracle_value: float) -> "MetricResult":
        return replace(self, oracle_value=oracle_value, oracle_delta=self.value - oracle_value)

    def oracle_tolerance(self, rel_tol: float = 1e-4, abs_floor: float = 1e-8) -> float:
        """Allowed |oracle_delta|: max(rel_tol * value, abs_floor)."""
        return max(rel_tol * abs(self.value), abs_floor)

    @property
    def oracle_agrees(self) -> Optional[bool]:
        if self.oracle_delta is None:
            return None
        return abs(self.oracle_delta) <= self.oracle_tolerance()
