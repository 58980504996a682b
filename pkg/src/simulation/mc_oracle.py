"""Monte Carlo simulator of the FTR wiretap channel.

Each draw follows the two-ray construction: a unit-mean Gamma(m) power
fluctuation common to both specular rays, independent uniform phases, and a
circularly symmetric complex Gaussian diffuse part,

    g = (E_b/N_0) r^-eta |sqrt(z) (V1 e^(i p1) + V2 e^(i p2)) + Z|^2,

with V1^2 + V2^2 = 2 sigma^2 K and 2 V1 V2 / (V1^2 + V2^2) = Delta.

Streams are derived from (seed, channel, batch) with numpy SeedSequence spawn
keys, so batches may run in any order or in parallel and still give the same
result.
"""
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np
import structlog
from scipy import stats

from src.channel.ftr_model import CoefficientTable, FtrParams, LinkBudget, snr_cdf_array
from src.secrecy.scenario import WiretapScenario
from src.utils.errors import DomainError

logger = structlog.get_logger(__name__)

DEFAULT_SAMPLES = 1_000_000
DEFAULT_SEED = 20180101
DEFAULT_BATCH = 100_000

# Smallest sample count whose estimates may feed an acceptance check.
MIN_ACCEPTANCE_SAMPLES = 10_000

MAIN_CHANNEL = 0
EAVES_CHANNEL = 1

KS_ALPHA = 0.01


@dataclass(frozen=True)
class SampleConfig:
    """Monte Carlo sample count, seed and batch size."""

    n_samples: int = DEFAULT_SAMPLES
    seed: int = DEFAULT_SEED
    batch: int = DEFAULT_BATCH

    def __post_init__(self):
        if self.n_samples < 1:
            raise DomainError(f"n_samples must be positive, got {self.n_samples}")
        if self.batch < 1:
            raise DomainError(f"batch must be positive, got {self.batch}")
        if not 0 <= self.seed < 2**64:
            raise DomainError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    @property
    def acceptance_ready(self) -> bool:
        return self.n_samples >= MIN_ACCEPTANCE_SAMPLES

    def batch_sizes(self) -> list[int]:
        full, rest = divmod(self.n_samples, self.batch)
        return [self.batch] * full + ([rest] if rest else [])


@dataclass(frozen=True)
class EstimateWithError:
    """Sample mean with its standard error."""

    mean: float
    std_error: float
    n: int

    def within(self, value: float, n_sigma: float = 3.0, slack: float = 0.0) -> bool:
        """Whether ``value`` lies within n_sigma standard errors (plus slack)."""
        return abs(self.mean - value) <= n_sigma * self.std_error + slack

    @classmethod
    def from_proportion(cls, successes: int, n: int) -> "EstimateWithError":
        """Binomial proportion with standard error sqrt(p (1 - p) / n)."""
        p = successes / n
        return cls(mean=p, std_error=math.sqrt(p * (1.0 - p) / n), n=n)


@dataclass(frozen=True)
class RunningStats:
    """(count, mean, M2) triple; ``merge`` is associative."""

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0

    @classmethod
    def from_array(cls, values: np.ndarray) -> "RunningStats":
        if len(values) == 0:
            return cls()
        mean = float(np.mean(values))
        return cls(count=len(values), mean=mean, m2=float(np.sum((values - mean) ** 2)))

    def merge(self, other: "RunningStats") -> "RunningStats":
        if other.count == 0:
            return self
        if self.count == 0:
            return other
        count = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * other.count / count
        m2 = self.m2 + other.m2 + delta * delta * self.count * other.count / count
        return RunningStats(count=count, mean=mean, m2=m2)

    def estimate(self) -> EstimateWithError:
        if self.count < 2:
            return EstimateWithError(mean=self.mean, std_error=math.inf, n=self.count)
        variance = self.m2 / (self.count - 1)
        return EstimateWithError(mean=self.mean, std_error=math.sqrt(variance / self.count), n=self.count)


def specular_amplitudes(params: FtrParams) -> tuple[float, float]:
    """(V1, V2) with V1^2 + V2^2 = 2 sigma^2 K and 2 V1 V2 / (V1^2 + V2^2) = Delta."""
    root = math.sqrt(1.0 - params.delta**2)
    v1_sq = params.sigma2 * params.k * (1.0 + root)
    v2_sq = params.sigma2 * params.k * (1.0 - root)
    return math.sqrt(v1_sq), math.sqrt(max(v2_sq, 0.0))


def channel_rng(seed: int, channel: int, batch_index: int) -> np.random.Generator:
    """Generator for one (channel, batch) sub-stream."""
    sequence = np.random.SeedSequence(seed, spawn_key=(channel, batch_index))
    return np.random.Generator(np.random.PCG64(sequence))


def draw_snr(params: FtrParams, budget: LinkBudget, rng: np.random.Generator, size: int) -> np.ndarray:
    """``size`` SNR draws of one FTR channel."""
    v1, v2 = specular_amplitudes(params)
    zeta = rng.gamma(shape=params.m, scale=1.0 / params.m, size=size)
    phi1 = rng.uniform(0.0, 2.0 * math.pi, size=size)
    phi2 = rng.uniform(0.0, 2.0 * math.pi, size=size)
    sigma = math.sqrt(params.sigma2)
    diffuse = sigma * (rng.standard_normal(size) + 1j * rng.standard_normal(size))
    signal = np.sqrt(zeta) * (v1 * np.exp(1j * phi1) + v2 * np.exp(1j * phi2)) + diffuse
    return budget.gain * np.abs(signal) ** 2


def sample_snr(
    params: FtrParams,
    budget: LinkBudget = LinkBudget(),
    cfg: SampleConfig = SampleConfig(),
    channel: int = MAIN_CHANNEL,
) -> Iterator[np.ndarray]:
    """Stream of SNR sample batches for one channel, reproducible per seed."""
    budget.check()
    for index, size in enumerate(cfg.batch_sizes()):
        yield draw_snr(params, budget, channel_rng(cfg.seed, channel, index), size)


def collect_samples(
    params: FtrParams,
    budget: LinkBudget = LinkBudget(),
    cfg: SampleConfig = SampleConfig(),
    channel: int = MAIN_CHANNEL,
) -> np.ndarray:
    """All samples of ``sample_snr`` in one array."""
    return np.concatenate(list(sample_snr(params, budget, cfg, channel)))


def estimate_mean_snr(
    params: FtrParams, budget: LinkBudget = LinkBudget(), cfg: SampleConfig = SampleConfig()
) -> EstimateWithError:
    """Sample mean of the SNR with its standard error."""
    stats_total = RunningStats()
    for batch in sample_snr(params, budget, cfg):
        stats_total = stats_total.merge(RunningStats.from_array(batch))
    return stats_total.estimate()


def estimate_second_moment(
    params: FtrParams, budget: LinkBudget = LinkBudget(), cfg: SampleConfig = SampleConfig()
) -> EstimateWithError:
    """Sample mean of the squared SNR."""
    stats_total = RunningStats()
    for batch in sample_snr(params, budget, cfg):
        stats_total = stats_total.merge(RunningStats.from_array(batch**2))
    return stats_total.estimate()


def _pair_statistic(kind: str, g_d: np.ndarray, g_e: np.ndarray, theta: float) -> np.ndarray:
    if kind == "asc":
        return np.maximum(np.log1p(g_d) - np.log1p(g_e), 0.0)
    if kind == "sop":
        return (g_d < theta * g_e + theta - 1.0).astype(float)
    if kind == "sopl":
        return (g_d < theta * g_e).astype(float)
    if kind == "spsc":
        return (g_d > g_e).astype(float)
    raise KeyError(f"unknown Monte Carlo statistic {kind!r}")


def _pair_batch(
    kinds: tuple,
    scenario: WiretapScenario,
    budgets: tuple,
    seed: int,
    index: int,
    size: int,
) -> tuple:
    g_d = draw_snr(scenario.main, budgets[0], channel_rng(seed, MAIN_CHANNEL, index), size)
    g_e = draw_snr(scenario.eaves, budgets[1], channel_rng(seed, EAVES_CHANNEL, index), size)
    return tuple(
        RunningStats.from_array(_pair_statistic(kind, g_d, g_e, scenario.theta)) for kind in kinds
    )


def _estimate_pairs(
    kinds: tuple,
    scenario: WiretapScenario,
    budgets: Optional[tuple],
    cfg: SampleConfig,
    workers: int,
) -> dict[str, EstimateWithError]:
    budgets = budgets or (LinkBudget(), LinkBudget())
    for budget in budgets:
        budget.check()
    args = [(kinds, scenario, budgets, cfg.seed, index, size) for index, size in enumerate(cfg.batch_sizes())]

    if workers > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_pair_batch, *zip(*args)))
    else:
        parts = [_pair_batch(*a) for a in args]

    # Merged in batch order whatever the completion order.
    totals = [RunningStats()] * len(kinds)
    for part in parts:
        totals = [total.merge(stats_part) for total, stats_part in zip(totals, part)]
    logger.debug(f"Monte Carlo {','.join(kinds)}: {totals[0].count} samples in {len(parts)} batches")

    estimates = {}
    for kind, total in zip(kinds, totals):
        if kind == "asc":
            estimates[kind] = total.estimate()
        else:
            estimates[kind] = EstimateWithError.from_proportion(round(total.mean * total.count), total.count)
    return estimates


def estimate_asc(
    scenario: WiretapScenario,
    budgets: Optional[tuple] = None,
    cfg: SampleConfig = SampleConfig(),
    workers: int = 1,
) -> EstimateWithError:
    """Mean of max{ln(1 + g_D) - ln(1 + g_E), 0} in nats."""
    return _estimate_pairs(("asc",), scenario, budgets, cfg, workers)["asc"]


def estimate_sop(
    scenario: WiretapScenario,
    budgets: Optional[tuple] = None,
    cfg: SampleConfig = SampleConfig(),
    workers: int = 1,
) -> EstimateWithError:
    """Fraction of draws with g_D < Theta g_E + Theta - 1."""
    return _estimate_pairs(("sop",), scenario, budgets, cfg, workers)["sop"]


def estimate_sop_lower(
    scenario: WiretapScenario,
    budgets: Optional[tuple] = None,
    cfg: SampleConfig = SampleConfig(),
    workers: int = 1,
) -> EstimateWithError:
    """Fraction of draws with g_D < Theta g_E."""
    return _estimate_pairs(("sopl",), scenario, budgets, cfg, workers)["sopl"]


def estimate_spsc(
    scenario: WiretapScenario,
    budgets: Optional[tuple] = None,
    cfg: SampleConfig = SampleConfig(),
    workers: int = 1,
) -> EstimateWithError:
    """Fraction of draws with g_D > g_E."""
    return _estimate_pairs(("spsc",), scenario, budgets, cfg, workers)["spsc"]


MC_METRICS = ("asc", "sop", "sopl", "spsc")


def estimate_metrics(
    scenario: WiretapScenario,
    metrics: tuple = MC_METRICS,
    budgets: Optional[tuple] = None,
    cfg: SampleConfig = SampleConfig(),
    workers: int = 1,
) -> dict[str, EstimateWithError]:
    """Several metrics from one set of draws (same values as the single estimators)."""
    unknown = [name for name in metrics if name not in MC_METRICS]
    if unknown:
        raise KeyError(f"unknown Monte Carlo statistic(s) {unknown}")
    return _estimate_pairs(tuple(metrics), scenario, budgets, cfg, workers)


def estimate_density(samples: np.ndarray, gamma: float, half_width: float) -> EstimateWithError:
    """Histogram density of ``samples`` in [gamma - h, gamma + h]."""
    n = len(samples)
    inside = int(np.count_nonzero(np.abs(samples - gamma) <= half_width))
    fraction = EstimateWithError.from_proportion(inside, n)
    width = 2.0 * half_width
    return EstimateWithError(mean=fraction.mean / width, std_error=fraction.std_error / width, n=n)


@dataclass(frozen=True)
class KsResult:
    """One-sample Kolmogorov-Smirnov check."""

    statistic: float
    critical: float
    n: int

    @property
    def passed(self) -> bool:
        return self.statistic <= self.critical


def ks_critical_value(n: int, alpha: float = KS_ALPHA) -> float:
    """Critical KS distance at level ``alpha`` for ``n`` samples."""
    return float(stats.kstwo.ppf(1.0 - alpha, n))


def ks_check(samples: np.ndarray, table: CoefficientTable, alpha: float = KS_ALPHA) -> KsResult:
    """KS distance between ``samples`` and the truncated series CDF of ``table``."""
    result = stats.kstest(samples, lambda x: snr_cdf_array(table, x))
    return KsResult(statistic=float(result.statistic), critical=ks_critical_value(len(samples), alpha), n=len(samples))
