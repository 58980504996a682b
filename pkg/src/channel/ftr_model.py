"""Fluctuating two-ray (FTR) channel model.

The SNR law is a mixture of integer-shape Gamma laws,

    f(g) = sum_j a_j * g^j e^(-g/b) / (j! b^(j+1)),    b = 2 sigma^2,
    a_j  = m^m / Gamma(m) * K^j d_j / j!,

with d_j = Gamma(m+j) * (1/2pi) int_0^2pi (1 + D cos t)^j / (m + K(1 + D cos t))^(m+j) dt.
Conditioning the two-ray model on the common Gamma fluctuation and on the
phase difference of the rays gives this form, and it makes sum_j a_j = 1.
"""
import math
import threading
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
import structlog
from scipy import special

from src.channel.coefficient_store import CoefficientStore, default_store
from src.numerics.quadrature import gauss_legendre
from src.utils.errors import DomainError

logger = structlog.get_logger(__name__)

DEFAULT_TARGET_EPS = 1e-5
DEFAULT_N_MAX = 200

# Gauss-Legendre orders tried for d_j, doubling until the value settles.
GL_MIN_ORDER = 32
GL_MAX_ORDER = 4096
GL_REL_TOL = 1e-12

# Coefficients are computed in blocks while searching for the truncation order.
COEFFICIENT_BLOCK = 16

# Negative truncation errors this small are floating-point noise.
EPS_CLAMP_TOL = 1e-12

# Rows per block when evaluating the series on large sample arrays.
ARRAY_CHUNK = 65536

ETA_RANGE = (1.5, 8.0)

_compute_lock = threading.Lock()


@dataclass(frozen=True)
class FtrParams:
    """Fading parameters of one FTR channel.

    Attributes:
        m: Severity of the common Gamma fluctuation of the specular rays
        k: Specular-to-diffuse power ratio
        delta: Similarity of the two specular rays, in [0, 1]
        sigma2: Half the diffuse power (2 sigma^2 is the diffuse power)
    """

    m: float
    k: float
    delta: float
    sigma2: float

    def __post_init__(self):
        errors = []
        if not (self.m > 0 and math.isfinite(self.m)):
            errors.append(f"m must be positive, got {self.m}")
        if not (self.k >= 0 and math.isfinite(self.k)):
            errors.append(f"K must be nonnegative, got {self.k}")
        if not 0.0 <= self.delta <= 1.0:
            errors.append(f"delta must lie in [0, 1], got {self.delta}")
        if not (self.sigma2 > 0 and math.isfinite(self.sigma2)):
            errors.append(f"sigma2 must be positive, got {self.sigma2}")
        if errors:
            raise DomainError("; ".join(errors))

    @classmethod
    def rayleigh(cls, sigma2: float) -> "FtrParams":
        """Diffuse-only channel (K = 0)."""
        return cls(m=1.0, k=0.0, delta=0.0, sigma2=sigma2)

    @classmethod
    def rician_shadowed(cls, m: float, k: float, sigma2: float) -> "FtrParams":
        """Single fluctuating specular ray (Delta = 0)."""
        return cls(m=m, k=k, delta=0.0, sigma2=sigma2)

    @property
    def cache_key(self) -> str:
        """Full-precision key of (m, K, Delta); sigma2 does not affect d_j."""
        return ":".join(float(v).hex() for v in (self.m, self.k, self.delta))

    @property
    def diffuse_power(self) -> float:
        return 2.0 * self.sigma2

    @property
    def mean_snr(self) -> float:
        """2 sigma^2 (1 + K)."""
        return self.diffuse_power * (1.0 + self.k)

    def with_sigma2(self, sigma2: float) -> "FtrParams":
        return replace(self, sigma2=sigma2)

    def with_mean_snr(self, mean_snr: float) -> "FtrParams":
        """Same fading shape, diffuse power chosen so the mean SNR is ``mean_snr``."""
        return replace(self, sigma2=mean_snr / (2.0 * (1.0 + self.k)))

    def scaled(self, budget: "LinkBudget") -> "FtrParams":
        """Parameters of the received SNR, (E_b/N_0) r^-eta times the fading gain."""
        return replace(self, sigma2=self.sigma2 * budget.gain)


@dataclass(frozen=True)
class LinkBudget:
    """Large-scale link parameters inside the LOS ball.

    Attributes:
        eb_n0: Linear E_b/N_0
        r: Propagation distance (same units as r_los)
        eta: Path-loss exponent
        r_los: LOS ball radius
    """

    eb_n0: float = 1.0
    r: float = 1.0
    eta: float = 2.0
    r_los: float = 1.0

    def __post_init__(self):
        for name in ("eb_n0", "r", "eta", "r_los"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise DomainError(f"{name} must be positive, got {value}")

    @classmethod
    def from_db(cls, eb_n0_db: float, r: float = 1.0, eta: float = 2.0, r_los: float = 1.0) -> "LinkBudget":
        return cls(eb_n0=10.0 ** (eb_n0_db / 10.0), r=r, eta=eta, r_los=r_los)

    @property
    def inside_los_ball(self) -> bool:
        return self.r <= self.r_los

    @property
    def eta_in_range(self) -> bool:
        return ETA_RANGE[0] <= self.eta <= ETA_RANGE[1]

    @property
    def gain(self) -> float:
        """(E_b/N_0) r^-eta."""
        return self.eb_n0 * self.r ** (-self.eta)

    def check(self) -> None:
        """Raise if outside the LOS ball; warn on an unusual path-loss exponent."""
        if not self.inside_los_ball:
            raise DomainError(f"distance r={self.r} lies outside the LOS ball (r_los={self.r_los})")
        if not self.eta_in_range:
            logger.warning(f"Path-loss exponent {self.eta} outside the usual range {ETA_RANGE}")


def average_snr(params: FtrParams, budget: LinkBudget) -> float:
    """Average SNR (E_b/N_0) 2 sigma^2 (1 + K) r^-eta."""
    budget.check()
    return budget.gain * params.mean_snr


def sigma2_for_average_snr(avg_snr: float, k: float, budget: LinkBudget) -> float:
    """Invert ``average_snr`` for sigma^2 given K and the link budget."""
    if not avg_snr > 0:
        raise DomainError(f"average SNR must be positive, got {avg_snr}")
    budget.check()
    return avg_snr * budget.r ** budget.eta / (2.0 * budget.eb_n0 * (1.0 + k))


def _log_d_block(params: FtrParams, j_values: np.ndarray) -> np.ndarray:
    """ln d_j for the given j by Gauss-Legendre node doubling on [0, pi]."""
    j = j_values[:, None].astype(float)
    result = np.full(len(j_values), np.nan)
    pending = np.ones(len(j_values), dtype=bool)
    previous = np.full(len(j_values), np.nan)

    order = GL_MIN_ORDER
    while True:
        nodes, weights = gauss_legendre(order)
        theta = 0.5 * math.pi * (nodes + 1.0)
        base = 1.0 + params.delta * np.cos(theta)
        log_integrand = special.xlogy(j, base) - (params.m + j) * np.log(params.m + params.k * base)
        # (1/pi) int_0^pi = (1/2) sum w_i g(theta_i)
        log_mean = special.logsumexp(log_integrand, b=0.5 * weights, axis=1)
        current = special.gammaln(params.m + j[:, 0]) + log_mean

        # change in ln d_j is the relative change in d_j
        settled = pending & (np.abs(current - previous) <= GL_REL_TOL)
        result[settled] = current[settled]
        pending &= ~settled
        if not pending.any():
            return result
        if order >= GL_MAX_ORDER:
            logger.warning(
                f"d_j quadrature not settled at {order} nodes for j={j_values[pending].tolist()} ({params})"
            )
            result[pending] = current[pending]
            return result
        previous = current
        order *= 2


def log_d_coefficients(params: FtrParams, count: int, store: Optional[CoefficientStore] = None) -> np.ndarray:
    """ln d_j for j = 0..count-1, memoized per (m, K, Delta)."""
    store = store if store is not None else default_store()
    key = params.cache_key
    cached = store.get(key)
    if len(cached) >= count:
        logger.debug(f"Coefficient cache hit for {key} ({count} terms)")
        return np.array(cached[:count])

    with _compute_lock:
        cached = store.get(key)
        if len(cached) < count:
            logger.debug(f"Computing d_j for j={len(cached)}..{count - 1} ({key})")
            fresh = _log_d_block(params, np.arange(len(cached), count))
            cached = list(cached) + [float(v) for v in fresh]
            store.put(key, cached)
    return np.array(cached[:count])


def d_coefficient(params: FtrParams, j: int, store: Optional[CoefficientStore] = None) -> float:
    """Series coefficient d_j of the FTR SNR distribution."""
    if j < 0 or int(j) != j:
        raise DomainError(f"j must be a nonnegative integer, got {j}")
    return float(np.exp(log_d_coefficients(params, int(j) + 1, store)[int(j)]))


def log_mixture_weights(params: FtrParams, log_d: np.ndarray) -> np.ndarray:
    """ln a_j = m ln m - ln Gamma(m) + j ln K + ln d_j - ln j!  (0^0 = 1)."""
    j = np.arange(len(log_d))
    return (
        special.xlogy(params.m, params.m)
        - special.gammaln(params.m)
        + special.xlogy(j, params.k)
        + log_d
        - special.gammaln(j + 1)
    )


@dataclass(frozen=True)
class CoefficientTable:
    """Truncated FTR series for one channel.

    Attributes:
        params: Fading parameters
        d: d_0..d_N
        n_trunc: Truncation order N
        eps: Truncation error 1 - sum_{j<=N} a_j
        log_d: ln d_0..ln d_N
        target_eps: Target the order was chosen for
        converged: Whether eps <= target_eps was reached
    """

    params: FtrParams
    d: tuple
    n_trunc: int
    eps: float
    log_d: tuple
    target_eps: float = DEFAULT_TARGET_EPS
    converged: bool = True

    @property
    def log_weights(self) -> np.ndarray:
        """ln a_j for j = 0..N."""
        return log_mixture_weights(self.params, np.asarray(self.log_d))

    @property
    def weights(self) -> np.ndarray:
        """Mixture weights a_j for j = 0..N."""
        return np.exp(self.log_weights)

    @property
    def scale(self) -> float:
        """2 sigma^2, the scale of every Gamma component."""
        return self.params.diffuse_power

    def with_params(self, params: FtrParams) -> "CoefficientTable":
        """Same coefficients for a channel differing only in sigma2."""
        if params.cache_key != self.params.cache_key:
            raise DomainError("coefficient tables can only be re-used across sigma2")
        return replace(self, params=params)

    def perturbed(self, j: int, factor: float) -> "CoefficientTable":
        """Copy with d_j multiplied by ``factor`` (for sensitivity checks)."""
        if not 0 <= j <= self.n_trunc:
            raise IndexError(f"j={j} outside table of order {self.n_trunc}")
        log_d = list(self.log_d)
        log_d[j] += math.log(factor)
        return _table_from_log_d(self.params, np.array(log_d), self.target_eps)


def _truncation_errors(params: FtrParams, log_d: np.ndarray) -> np.ndarray:
    """eps(n) for n = 0..len(log_d)-1."""
    weights = np.exp(log_mixture_weights(params, log_d))
    partial = np.array([math.fsum(weights[: n + 1]) for n in range(len(weights))])
    eps = 1.0 - partial
    return np.where((eps < 0) & (eps > -EPS_CLAMP_TOL), 0.0, eps)


def _table_from_log_d(params: FtrParams, log_d: np.ndarray, target_eps: float) -> CoefficientTable:
    eps = float(_truncation_errors(params, log_d)[-1])
    return CoefficientTable(
        params=params,
        d=tuple(float(v) for v in np.exp(log_d)),
        n_trunc=len(log_d) - 1,
        eps=eps,
        log_d=tuple(float(v) for v in log_d),
        target_eps=target_eps,
        converged=eps <= target_eps,
    )


def build_coefficient_table(
    params: FtrParams,
    target_eps: float = DEFAULT_TARGET_EPS,
    n_max: int = DEFAULT_N_MAX,
    store: Optional[CoefficientStore] = None,
) -> CoefficientTable:
    """Smallest truncation order N with eps(N) <= target_eps.

    Args:
        params: Fading parameters
        target_eps: Truncation error target, in (0, 1]
        n_max: Largest order tried
        store: Coefficient cache (process default when omitted)

    Returns:
        CoefficientTable; ``converged`` is False when n_max was not enough
    """
    if not 0 < target_eps <= 1:
        raise DomainError(f"target_eps must lie in (0, 1], got {target_eps}")
    if n_max < 1:
        raise DomainError(f"n_max must be at least 1, got {n_max}")

    count = 0
    while True:
        count = min(count + COEFFICIENT_BLOCK, n_max + 1)
        log_d = log_d_coefficients(params, count, store)
        eps = _truncation_errors(params, log_d)
        hits = np.flatnonzero(eps <= target_eps)
        if hits.size:
            n_trunc = int(hits[0])
            return _table_from_log_d(params, log_d[: n_trunc + 1], target_eps)
        if count == n_max + 1:
            logger.warning(
                f"Truncation target {target_eps:g} not reached by N={n_max} "
                f"(eps={eps[-1]:.3e}) for m={params.m}, K={params.k}, delta={params.delta}"
            )
            return _table_from_log_d(params, log_d, target_eps)


def coefficient_table_at_order(
    params: FtrParams,
    n_trunc: int,
    target_eps: float = DEFAULT_TARGET_EPS,
    store: Optional[CoefficientStore] = None,
) -> CoefficientTable:
    """Table truncated at a fixed order N."""
    if n_trunc < 0:
        raise DomainError(f"truncation order must be nonnegative, got {n_trunc}")
    log_d = log_d_coefficients(params, n_trunc + 1, store)
    return _table_from_log_d(params, log_d, target_eps)


def truncation_error(table: CoefficientTable, n: int) -> float:
    """eps(n) = 1 - m^m / Gamma(m) * sum_{j<=n} K^j d_j / j!."""
    if n < 0 or n > table.n_trunc:
        raise IndexError(f"n={n} outside table of order {table.n_trunc}")
    return float(_truncation_errors(table.params, np.asarray(table.log_d[: n + 1]))[-1])


def _log_terms(table: CoefficientTable, gamma: np.ndarray) -> np.ndarray:
    """ln of every pdf term, shape (len(gamma), N+1)."""
    b = table.scale
    j = np.arange(table.n_trunc + 1)
    g = gamma[:, None]
    return (
        table.log_weights
        - special.gammaln(j + 1)
        + special.xlogy(j, g)
        - (j + 1) * math.log(b)
        - g / b
    )


def snr_pdf(table: CoefficientTable, gamma: float) -> float:
    """Truncated FTR SNR density at ``gamma``."""
    if not gamma >= 0:
        raise DomainError(f"gamma must be nonnegative, got {gamma}")
    terms = np.exp(_log_terms(table, np.array([float(gamma)]))[0])
    return math.fsum(terms)


def snr_pdf_array(table: CoefficientTable, gamma) -> np.ndarray:
    """Vectorized ``snr_pdf``; numpy's pairwise summation over the terms."""
    gamma = np.atleast_1d(np.asarray(gamma, dtype=float))
    if np.any(gamma < 0):
        raise DomainError("gamma must be nonnegative")
    out = np.empty_like(gamma)
    for start in range(0, len(gamma), ARRAY_CHUNK):
        chunk = slice(start, start + ARRAY_CHUNK)
        out[chunk] = np.exp(_log_terms(table, gamma[chunk])).sum(axis=1)
    return out


def snr_cdf(table: CoefficientTable, gamma: float) -> float:
    """Truncated FTR SNR distribution function at ``gamma``, clamped to [0, 1]."""
    if not gamma >= 0:
        raise DomainError(f"gamma must be nonnegative, got {gamma}")
    j = np.arange(table.n_trunc + 1)
    terms = table.weights * special.gammainc(j + 1, gamma / table.scale)
    return min(max(math.fsum(terms), 0.0), 1.0)


def snr_cdf_array(table: CoefficientTable, gamma) -> np.ndarray:
    """Vectorized ``snr_cdf``."""
    gamma = np.atleast_1d(np.asarray(gamma, dtype=float))
    if np.any(gamma < 0):
        raise DomainError("gamma must be nonnegative")
    j = np.arange(table.n_trunc + 1)
    weights = table.weights
    out = np.empty_like(gamma)
    for start in range(0, len(gamma), ARRAY_CHUNK):
        chunk = slice(start, start + ARRAY_CHUNK)
        out[chunk] = special.gammainc(j + 1, gamma[chunk, None] / table.scale) @ weights
    return np.clip(out, 0.0, 1.0)


def mean_snr(table: CoefficientTable) -> float:
    """Mean of the truncated law, sum_j a_j (j + 1) 2 sigma^2."""
    j = np.arange(table.n_trunc + 1)
    return math.fsum(table.weights * (j + 1)) * table.scale
