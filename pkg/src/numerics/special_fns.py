"""Scalar special functions used by the FTR series and the secrecy closed forms.

Gamma-family values come from ``scipy.special``. The pieces that scipy does
not expose directly are built here: Gamma(-n, x) for nonnegative n through the
generalized exponential integral, a scaled e^x E_n(x) that stays finite for
large x, and the logarithmic moment S(w, mu) = int_0^inf ln(1+t) t^(w-1) e^(-mu t) dt.
"""
import math
import sys
from dataclasses import dataclass

import numpy as np
import structlog
from scipy import special

from src.numerics.quadrature import integrate_semi_infinite
from src.utils.errors import DomainError, NumericsError

logger = structlog.get_logger(__name__)

FPMIN = sys.float_info.min / sys.float_info.epsilon
MAX_LOG = math.log(sys.float_info.max)

# Above this argument e^x overflows long before E_n(x) underflows; use the
# continued fraction, which yields e^x E_n(x) directly.
SCALED_EN_SWITCH = 500.0

# Sum smaller than this fraction of its largest summand means cancellation.
CANCELLATION_RATIO = 1e-9


@dataclass(frozen=True)
class SpecialFnAccuracy:
    """Tolerances for iterative special-function evaluation."""

    target_rel_err: float = 1e-12
    max_iterations: int = 500

    def __post_init__(self):
        if not 0.0 < self.target_rel_err < 1e-3:
            raise DomainError(f"target_rel_err must lie in (0, 1e-3), got {self.target_rel_err}")
        if self.max_iterations < 10:
            raise DomainError(f"max_iterations must be at least 10, got {self.max_iterations}")


DEFAULT_ACCURACY = SpecialFnAccuracy()


def ln_gamma(x: float) -> float:
    """ln Gamma(x) for real x > 0."""
    if not x > 0:
        raise DomainError(f"ln_gamma requires x > 0, got {x}")
    return float(special.gammaln(x))


def lower_incomplete_gamma(a: float, x: float) -> float:
    """Lower incomplete gamma function gamma(a, x).

    The regularized value from scipy is combined with ln Gamma(a) in log space,
    so the result stays finite wherever it is representable. When the
    regularized value is at or below the normal floating-point range, the
    power series takes over.
    """
    if not a > 0:
        raise DomainError(f"lower_incomplete_gamma requires a > 0, got {a}")
    if not x >= 0:
        raise DomainError(f"lower_incomplete_gamma requires x >= 0, got {x}")
    if x == 0:
        return 0.0
    regularized = float(special.gammainc(a, x))
    if regularized < FPMIN:
        return _lower_incomplete_gamma_series(a, x)
    return _exp(math.log(regularized) + float(special.gammaln(a)))


def lower_incomplete_gamma_finite(a: int, x: float) -> float:
    """gamma(a, x) for integer a >= 1 through its finite expansion.

    gamma(a, x) = (a-1)! * (1 - e^-x * sum_{n<a} x^n / n!)

    For x < a the bracket cancels, so the complement
    (a-1)! e^-x sum_{n>=a} x^n / n! is summed instead.
    """
    if a < 1 or int(a) != a:
        raise DomainError(f"finite expansion requires integer a >= 1, got {a}")
    if not x >= 0:
        raise DomainError(f"lower_incomplete_gamma_finite requires x >= 0, got {x}")
    if x == 0:
        return 0.0
    a = int(a)
    if x < a:
        return _lower_incomplete_gamma_series(a, x)
    n = np.arange(a)
    tail = math.fsum(np.exp(special.xlogy(n, x) - x - special.gammaln(n + 1)))
    return _exp(float(special.gammaln(a)) + math.log1p(-tail))


def _lower_incomplete_gamma_series(a: float, x: float) -> float:
    """gamma(a, x) = Gamma(a) e^-x sum_{n>=0} x^(a+n) / Gamma(a+n+1); no cancellation for x < a."""
    n = np.arange(int(10.0 * math.sqrt(x) + x + 60.0))
    log_terms = special.xlogy(a + n, x) - x - special.gammaln(a + n + 1)
    peak = float(log_terms.max())
    total = math.fsum(np.exp(log_terms - peak))
    return _exp(float(special.gammaln(a)) + peak + math.log(total))


def _exp(log_value: float) -> float:
    if log_value > MAX_LOG:
        return math.inf
    return math.exp(log_value)


def exp_integral_en(n: int, x: float) -> float:
    """Generalized exponential integral E_n(x) = int_1^inf e^(-x t) t^(-n) dt."""
    if n < 1 or int(n) != n:
        raise DomainError(f"exp_integral_en requires integer n >= 1, got {n}")
    if not x > 0:
        raise DomainError(f"exp_integral_en requires x > 0, got {x}")
    return float(special.expn(int(n), x))


def exp_integral_en_scaled(n: int, x: float, accuracy: SpecialFnAccuracy = DEFAULT_ACCURACY) -> float:
    """e^x * E_n(x), finite for arbitrarily large x.

    For x > 1 this is the modified Lentz evaluation of the continued fraction
    for E_n, whose value before the e^-x factor is exactly the scaled function.
    """
    if n < 1 or int(n) != n:
        raise DomainError(f"exp_integral_en_scaled requires integer n >= 1, got {n}")
    if not x > 0:
        raise DomainError(f"exp_integral_en_scaled requires x > 0, got {x}")
    if x <= 1.0:
        return float(math.exp(x) * special.expn(int(n), x))

    b = x + n
    c = 1.0 / FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, accuracy.max_iterations + 1):
        an = -i * (n - 1 + i)
        b += 2.0
        d = an * d + b
        if abs(d) < FPMIN:
            d = FPMIN
        c = b + an / c
        if abs(c) < FPMIN:
            c = FPMIN
        d = 1.0 / d
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < accuracy.target_rel_err:
            return h

    raise NumericsError(f"continued fraction for E_{n}({x}) did not converge")


def upper_incomplete_gamma_nonpos(order: int, x: float) -> float:
    """Gamma(order, x) for integer order <= 0, via Gamma(-n, x) = x^-n E_{n+1}(x)."""
    if order > 0 or int(order) != order:
        raise DomainError(f"upper_incomplete_gamma_nonpos requires integer order <= 0, got {order}")
    if not x > 0:
        raise DomainError(f"upper_incomplete_gamma_nonpos requires x > 0, got {x}")
    n = -int(order)
    return float(x ** (-n) * special.expn(n + 1, x))


def scaled_en_terms(n_max: int, mu: float, accuracy: SpecialFnAccuracy = DEFAULT_ACCURACY) -> np.ndarray:
    """Array of e^mu E_n(mu) for n = 1..n_max."""
    orders = np.arange(1, n_max + 1)
    if mu <= SCALED_EN_SWITCH:
        return np.exp(mu) * special.expn(orders, mu)
    return np.array([exp_integral_en_scaled(int(n), mu, accuracy) for n in orders])


@dataclass(frozen=True)
class SFunctionTable:
    """Normalized S(w, mu) * mu^w / Gamma(w) for w = 1..w_max at one mu.

    The normalized value is E[ln(1 + T)] for T ~ Gamma(shape w, scale 1/mu),
    which stays O(ln w) where S itself overflows.
    """

    mu: float
    normalized: np.ndarray
    fallback: frozenset

    @property
    def w_max(self) -> int:
        return len(self.normalized)

    def log_value(self, w: int) -> float:
        """ln S(w, mu)."""
        return math.log(self.normalized[w - 1]) + float(special.gammaln(w)) - w * math.log(self.mu)

    def value(self, w: int) -> float:
        return math.exp(self.log_value(w))


def s_function_table(
    w_max: int, mu: float, accuracy: SpecialFnAccuracy = DEFAULT_ACCURACY
) -> SFunctionTable:
    """Normalized S(w, mu) for every w up to ``w_max``.

    From the closed form S(w, mu) = (w-1)! e^mu sum_{k=1}^{w} Gamma(k-w, mu) / mu^k
    and Gamma(k-w, mu) = mu^(k-w) E_{w-k+1}(mu), the normalized value is the
    prefix sum of e^mu E_n(mu) over n = 1..w. A prefix whose sum is tiny
    against its largest summand, or not finite, is recomputed by quadrature.
    The exact summands are positive, so the ratio check only trips when the
    computed terms are wrong in sign.
    """
    if w_max < 1:
        raise DomainError(f"s_function requires w >= 1, got {w_max}")
    if not mu > 0:
        raise DomainError(f"s_function requires mu > 0, got {mu}")

    terms = scaled_en_terms(w_max, mu, accuracy)
    sums = np.cumsum(terms)
    largest = np.maximum.accumulate(np.abs(terms))

    normalized = sums.copy()
    fallback = set()
    bad = ~np.isfinite(sums) | ~np.isfinite(largest) | (np.abs(sums) < CANCELLATION_RATIO * largest)
    for index in np.flatnonzero(bad):
        w = int(index) + 1
        logger.warning(f"S({w}, {mu:g}) closed form lost precision, using quadrature")
        normalized[index] = s_function_normalized_quadrature(w, mu)
        fallback.add(w)

    normalized.setflags(write=False)
    return SFunctionTable(mu=mu, normalized=normalized, fallback=frozenset(fallback))


def s_function(
    w: int,
    mu: float,
    accuracy: SpecialFnAccuracy = DEFAULT_ACCURACY,
    full_output: bool = False,
):
    """S(w, mu) = int_0^inf ln(1 + t) t^(w-1) e^(-mu t) dt.

    Args:
        w: Positive integer order
        mu: Positive decay rate
        accuracy: Tolerances for the exponential-integral evaluation
        full_output: Also return whether the quadrature fallback was used

    Returns:
        S(w, mu), or (S(w, mu), used_quadrature) when ``full_output``
    """
    if w < 1 or int(w) != w:
        raise DomainError(f"s_function requires integer w >= 1, got {w}")
    table = s_function_table(int(w), mu, accuracy)
    value = table.value(int(w))
    if full_output:
        return value, int(w) in table.fallback
    return value


def s_function_normalized_quadrature(w: int, mu: float, rel_tol: float = 1e-11) -> float:
    """E[ln(1 + T)], T ~ Gamma(w, 1/mu), by direct quadrature over u = mu * t."""
    log_norm = -float(special.gammaln(w))

    def integrand(u):
        if u <= 0.0:
            return 0.0
        return math.log1p(u / mu) * math.exp(special.xlogy(w - 1, u) - u + log_norm)

    result = integrate_semi_infinite(integrand, scale=float(max(w, 1)), rel_tol=rel_tol, points=(w - 1.0,))
    return result.value


def s_function_quadrature(w: int, mu: float, rel_tol: float = 1e-11) -> float:
    """Quadrature oracle for S(w, mu) from its defining integral."""
    if w < 1 or int(w) != w:
        raise DomainError(f"s_function requires integer w >= 1, got {w}")
    if not mu > 0:
        raise DomainError(f"s_function requires mu > 0, got {mu}")
    normalized = s_function_normalized_quadrature(int(w), mu, rel_tol)
    return normalized * math.exp(float(special.gammaln(w)) - w * math.log(mu))
