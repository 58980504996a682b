"""Closed-form secrecy metrics over independent FTR main and eavesdropper channels.

Each channel's SNR is the mixture sum_j a_j Gamma(j+1, 2 sigma^2), so every
metric is a double series over component pairs (j_D, j_E) weighted by
a_{j_D} a_{j_E}, with a finite inner sum per pair. All terms are built in log
space; the series are truncated at the orders of the channel tables.
"""
import math
from typing import Callable, Optional

import numpy as np
import structlog
from scipy import special

from src.channel.coefficient_store import CoefficientStore
from src.numerics.quadrature import DEFAULT_REL_TOL
from src.numerics.special_fns import DEFAULT_ACCURACY, SpecialFnAccuracy, s_function_table
from src.secrecy.oracles import ORACLES
from src.secrecy.scenario import (
    ChannelTables,
    MetricResult,
    TruncationTargets,
    WiretapScenario,
    build_channel_tables,
)

logger = structlog.get_logger(__name__)

# Excursions beyond the valid range smaller than this are rounding noise.
CLAMP_TOL = 1e-6


def _clamp(value: float, lower: float, upper: float, name: str, notes: list) -> float:
    if value < lower - CLAMP_TOL or value > upper + CLAMP_TOL:
        message = f"{name} value {value:.6e} outside [{lower:g}, {upper:g}] beyond tolerance"
        logger.warning(message)
        notes.append(message)
    return min(max(value, lower), upper)


def _result(value: float, tables: ChannelTables, notes: list) -> MetricResult:
    return MetricResult(
        value=value,
        n_trunc_main=tables.main.n_trunc,
        n_trunc_eaves=tables.eaves.n_trunc,
        eps_bound=tables.eps_bound,
        diagnostics=tables.diagnostics() + tuple(notes),
    )


def _tables(scenario, trunc, tables, store) -> ChannelTables:
    if tables is not None:
        return tables
    return build_channel_tables(scenario, trunc, store)


def _log_s(table, w: np.ndarray) -> np.ndarray:
    """ln S(w, mu) for an array of w, from a normalized S table."""
    return np.log(table.normalized[w - 1]) + special.gammaln(w) - w * math.log(table.mu)


def _cross_terms(n_outer: int, n_inner: int, b_outer: float, b_inner: float, s_cross) -> np.ndarray:
    """A[i, j] = sum_{n<=j} S(i+n+1, mu_c) / (n! b_inner^n i! b_outer^(i+1)).

    This is E[ln(1+X_i) e^(-X_i/b_inner) sum_{n<=j} (X_i/b_inner)^n / n!]
    for X_i ~ Gamma(i+1, b_outer).
    """
    i = np.arange(n_outer + 1)[:, None]
    n = np.arange(n_inner + 1)[None, :]
    log_terms = (
        _log_s(s_cross, i + n + 1)
        - special.gammaln(n + 1)
        - n * math.log(b_inner)
        - special.gammaln(i + 1)
        - (i + 1) * math.log(b_outer)
    )
    return np.cumsum(np.exp(log_terms), axis=1)


def asc(
    scenario: WiretapScenario,
    trunc: TruncationTargets = TruncationTargets(),
    tables: Optional[ChannelTables] = None,
    store: Optional[CoefficientStore] = None,
    accuracy: SpecialFnAccuracy = DEFAULT_ACCURACY,
) -> MetricResult:
    """Average secrecy capacity in nats.

    ASC = I1 + I2 - I3 with
      I1 = int ln(1+g) f_D(g) F_E(g) dg,
      I2 = int ln(1+g) f_E(g) F_D(g) dg,
      I3 = int ln(1+g) f_E(g) dg,
    each expanded per component pair through S(w, mu).
    """
    tables = _tables(scenario, trunc, tables, store)
    a_d, a_e = tables.main.weights, tables.eaves.weights
    n_d, n_e = tables.main.n_trunc, tables.eaves.n_trunc
    b_d, b_e = tables.main.scale, tables.eaves.scale

    s_d = s_function_table(n_d + 1, 1.0 / b_d, accuracy)
    s_e = s_function_table(n_e + 1, 1.0 / b_e, accuracy)
    s_c = s_function_table(n_d + n_e + 1, 1.0 / b_d + 1.0 / b_e, accuracy)

    # E[ln(1 + X)] per Gamma component
    log_moment_d = np.asarray(s_d.normalized)
    log_moment_e = np.asarray(s_e.normalized)

    cross_d = _cross_terms(n_d, n_e, b_d, b_e, s_c)  # [j_D, j_E]
    cross_e = _cross_terms(n_e, n_d, b_e, b_d, s_c)  # [j_E, j_D]

    mass_d = math.fsum(a_d)
    mass_e = math.fsum(a_e)
    i3 = math.fsum(a_e * log_moment_e)

    value = math.fsum(
        [
            mass_e * math.fsum(a_d * log_moment_d),
            -float(a_d @ cross_d @ a_e),
            # I2's leading part minus I3: (mass_D - 1) * I3
            -(1.0 - mass_d) * i3,
            -float(a_e @ cross_e @ a_d),
        ]
    )

    notes = []
    fallbacks = sorted(s_d.fallback | s_e.fallback | s_c.fallback)
    if fallbacks:
        notes.append(f"S(w, mu) quadrature fallback used for w in {fallbacks}")
    value = _clamp(value, 0.0, math.inf, "asc", notes)
    return _result(value, tables, notes)


def sop(
    scenario: WiretapScenario,
    trunc: TruncationTargets = TruncationTargets(),
    tables: Optional[ChannelTables] = None,
    store: Optional[CoefficientStore] = None,
) -> MetricResult:
    """Secrecy outage probability P{g_D < Theta g_E + Theta - 1}."""
    tables = _tables(scenario, trunc, tables, store)
    a_d, a_e = tables.main.weights, tables.eaves.weights
    n_d, n_e = tables.main.n_trunc, tables.eaves.n_trunc
    b_d, b_e = tables.main.scale, tables.eaves.scale
    theta = scenario.theta

    # Lower triangle 0 <= q <= n <= N_D, flattened.
    n_idx, q_idx = np.tril_indices(n_d + 1)
    n_col = n_idx[:, None].astype(float)
    q_col = q_idx[:, None].astype(float)
    j = np.arange(n_e + 1)[None, :].astype(float)

    ratio = theta * b_e / b_d
    log_terms = (
        # C(n, q) / n!
        - special.gammaln(q_col + 1)
        - special.gammaln(n_col - q_col + 1)
        + q_col * math.log(theta)
        + special.xlogy(n_col - q_col, theta - 1.0)  # 0^0 = 1 at Theta = 1
        + special.gammaln(j + q_col + 1)
        + q_col * math.log(b_e)
        - special.gammaln(j + 1)
        - n_col * math.log(b_d)
        - (j + q_col + 1) * math.log1p(ratio)
        - (theta - 1.0) / b_d
    )
    terms = np.exp(log_terms)

    # by_n[n, j_E] = sum over q; survival[j_D, j_E] = sum over n <= j_D
    by_n = np.zeros((n_d + 1, n_e + 1))
    np.add.at(by_n, n_idx, terms)
    survival = np.cumsum(by_n, axis=0)

    value = math.fsum(a_d) * math.fsum(a_e) - float(a_d @ survival @ a_e)

    notes = []
    value = _clamp(value, 0.0, 1.0, "sop", notes)
    return _result(value, tables, notes)


def sop_lower(
    scenario: WiretapScenario,
    trunc: TruncationTargets = TruncationTargets(),
    tables: Optional[ChannelTables] = None,
    store: Optional[CoefficientStore] = None,
) -> MetricResult:
    """Lower bound of the SOP, P{g_D < Theta g_E}.

    Per pair this is a binomial tail:
      sum_{k=0}^{j_E} C(j_D+j_E+1, j_D+1+k) p^(j_D+1+k) (1-p)^(j_E-k),
      p = Theta / (Theta + sigma_D^2 / sigma_E^2).
    """
    tables = _tables(scenario, trunc, tables, store)
    a_d, a_e = tables.main.weights, tables.eaves.weights
    n_d, n_e = tables.main.n_trunc, tables.eaves.n_trunc
    theta = scenario.theta
    ratio = scenario.sigma_ratio

    log_p = math.log(theta) - math.log(theta + ratio)
    log_q = math.log(ratio) - math.log(theta + ratio)

    i = np.arange(n_d + 1)[:, None].astype(float)
    j = np.arange(n_e + 1)[None, :].astype(float)
    log_total = special.gammaln(i + j + 2)
    pair = np.zeros((n_d + 1, n_e + 1))
    for k in range(n_e + 1):
        valid = j >= k
        log_terms = (
            log_total
            - special.gammaln(i + 2 + k)
            - special.gammaln(np.where(valid, j - k, 0.0) + 1)
            + (i + 1 + k) * log_p
            + np.where(valid, j - k, 0.0) * log_q
        )
        pair += np.where(valid, np.exp(log_terms), 0.0)

    value = float(a_d @ pair @ a_e)

    notes = []
    value = _clamp(value, 0.0, 1.0, "sop_lower", notes)
    return _result(value, tables, notes)


def spsc(
    scenario: WiretapScenario,
    trunc: TruncationTargets = TruncationTargets(),
    tables: Optional[ChannelTables] = None,
    store: Optional[CoefficientStore] = None,
) -> MetricResult:
    """Probability of strictly positive secrecy capacity, 1 - SOP^L at R_s = 0."""
    lower = sop_lower(scenario.with_rate(0.0), trunc, tables, store)
    return MetricResult(
        value=1.0 - lower.value,
        n_trunc_main=lower.n_trunc_main,
        n_trunc_eaves=lower.n_trunc_eaves,
        eps_bound=lower.eps_bound,
        diagnostics=lower.diagnostics,
    )


METRICS: dict[str, Callable[..., MetricResult]] = {
    "asc": asc,
    "sop": sop,
    "sopl": sop_lower,
    "spsc": spsc,
}


def evaluate_metric(
    name: str,
    scenario: WiretapScenario,
    trunc: TruncationTargets = TruncationTargets(),
    tables: Optional[ChannelTables] = None,
    store: Optional[CoefficientStore] = None,
    oracle: bool = False,
    rel_tol: float = DEFAULT_REL_TOL,
) -> MetricResult:
    """Evaluate a metric by name, optionally attaching its quadrature oracle."""
    if name not in METRICS:
        raise KeyError(f"unknown metric {name!r} (expected one of {sorted(METRICS)})")
    tables = _tables(scenario, trunc, tables, store)
    result = METRICS[name](scenario, tables=tables)
    if oracle:
        result = result.with_oracle(ORACLES[name](scenario, tables=tables, rel_tol=rel_tol).value)
        if not result.oracle_agrees:
            logger.warning(
                f"{name} closed form {result.value:.9g} differs from quadrature "
                f"{result.oracle_value:.9g} by {result.oracle_delta:.3e}"
            )
    return result
