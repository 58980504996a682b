"""Quadrature oracles: the secrecy metrics straight from their defining integrals.

They integrate the truncated pdf/cdf of each channel numerically, so they agree
with the closed forms up to quadrature error only (both see the same
truncation).
"""
import math
from typing import Callable, Optional

from src.channel.coefficient_store import CoefficientStore
from src.channel.ftr_model import CoefficientTable, mean_snr, snr_cdf, snr_pdf
from src.numerics.quadrature import DEFAULT_REL_TOL, QuadratureResult, integrate_semi_infinite
from src.secrecy.scenario import (
    ChannelTables,
    TruncationTargets,
    WiretapScenario,
    build_channel_tables,
)

DEFAULT_QUAD_REL_TOL = DEFAULT_REL_TOL


def _tables(scenario, trunc, tables, store) -> ChannelTables:
    if tables is not None:
        return tables
    return build_channel_tables(scenario, trunc, store)


def _scale(table: CoefficientTable) -> float:
    return mean_snr(table) or table.scale


def _combine(*parts: tuple) -> QuadratureResult:
    """Signed sum of quadrature results, as (sign, result) pairs."""
    return QuadratureResult(
        value=math.fsum(sign * part.value for sign, part in parts),
        abs_err=math.fsum(part.abs_err for _, part in parts),
        converged=all(part.converged for _, part in parts),
    )


def log_moment(table: CoefficientTable, rel_tol: float = DEFAULT_QUAD_REL_TOL) -> QuadratureResult:
    """int ln(1 + g) f(g) dg for one channel (ergodic capacity in nats)."""
    return integrate_semi_infinite(
        lambda g: math.log1p(g) * snr_pdf(table, g), scale=_scale(table), rel_tol=rel_tol
    )


def asc_quadrature_oracle(
    scenario: WiretapScenario,
    trunc: TruncationTargets = TruncationTargets(),
    tables: Optional[ChannelTables] = None,
    store: Optional[CoefficientStore] = None,
    rel_tol: float = DEFAULT_QUAD_REL_TOL,
) -> QuadratureResult:
    """ASC = I1 + I2 - I3 by nested one-dimensional quadrature.

    I2 - I3 is integrated as one term, -int ln(1+g) f_E(g) (1 - F_D(g)) dg,
    which is the same quantity without the cancellation.
    """
    tables = _tables(scenario, trunc, tables, store)
    main, eaves = tables.main, tables.eaves
    scale_d, scale_e = _scale(main), _scale(eaves)

    i1 = integrate_semi_infinite(
        lambda g: math.log1p(g) * snr_pdf(main, g) * snr_cdf(eaves, g),
        scale=scale_d,
        rel_tol=rel_tol,
        points=(scale_e, 4.0 * scale_e),
    )
    i2_minus_i3 = integrate_semi_infinite(
        lambda g: math.log1p(g) * snr_pdf(eaves, g) * (1.0 - snr_cdf(main, g)),
        scale=scale_e,
        rel_tol=rel_tol,
        points=(scale_d, 4.0 * scale_d),
    )
    return _combine((1.0, i1), (-1.0, i2_minus_i3))


def sop_quadrature_oracle(
    scenario: WiretapScenario,
    trunc: TruncationTargets = TruncationTargets(),
    tables: Optional[ChannelTables] = None,
    store: Optional[CoefficientStore] = None,
    rel_tol: float = DEFAULT_QUAD_REL_TOL,
) -> QuadratureResult:
    """SOP = int F_D(Theta g + Theta - 1) f_E(g) dg."""
    tables = _tables(scenario, trunc, tables, store)
    main, eaves = tables.main, tables.eaves
    theta = scenario.theta
    return integrate_semi_infinite(
        lambda g: snr_cdf(main, theta * g + theta - 1.0) * snr_pdf(eaves, g),
        scale=_scale(eaves),
        rel_tol=rel_tol,
        points=(_scale(main) / theta,),
    )


def sop_lower_quadrature_oracle(
    scenario: WiretapScenario,
    trunc: TruncationTargets = TruncationTargets(),
    tables: Optional[ChannelTables] = None,
    store: Optional[CoefficientStore] = None,
    rel_tol: float = DEFAULT_QUAD_REL_TOL,
) -> QuadratureResult:
    """SOP^L = int F_D(Theta g) f_E(g) dg."""
    tables = _tables(scenario, trunc, tables, store)
    main, eaves = tables.main, tables.eaves
    theta = scenario.theta
    return integrate_semi_infinite(
        lambda g: snr_cdf(main, theta * g) * snr_pdf(eaves, g),
        scale=_scale(eaves),
        rel_tol=rel_tol,
        points=(_scale(main) / theta,),
    )


def spsc_quadrature_oracle(
    scenario: WiretapScenario,
    trunc: TruncationTargets = TruncationTargets(),
    tables: Optional[ChannelTables] = None,
    store: Optional[CoefficientStore] = None,
    rel_tol: float = DEFAULT_QUAD_REL_TOL,
) -> QuadratureResult:
    """SPSC = 1 - int F_D(g) f_E(g) dg."""
    lower = sop_lower_quadrature_oracle(scenario.with_rate(0.0), trunc, tables, store, rel_tol)
    return QuadratureResult(value=1.0 - lower.value, abs_err=lower.abs_err, converged=lower.converged)


def pdf_normalization(table: CoefficientTable, rel_tol: float = DEFAULT_QUAD_REL_TOL) -> QuadratureResult:
    """int f(g) dg of the truncated density; equals 1 - eps(N)."""
    return integrate_semi_infinite(lambda g: snr_pdf(table, g), scale=_scale(table), rel_tol=rel_tol)


ORACLES: dict[str, Callable[..., QuadratureResult]] = {
    "asc": asc_quadrature_oracle,
    "sop": sop_quadrature_oracle,
    "sopl": sop_lower_quadrature_oracle,
    "spsc": spsc_quadrature_oracle,
}
