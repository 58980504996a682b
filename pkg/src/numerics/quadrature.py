"""Quadrature helpers shared by the coefficient builder and the oracles."""
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
import structlog
from scipy import integrate

from src.utils.errors import NumericsError

logger = structlog.get_logger(__name__)

# Break points, in units of the integrand's natural scale, for [0, inf).
SCALE_EDGES = (0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0)

# QUADPACK subinterval cap per piece.
MAX_SUBINTERVALS = 200

DEFAULT_REL_TOL = 1e-10


@dataclass(frozen=True)
class QuadratureResult:
    """Value of a numerical integral with its error estimate."""

    value: float
    abs_err: float
    converged: bool


@lru_cache(maxsize=None)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [-1, 1]."""
    nodes, weights = np.polynomial.legendre.leggauss(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def integrate_semi_infinite(
    func: Callable[[float], float],
    scale: float,
    rel_tol: float = DEFAULT_REL_TOL,
    abs_tol: float = 1e-15,
    points: Sequence[float] = (),
) -> QuadratureResult:
    """Integrate ``func`` over [0, inf) by adaptive Gauss-Kronrod pieces.

    The half-line is cut at multiples of ``scale`` (plus any extra ``points``)
    so that peaked integrands are never sampled too coarsely; the last piece
    runs to infinity through QUADPACK's mapped rule.

    Args:
        func: Integrand, finite on (0, inf)
        scale: Characteristic width of the integrand (e.g. a distribution mean)
        rel_tol: Relative tolerance per piece
        abs_tol: Absolute tolerance per piece
        points: Additional break points

    Returns:
        QuadratureResult with the summed value and error estimate
    """
    if not scale > 0 or not math.isfinite(scale):
        raise NumericsError(f"quadrature scale must be positive and finite, got {scale}")

    edges = sorted({scale * e for e in SCALE_EDGES} | {p for p in points if p > 0})
    pieces = []
    errors = []
    converged = True

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", integrate.IntegrationWarning)
        for lo, hi in zip(edges[:-1], edges[1:]):
            value, err = integrate.quad(
                func, lo, hi, epsabs=abs_tol, epsrel=rel_tol, limit=MAX_SUBINTERVALS
            )
            pieces.append(value)
            errors.append(err)
        value, err = integrate.quad(
            func, edges[-1], np.inf, epsabs=abs_tol, epsrel=rel_tol, limit=MAX_SUBINTERVALS
        )
        pieces.append(value)
        errors.append(err)

    if any(issubclass(w.category, integrate.IntegrationWarning) for w in caught):
        converged = False
        logger.debug(f"Quadrature reported a convergence warning (scale={scale:g})")

    total = math.fsum(pieces)
    if not math.isfinite(total):
        raise NumericsError(f"quadrature produced a non-finite value (scale={scale:g})")

    return QuadratureResult(value=total, abs_err=math.fsum(errors), converged=converged)
