"""Tests for special functions and quadrature helpers."""
import math
import os
import sys
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from src.numerics import special_fns
from src.numerics.quadrature import gauss_legendre, integrate_semi_infinite
from src.numerics.special_fns import (
    SpecialFnAccuracy,
    exp_integral_en,
    exp_integral_en_scaled,
    ln_gamma,
    lower_incomplete_gamma,
    lower_incomplete_gamma_finite,
    s_function,
    s_function_quadrature,
    s_function_table,
    upper_incomplete_gamma_nonpos,
)
from src.utils.errors import DomainError, NumericsError


class TestGammaFamily:
    """Test Gamma-family wrappers."""

    def test_ln_gamma(self):
        """Test ln Gamma at integers and half-integers."""
        assert ln_gamma(5.0) == pytest.approx(math.log(24.0), rel=1e-14)
        assert ln_gamma(0.5) == pytest.approx(0.5 * math.log(math.pi), rel=1e-14)

    def test_ln_gamma_rejects_nonpositive(self):
        """Test domain check of ln Gamma."""
        with pytest.raises(DomainError):
            ln_gamma(0.0)

    @pytest.mark.parametrize("x", [0.1, 1.0, 10.0])
    def test_finite_expansion_matches_scipy(self, x):
        """Test the finite expansion of gamma(a, x) for integer a."""
        for a in range(1, 11):
            assert lower_incomplete_gamma_finite(a, x) == pytest.approx(
                lower_incomplete_gamma(a, x), rel=1e-10
            )

    @pytest.mark.parametrize("a,x", [(10, 0.1), (20, 1.0), (5, 4.9), (3, 1e-6), (12, 30.0)])
    def test_finite_expansion_without_cancellation(self, a, x):
        """Test gamma(a, x) to 1e-12 relative where 1 - e^-x sum x^n / n! cancels."""
        expected = special.gammainc(a, x) * special.gamma(a)
        assert lower_incomplete_gamma_finite(a, x) == pytest.approx(expected, rel=1e-12)

    def test_finite_expansion_small_argument(self):
        """Test gamma(3, x) ~ x^3 / 3 (1 - 3x / 4) as x -> 0."""
        x = 1e-6
        assert lower_incomplete_gamma_finite(3, x) == pytest.approx(x**3 / 3 * (1 - 0.75 * x), rel=1e-10)
        assert lower_incomplete_gamma_finite(3, x) > 0.0

    @pytest.mark.parametrize("a", [1, 2, 7, 20])
    @pytest.mark.parametrize("x", [0.1, 1.0, 10.0, 50.0])
    def test_lower_and_upper_reconstruct_gamma(self, a, x):
        """Test gamma(a, x) + Gamma(a, x) = Gamma(a)."""
        upper = special.gammaincc(a, x) * special.gamma(a)
        total = lower_incomplete_gamma(a, x) + upper
        assert total == pytest.approx(special.gamma(a), rel=1e-12)
        assert lower_incomplete_gamma_finite(a, x) + upper == pytest.approx(special.gamma(a), rel=1e-12)

    @pytest.mark.parametrize("a,x", [(180.5, 5.0), (172.0, 1.0), (400.0, 2.0)])
    def test_large_order(self, a, x):
        """Test gamma(a+1, x) = a gamma(a, x) - x^a e^-x past the range of Gamma(a)."""
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            value = lower_incomplete_gamma(a, x)
            shifted = lower_incomplete_gamma(a + 1, x)
        assert math.isfinite(value) and value > 0
        assert shifted == pytest.approx(a * value - math.exp(a * math.log(x) - x), rel=1e-9)

    def test_overflow_is_infinite(self):
        """Test a result beyond the float range is inf, not nan."""
        assert math.isinf(lower_incomplete_gamma(500.0, 600.0))

    def test_lower_incomplete_gamma_at_zero(self):
        """Test gamma(a, 0) = 0."""
        assert lower_incomplete_gamma(2.5, 0.0) == 0.0
        assert lower_incomplete_gamma_finite(3, 0.0) == 0.0

    def test_lower_incomplete_gamma_domain(self):
        """Test domain checks of gamma(a, x)."""
        with pytest.raises(DomainError):
            lower_incomplete_gamma(0.0, 1.0)
        with pytest.raises(DomainError):
            lower_incomplete_gamma(1.0, -1.0)
        with pytest.raises(DomainError):
            lower_incomplete_gamma_finite(2.5, 1.0)


class TestUpperIncompleteGamma:
    """Test Gamma(-n, x) = x^-n E_{n+1}(x)."""

    @pytest.mark.parametrize("x", [0.1, 1.0, 10.0])
    def test_recurrence(self, x):
        """Test n Gamma(-n, x) + Gamma(1-n, x) = x^-n e^-x for n = 1..30."""
        for n in range(1, 31):
            lhs = n * upper_incomplete_gamma_nonpos(-n, x) + upper_incomplete_gamma_nonpos(1 - n, x)
            rhs = x ** (-n) * math.exp(-x)
            assert lhs == pytest.approx(rhs, rel=1e-10)

    @pytest.mark.parametrize("x", [0.1, 1.0, 10.0])
    def test_order_zero_is_e1(self, x):
        """Test Gamma(0, x) = E_1(x)."""
        assert upper_incomplete_gamma_nonpos(0, x) == pytest.approx(exp_integral_en(1, x), rel=1e-14)

    @pytest.mark.parametrize("n", [0, 1, 2, 5])
    @pytest.mark.parametrize("x", [1.0, 10.0])
    def test_against_defining_integral(self, n, x):
        """Test against int_x^inf t^(-n-1) e^-t dt."""
        # t = x + s keeps the integrand O(1) on [0, inf)
        shifted, _ = integrate.quad(lambda s: (x + s) ** (-n - 1) * math.exp(-s), 0.0, np.inf, epsrel=1e-13)
        expected = math.exp(-x) * shifted
        assert upper_incomplete_gamma_nonpos(-n, x) == pytest.approx(expected, rel=1e-9)

    def test_rejects_positive_order(self):
        """Test domain check on the order."""
        with pytest.raises(DomainError):
            upper_incomplete_gamma_nonpos(1, 1.0)


class TestScaledExponentialIntegral:
    """Test e^x E_n(x)."""

    @pytest.mark.parametrize("n", [1, 2, 7, 30])
    @pytest.mark.parametrize("x", [0.5, 1.0, 1.5, 20.0, 300.0])
    def test_matches_unscaled(self, n, x):
        """Test agreement with exp(x) * E_n(x) where both are finite."""
        assert exp_integral_en_scaled(n, x) == pytest.approx(math.exp(x) * special.expn(n, x), rel=1e-10)

    def test_large_argument(self):
        """Test e^x E_n(x) ~ 1 / (x + n) for very large x."""
        x, n = 1e4, 3
        assert exp_integral_en_scaled(n, x) == pytest.approx(1.0 / (x + n), rel=1e-6)

    def test_non_convergence(self):
        """Test that an exhausted iteration budget raises."""
        accuracy = SpecialFnAccuracy(target_rel_err=1e-15, max_iterations=10)
        with pytest.raises(NumericsError):
            exp_integral_en_scaled(40, 1.01, accuracy)

    def test_accuracy_validation(self):
        """Test SpecialFnAccuracy bounds."""
        with pytest.raises(DomainError):
            SpecialFnAccuracy(target_rel_err=0.1)
        with pytest.raises(DomainError):
            SpecialFnAccuracy(max_iterations=1)


class TestSFunction:
    """Test S(w, mu) = int ln(1+t) t^(w-1) e^(-mu t) dt."""

    @pytest.mark.parametrize("mu", [0.01, 0.1, 1.0, 10.0])
    def test_matches_quadrature(self, mu):
        """Test the closed form against its quadrature oracle for w = 1..40."""
        for w in range(1, 41):
            assert s_function(w, mu) == pytest.approx(s_function_quadrature(w, mu), rel=1e-8)

    @pytest.mark.parametrize("mu", [0.05, 2.0, 600.0])
    def test_first_order(self, mu):
        """Test S(1, mu) = e^mu E_1(mu) / mu."""
        expected = exp_integral_en_scaled(1, mu) / mu
        assert s_function(1, mu) == pytest.approx(expected, rel=1e-10)

    def test_large_mu(self):
        """Test S(w, mu) ~ w! / mu^(w+1) for mu >> 1."""
        mu = 1e4
        value, used_quadrature = s_function(2, mu, full_output=True)
        assert not used_quadrature
        assert value == pytest.approx(2.0 / mu**3, rel=1e-3)

    def test_table_matches_single_values(self):
        """Test that the prefix table agrees with per-w evaluation."""
        table = s_function_table(12, 0.3)
        assert table.w_max == 12
        for w in (1, 5, 12):
            assert table.value(w) == pytest.approx(s_function(w, 0.3), rel=1e-14)
        assert not table.fallback

    def test_domain(self):
        """Test domain checks."""
        with pytest.raises(DomainError):
            s_function(0, 1.0)
        with pytest.raises(DomainError):
            s_function(2, 0.0)
        with pytest.raises(DomainError):
            s_function(1.5, 1.0)

    @pytest.mark.parametrize("w", [1, 5, 20])
    def test_decreasing_in_mu(self, w):
        """Test S(w, mu) > 0 and strictly decreasing in mu at fixed w."""
        values = [s_function(w, mu) for mu in np.geomspace(0.01, 100.0, 15)]
        assert all(v > 0 for v in values)
        assert all(b < a for a, b in zip(values, values[1:]))

    def test_fallback_on_non_finite_terms(self, monkeypatch):
        """Test prefixes that are not finite are recomputed by quadrature."""
        exact = s_function_table(6, 0.5)
        original = special_fns.scaled_en_terms

        def broken_terms(n_max, mu, accuracy):
            terms = original(n_max, mu, accuracy)
            terms[3] = math.inf
            return terms

        monkeypatch.setattr(special_fns, "scaled_en_terms", broken_terms)
        table = s_function_table(6, 0.5)
        assert table.fallback == frozenset({4, 5, 6})
        np.testing.assert_allclose(table.normalized, exact.normalized, rtol=1e-8)
        assert s_function(5, 0.5, full_output=True)[1]

    def test_fallback_on_cancellation(self, monkeypatch):
        """Test a prefix sum far below its largest summand is recomputed."""
        exact = s_function_table(3, 0.5)
        original = special_fns.scaled_en_terms

        def cancelling_terms(n_max, mu, accuracy):
            terms = original(n_max, mu, accuracy)
            terms[1] = -terms[0]
            return terms

        monkeypatch.setattr(special_fns, "scaled_en_terms", cancelling_terms)
        table = s_function_table(3, 0.5)
        assert table.fallback == frozenset({2})
        assert table.normalized[1] == pytest.approx(exact.normalized[1], rel=1e-8)

    @settings(max_examples=40, deadline=None)
    @given(mu=st.floats(min_value=1e-2, max_value=1e3), w_max=st.integers(min_value=2, max_value=60))
    def test_normalized_increases_with_order(self, mu, w_max):
        """Test E[ln(1+T)], T ~ Gamma(w, 1/mu), is positive and increasing in w."""
        normalized = s_function_table(w_max, mu).normalized
        assert np.all(normalized > 0)
        assert np.all(np.diff(normalized) > 0)


class TestQuadrature:
    """Test the semi-infinite quadrature helper."""

    def test_exponential(self):
        """Test int_0^inf e^(-x/s)/s dx = 1."""
        result = integrate_semi_infinite(lambda x: math.exp(-x / 3.0) / 3.0, scale=3.0)
        assert result.converged
        assert result.value == pytest.approx(1.0, rel=1e-12)

    def test_gamma_density_with_break_point(self):
        """Test a peaked Gamma density integrates to one."""
        shape = 40

        def density(x):
            return math.exp(special.xlogy(shape - 1, x) - x - special.gammaln(shape))

        result = integrate_semi_infinite(density, scale=float(shape), points=(shape - 1.0,))
        assert result.value == pytest.approx(1.0, rel=1e-10)

    def test_non_finite_raises(self):
        """Test a divergent integrand raises NumericsError."""
        with pytest.raises(NumericsError):
            integrate_semi_infinite(lambda x: math.inf, scale=1.0)

    def test_bad_scale_raises(self):
        """Test the scale must be positive."""
        with pytest.raises(NumericsError):
            integrate_semi_infinite(lambda x: math.exp(-x), scale=0.0)

    def test_gauss_legendre(self):
        """Test the nodes integrate polynomials exactly and are cached."""
        nodes, weights = gauss_legendre(16)
        assert weights.sum() == pytest.approx(2.0, rel=1e-14)
        assert float(weights @ nodes**2) == pytest.approx(2.0 / 3.0, rel=1e-13)
        assert gauss_legendre(16)[0] is nodes
