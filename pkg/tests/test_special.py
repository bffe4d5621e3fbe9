from __future__ import annotations

import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import eval_genlaguerre, gammaln, roots_genlaguerre

from twlab.errors import DomainError, RangeError
from twlab.special import airy, airy_primitive, laguerre_psi, laguerre_psi_table, phi_edge, phi_prefactor


def airy_series(x, terms=30):
    """Maclaurin series of Ai and Ai' (independent of the library route)."""
    c1 = 1 / (3 ** (2 / 3) * math.gamma(2 / 3))
    c2 = 1 / (3 ** (1 / 3) * math.gamma(1 / 3))
    # f = sum a_k x^{3k}, g = sum b_k x^{3k+1}
    a, b = [1.0], [1.0]
    for k in range(terms - 1):
        a.append(a[-1] / ((3 * k + 2) * (3 * k + 3)))
        b.append(b[-1] / ((3 * k + 3) * (3 * k + 4)))
    f = sum(ak * x ** (3 * k) for k, ak in enumerate(a))
    g = sum(bk * x ** (3 * k + 1) for k, bk in enumerate(b))
    fp = sum(ak * 3 * k * x ** (3 * k - 1) for k, ak in enumerate(a) if k)
    gp = sum(bk * (3 * k + 1) * x ** (3 * k) for k, bk in enumerate(b))
    return c1 * f - c2 * g, c1 * fp - c2 * gp


def psi_direct(k, alpha, x):
    """sqrt(k!/Gamma(k+alpha+1)) x^{alpha/2} e^{-x/2} L_k^alpha(x) in log form."""
    x = np.asarray(x, dtype=float)
    logw = 0.5 * (gammaln(k + 1) - gammaln(k + alpha + 1)) + 0.5 * alpha * np.log(x) - 0.5 * x
    return np.exp(logw) * eval_genlaguerre(k, alpha, x)


class TestAiry:
    def test_zero(self):
        v = airy(0.0)
        assert v.ai == pytest.approx(0.3550280539, abs=1e-10)
        assert v.ai_prime == pytest.approx(-0.2588194038, abs=1e-10)

    def test_one(self):
        assert airy(1.0).ai == pytest.approx(0.1352924163, abs=1e-10)

    @pytest.mark.parametrize("x", [-4.0, -1.3, 0.5, 1.0, 2.5, 4.0])
    def test_series_oracle(self, x):
        ai, aip = airy_series(x, 40)
        v = airy(x)
        assert v.ai == pytest.approx(ai, abs=1e-10)
        assert v.ai_prime == pytest.approx(aip, abs=1e-9)

    @pytest.mark.parametrize("x", [-35.0, -12.0, 8.0, 30.0, 150.0])
    def test_mpmath_oracle(self, x):
        v = airy(x)
        assert v.ai == pytest.approx(float(mp.airyai(x)), abs=1e-10 if x >= 0 else 1e-8, rel=1e-10)

    def test_ode_residual(self):
        x, h = 1.5, 1e-3
        ai = lambda t: airy(t).ai  # noqa: E731
        second = (airy(x + h).ai_prime - airy(x - h).ai_prime) / (2 * h)
        assert abs(second - x * ai(x)) <= 1e-6
        assert abs(float(mp.diff(mp.airyai, x, 2)) - x * ai(x)) <= 1e-10

    def test_window(self):
        with pytest.raises(RangeError):
            airy(-41.0)
        with pytest.raises(RangeError):
            airy(201.0)

    def test_decay_envelope(self):
        x = np.linspace(5, 30, 50)
        ai = airy(x).ai
        assert np.all(ai > 0) and np.all(ai < np.exp(-x))


class TestAiryPrimitive:
    def test_right_tail(self):
        assert airy_primitive(30.0) == pytest.approx(1.0, abs=1e-8)

    def test_split_at_zero(self):
        assert airy_primitive(0.0) == pytest.approx(2 / 3, abs=1e-8)

    @pytest.mark.parametrize("y", [-30.0, -7.5, -2.0, 1.0, 3.0])
    def test_mpmath(self, y):
        mp.mp.dps = 20
        val = float(1 - mp.quad(mp.airyai, [y, y + 10, mp.inf]))
        assert airy_primitive(y) == pytest.approx(val, abs=1e-9)

    def test_left_value(self):
        assert airy_primitive(-30.0) == pytest.approx(-0.0410487, abs=1e-6)

    def test_derivative_is_ai(self):
        rng = np.random.default_rng(0)
        h = 1e-4
        for y in rng.uniform(-20, 10, 20):
            fd = (airy_primitive(y + h) - airy_primitive(y - h)) / (2 * h)
            assert fd == pytest.approx(airy(y).ai, abs=1e-6)


class TestLaguerre:
    def test_examples(self):
        assert laguerre_psi(0, 0, 0.0) == 1.0
        assert laguerre_psi(1, 0, 1.0) == pytest.approx(0.0, abs=1e-15)

    def test_orthonormality(self):
        x, w = roots_genlaguerre(80, 0.0)
        w = w * np.exp(x)
        a = laguerre_psi(3, 2, x)
        b = laguerre_psi(5, 2, x)
        assert abs(np.sum(w * a * b)) <= 1e-8
        assert np.sum(w * b * b) == pytest.approx(1.0, abs=1e-8)

    @pytest.mark.parametrize("alpha", [0.0, 0.5, 7.0, 50.0])
    def test_recurrence_matches_direct(self, alpha):
        kmax = 50
        x = np.linspace(0.01, 4 * kmax, 301)
        tab = laguerre_psi_table(kmax, alpha, x)
        for k in (0, 1, 5, 20, 50):
            ref = psi_direct(k, alpha, x)
            scale = np.max(np.abs(ref))
            assert np.max(np.abs(tab[k] - ref)) <= 1e-8 * scale

    def test_large_parameters_finite(self):
        v = laguerre_psi_table(5000, 5000.0, np.array([0.0, 1e4, 2e4, 5e4]))
        assert np.all(np.isfinite(v))

    def test_negative_x(self):
        with pytest.raises(DomainError):
            laguerre_psi(2, 1.0, -0.1)

    def test_alpha_minus_one(self):
        x = np.array([0.5, 2.0, 9.0])
        assert np.allclose(laguerre_psi(4, -1.0, x), -laguerre_psi(3, 1.0, x), atol=1e-15)

    @settings(max_examples=50, deadline=None)
    @given(k=st.integers(0, 40), alpha=st.floats(0, 30), x=st.floats(0.01, 150))
    def test_direct_formula_property(self, k, alpha, x):
        ref = float(psi_direct(k, alpha, x))
        assert laguerre_psi(k, alpha, x) == pytest.approx(ref, abs=1e-10, rel=1e-8)


class TestPhiEdge:
    def test_support(self):
        assert phi_edge(10, 3.0, 1, -1.0) == 0.0
        assert phi_edge(10, 3.0, 2, -0.5) == 0.0

    def test_singular_at_zero(self):
        with pytest.raises(DomainError):
            phi_edge(10, 3.0, 2, 0.0)

    def test_definition(self):
        x = np.array([3.0, 11.0, 30.0])
        n, a = 10, 4.0
        c = phi_prefactor(n, a)
        ref1 = (-1) ** n * c * psi_direct(n, a - 1, x) / np.sqrt(x)
        ref2 = (-1) ** (n - 1) * c * psi_direct(n - 1, a + 1, x) / np.sqrt(x)
        assert np.allclose(phi_edge(n, a, 1, x), ref1, rtol=1e-10)
        assert np.allclose(phi_edge(n, a, 2, x), ref2, rtol=1e-10)

    def test_sign_alternation(self):
        # same psi values, prefactor sign flips with N
        x = 7.0
        v10 = phi_edge(10, 4.0, 1, x) / (phi_prefactor(10, 4.0) * laguerre_psi(10, 3.0, x) / np.sqrt(x))
        v11 = phi_edge(11, 4.0, 1, x) / (phi_prefactor(11, 4.0) * laguerre_psi(11, 3.0, x) / np.sqrt(x))
        assert v10 == pytest.approx(1.0) and v11 == pytest.approx(-1.0)
