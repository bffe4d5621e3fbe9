from __future__ import annotations

from fractions import Fraction

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twlab.errors import DomainError
from twlab.mp_law import (
    AspectRatio,
    DomainParams,
    MPModel,
    SpectralPoint,
    classical_location,
    classical_locations,
    control_psi,
    edges,
    im_m_scaling_check,
    in_domain,
    mp_cdf,
    mp_density,
    stieltjes_mp,
)


def mp_cdf_oracle(x, rho):
    mp.mp.dps = 30
    lo, hi = (1 - mp.sqrt(rho)) ** 2, (1 + mp.sqrt(rho)) ** 2
    f = lambda t: mp.sqrt((t - lo) * (hi - t)) / (2 * mp.pi * t)  # noqa: E731
    return float(mp.quad(f, [lo, (lo + x) / 2, x]))


def quad_oracle(z, rho):
    """Both roots by the textbook formula; pick Im > 0."""
    z = complex(z)
    b = z + 1 - rho
    d = np.sqrt(complex(b * b - 4 * z))
    roots = [(-b + d) / (2 * z), (-b - d) / (2 * z)]
    return max(roots, key=lambda r: r.imag)


class TestAspectRatio:
    def test_exact_fraction(self):
        a = AspectRatio(300, 200)
        assert a.rho == Fraction(3, 2)
        assert a.shape == (300, 200)

    def test_orientation_enforced(self):
        with pytest.raises(DomainError):
            AspectRatio(10, 20)


class TestEdges:
    def test_examples(self):
        assert edges(1) == (0.0, 4.0)
        assert edges(4) == (1.0, 9.0)
        lo, hi = edges(2)
        assert lo == pytest.approx(0.171572875, abs=1e-8)
        assert hi == pytest.approx(5.828427125, abs=1e-8)

    def test_rho_below_one(self):
        with pytest.raises(DomainError):
            edges(0.5)


class TestDensity:
    def test_zero_outside(self):
        assert mp_density([-1.0, 0.1, 6.0], 2).tolist() == [0.0, 0.0, 0.0]

    def test_value_rho_one(self):
        # sqrt(2*2)/(2 pi 2): see ledger for the normalization used
        assert mp_density(2.0, 1) == pytest.approx(1 / (2 * np.pi), rel=1e-14)

    @pytest.mark.parametrize("rho", [1.0, 2.0, 4.0, 7.3])
    def test_unit_mass(self, rho):
        mp.mp.dps = 20
        lo, hi = edges(rho)
        mass = mp.quad(lambda t: mp.sqrt((t - lo) * (hi - t)) / (2 * mp.pi * t), [lo, hi])
        assert float(mass) == pytest.approx(1.0, abs=1e-8)
        assert mp_cdf(hi, rho) == pytest.approx(1.0, abs=1e-14)

    def test_density_is_stieltjes_boundary_value(self):
        x = np.linspace(0.3, 5.5, 13)
        im = np.asarray(stieltjes_mp(x + 1e-9j, 2.0)).imag / np.pi
        assert np.allclose(im, mp_density(x, 2.0), atol=1e-7)


class TestCDF:
    @pytest.mark.parametrize("rho", [1.0, 1.0001, 2.0, 5.0])
    def test_against_mpmath(self, rho):
        lo, hi = edges(rho)
        for x in np.linspace(lo, hi, 9)[1:-1]:
            assert mp_cdf(x, rho) == pytest.approx(mp_cdf_oracle(x, rho), abs=1e-12)

    def test_monotone(self):
        x = np.linspace(-1, 7, 400)
        assert np.all(np.diff(mp_cdf(x, 2.0)) >= 0)


class TestStieltjes:
    def test_double_root_at_edge(self):
        assert stieltjes_mp(4.0, 1) == -0.5

    def test_value_at_i(self):
        m = stieltjes_mp(1j, 1)
        assert m == pytest.approx(quad_oracle(1j, 1), abs=1e-14)
        assert m.real == pytest.approx(0.30024, abs=1e-5)
        assert m.imag == pytest.approx(0.62481, abs=1e-5)

    def test_real_axis_right_of_support(self):
        m = stieltjes_mp(100.0, 2.0)
        assert m.imag == 0 and -0.02 < m.real < 0
        assert (stieltjes_mp(1e8, 2.0) * 1e8).real == pytest.approx(-1.0, rel=1e-6)

    def test_on_support_rejected(self):
        with pytest.raises(DomainError):
            stieltjes_mp(2.0, 1)

    def test_normalization_at_infinity(self):
        eta = 1e6
        assert abs(1j * eta * stieltjes_mp(1j * eta, 2.0) + 1) < 1e-5

    @settings(max_examples=300, deadline=None)
    @given(
        e=st.floats(-5, 15),
        log_eta=st.floats(-8, 1),
        rho=st.floats(1, 10),
    )
    def test_quadratic_residual_and_herglotz(self, e, log_eta, rho):
        z = complex(e, 10**log_eta)
        m = stieltjes_mp(z, rho)
        assert m.imag > 0
        assert abs(z * m * m + (z + 1 - rho) * m + 1) <= 1e-12 * (1 + abs(z)) * max(1.0, abs(m)) ** 2

    def test_matches_textbook_root(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            z = complex(rng.uniform(-2, 10), rng.uniform(0.01, 3))
            rho = rng.uniform(1, 6)
            assert stieltjes_mp(z, rho) == pytest.approx(quad_oracle(z, rho), abs=1e-12)

    def test_edge_proximity(self):
        # |m(z) + 1/(1+sqrt rho)| shrinks like N^(-1/3) over the edge domain
        rho = 2.0
        model = MPModel(rho)
        vals = []
        for n in (1e2, 1e3, 1e4):
            z = complex(model.e_plus + n ** (-2 / 3), n ** (-2 / 3 - 0.1))
            vals.append(abs(stieltjes_mp(z, rho) + 1 / (1 + np.sqrt(rho))) * n ** (1 / 3 - 0.05))
        assert max(vals) / min(vals) < 3


class TestClassicalLocations:
    def test_last_is_upper_edge(self):
        for rho in (1, 2, 5):
            assert classical_location(64, 64, rho) == pytest.approx(edges(rho)[1], abs=1e-10)

    def test_median_rho_one(self):
        g = classical_location(50, 100, 1.0)
        assert mp_cdf_oracle(g, 1.0) == pytest.approx(0.5, abs=1e-10)

    def test_monotone_and_inverts_cdf(self):
        g = classical_locations(64, 2.0)
        assert np.all(np.diff(g) >= 0)
        assert np.max(np.abs(mp_cdf(g, 2.0) - np.arange(1, 65) / 64)) <= 1e-10

    def test_index_range(self):
        with pytest.raises(DomainError):
            classical_location(0, 10, 2)


class TestControlAndDomains:
    def test_psi_lower_bound_and_scaling(self):
        z = 4 + 0.01j
        psi = control_psi(z, 1000, 1.0)
        m = quad_oracle(z, 1.0)
        assert psi == pytest.approx(np.sqrt(m.imag / 10) + 0.1, rel=1e-12)
        assert psi >= 1 / (1000 * 0.01)
        small = control_psi(z, 4000, 1.0) - np.sqrt(stieltjes_mp(z, 1.0).imag / 40)
        assert small == pytest.approx(0.1 / 4, rel=1e-12)

    def test_edge_example(self):
        n = 1000
        model = MPModel(2.0)
        assert in_domain(complex(model.e_plus, n**-0.8), n, 2.0).in_s_edge

    def test_eta_too_large(self):
        assert not in_domain(2 + 2j, 100, 2.0).in_s

    def test_closed_boundary(self):
        n, p = 1000, DomainParams()
        model = MPModel(2.0)
        e = model.e_plus + p.c2 * n ** (-2 / 3 + p.eps)
        assert in_domain(complex(e, n**-0.8), n, 2.0, p).in_s_edge

    def test_spectral_point(self):
        model = MPModel(4.0)
        sp = SpectralPoint.from_z(8.5 + 0.1j, model)
        assert sp.kappa == pytest.approx(0.5)
        with pytest.raises(DomainError):
            SpectralPoint(1.0, 0.0, 0.0)


class TestScaling:
    def test_bulk_and_outside_ratios_order_one(self):
        model = MPModel(1.0)
        rep = im_m_scaling_check(model, [2.0], [1e-3])
        assert 0.05 < rep.inside_range[0] <= rep.inside_range[1] < 20
        rep = im_m_scaling_check(model, [model.e_plus + 0.1], [1e-4])
        assert 0.05 < rep.outside_range[0] < 20

    def test_functions_coincide_at_edge(self):
        model = MPModel(2.0)
        rep = im_m_scaling_check(model, [model.e_plus], [1e-4])
        # at kappa = 0 both comparison functions equal sqrt(eta)
        assert np.isfinite(rep.inside_range[0])

    def test_ratio_bounded_over_grid(self):
        model = MPModel(2.0)
        e = np.concatenate([np.linspace(0.5, 5.7, 20), model.e_plus + np.geomspace(1e-4, 1, 10)])
        rep = im_m_scaling_check(model, e, np.geomspace(1e-5, 1, 10))
        lo, hi = rep.inside_range
        assert hi / lo < 20
        lo, hi = rep.outside_range
        assert hi / lo < 20
