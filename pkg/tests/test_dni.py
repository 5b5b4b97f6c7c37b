"""Characteristic-function machinery: forward integrals, quadrature,
inverse integration, quantile search, expected shortfall."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from aggdist import (AtQuantile, Binomial, DniSettings, ForwardCfEvaluator,
                     Gamma, Lognormal, Mode, NegBin, ParameterError, Poisson,
                     compound_cf, discretise, dni_cdf, dni_quantile, es_from_grid,
                     es_via_cf, gauss7, panjer_params, panjer_recursion, sev_cf,
                     var_from_grid)
from aggdist.dni import dni_cdf_cycles
from aggdist.errors import EsUndefinedError

LN = Lognormal(0.0, 2.0)


def gamma_cf_exact(t, alpha, beta):
    return (1.0 - 1j * beta * t) ** -alpha


class TestGauss7:
    def test_oscillatory_reference(self):
        got = gauss7(lambda x: math.sin(3 * x), 0.0, math.pi)
        assert abs(got - 2.0 / 3.0) / (2.0 / 3.0) < 1e-5

    def test_degree_thirteen_exactness(self):
        got = gauss7(lambda x: x ** 13 + 2 * x ** 8, -1.0, 1.0)
        assert got == pytest.approx(4.0 / 9.0, abs=1e-14)

    def test_weights_sum_to_interval(self):
        assert gauss7(lambda x: 1.0, 2.0, 7.5) == pytest.approx(5.5, rel=1e-15)

    def test_rejects_empty_interval(self):
        with pytest.raises(ParameterError):
            gauss7(lambda x: x, 1.0, 1.0)


class TestSeverityCf:
    @pytest.mark.parametrize("sev", [LN, Gamma(2.0, 1.0)])
    def test_normalisation_at_zero(self, sev):
        assert sev_cf(sev, 0.0) == 1.0 + 0.0j

    @pytest.mark.parametrize("t", [1e-4, 0.01, 0.3, 2.0, 25.0])
    def test_gamma_closed_form(self, t):
        got = sev_cf(Gamma(2.0, 1.0), t)
        assert abs(got - gamma_cf_exact(t, 2.0, 1.0)) < 1e-12

    def test_gamma_closed_form_fourier_route(self):
        # oscillation count beyond the panel budget switches integrators
        ev = ForwardCfEvaluator(Gamma(2.0, 1.0), tol=1e-12)
        t = 3000.0
        got = ev(t)
        assert t * ev._truncation(t) / math.pi > 16384  # confirms the route
        assert abs(got - gamma_cf_exact(t, 2.0, 1.0)) < 1e-11

    def test_conjugate_symmetry(self):
        ev = ForwardCfEvaluator(LN)
        assert ev(-0.5) == np.conj(ev(0.5))

    def test_modulus_decay(self):
        ev = ForwardCfEvaluator(LN)
        assert abs(ev(100.0)) < abs(ev(1.0))

    def test_vectorised_matches_scalar(self):
        ev = ForwardCfEvaluator(LN)
        ts = np.array([0.05, 0.2, 1.1])
        vec = ev(ts)
        for t, v in zip(ts, vec):
            assert ForwardCfEvaluator(LN)(float(t)) == pytest.approx(v, abs=1e-13)

    def test_lognormal_against_fourier_quadrature(self):
        # t small enough that the panel integrator runs; the oracle is the
        # independent QUADPACK Fourier-weight algorithm
        t = 0.25
        ev = ForwardCfEvaluator(LN, tol=1e-13)
        assert t * ev._truncation(t) / math.pi <= 16384  # panel route active
        got = ev(t)
        want_re = quad(LN._pdf_scalar, 0.0, np.inf, weight="cos", wvar=t,
                       epsabs=1e-13, limlst=200, limit=400)[0]
        want_im = quad(LN._pdf_scalar, 0.0, np.inf, weight="sin", wvar=t,
                       epsabs=1e-13, limlst=200, limit=400)[0]
        assert got.real == pytest.approx(want_re, abs=1e-11)
        assert got.imag == pytest.approx(want_im, abs=1e-11)

    def test_cache_reuse(self):
        ev = ForwardCfEvaluator(LN)
        first = ev(0.7)
        assert ev(0.7) == first
        assert 0.7 in ev._cache


class TestCompoundCf:
    def test_unit_at_zero(self):
        for freq in (Poisson(3.0), NegBin(2.0, 0.5), Binomial(5, 0.3)):
            assert compound_cf(freq, Gamma(2.0, 1.0), 0.0) == 1.0 + 0.0j

    def test_poisson_large_t_limit(self):
        # the severity CF decays only slowly for a heavy-tailed lognormal,
        # so the compound limit Pr[N=0] is approached with O(lam |phi|) slack
        lam = 4.0
        t = 400.0
        val = compound_cf(Poisson(lam), LN, t)
        slack = 1.5 * lam * abs(sev_cf(LN, t)) * math.exp(-lam)
        assert abs(val.real - math.exp(-lam)) < slack
        assert abs(val.real - math.exp(-lam)) < 2e-3

    def test_negbin_large_t_limit(self):
        nb = NegBin(2.0, 0.55)
        val = compound_cf(nb, LN, 400.0)
        assert val.real == pytest.approx(0.55 ** 2.0, abs=5e-3)

    def test_poisson_gamma_closed_form(self):
        lam = 2.0
        for t in (0.1, 1.0, 7.0):
            want = np.exp(lam * (gamma_cf_exact(t, 1.0, 1.0) - 1.0))
            got = compound_cf(Poisson(lam), Gamma(1.0, 1.0), t)
            assert abs(got - want) < 1e-12

    def test_bounded_modulus(self):
        rng = np.random.default_rng(9)
        ev = ForwardCfEvaluator(LN)
        for freq in (Poisson(100.0), NegBin(2.0, 0.5), Binomial(20, 0.4)):
            for t in rng.uniform(0.0, 5.0, size=15):
                assert abs(compound_cf(freq, LN, float(t), evaluator=ev)) <= 1.0 + 1e-12


class TestInverseIntegration:
    def test_reference_cdf_small_truncation(self):
        s = DniSettings(cycles=2, n0=1)
        got = dni_cdf(Poisson(100.0), LN, 5853.1, s)
        assert got == pytest.approx(0.9999174, abs=5e-7)

    def test_reference_cdf_no_tail(self):
        s = DniSettings(cycles=10, n0=1, tail_correction=False)
        got = dni_cdf(Poisson(100.0), LN, 5853.1, s)
        assert got == pytest.approx(0.9980471, abs=5e-7)

    def test_tail_correction_dominates(self):
        target = 0.999
        ev = ForwardCfEvaluator(LN, 1e-12)
        sums, g_point = dni_cdf_cycles(Poisson(100.0), LN, 5853.1,
                                       DniSettings(cycles=20, n0=1), ev)
        for K in (2, 3, 4, 5, 10, 20):
            bare = float(sums[:2 * K].sum())
            tail = bare + g_point(2 * K * math.pi)
            assert abs(tail - target) < abs(bare - target)

    def test_monotone_in_z(self):
        freq, sev = Poisson(2.0), Gamma(2.0, 1.0)
        ev = ForwardCfEvaluator(sev, 1e-12)
        s = DniSettings(cycles=15, n0=1)
        zs = np.linspace(0.5, 25.0, 50)
        vals = [dni_cdf(freq, sev, float(z), s, ev) for z in zs]
        assert all(b >= a - 1e-7 for a, b in zip(vals[:-1], vals[1:]))

    def test_agrees_with_recursion(self):
        freq = Poisson(100.0)
        step = 0.0625
        disc = discretise(LN, step, 1 << 17, Mode.CENTRAL)
        grid = panjer_recursion(disc, panjer_params(freq, float(disc.probs[0])),
                                AtQuantile(0.999))
        median = var_from_grid(grid, 0.5)
        top = (len(grid) - 1) * step
        ev = ForwardCfEvaluator(LN, 1e-12)
        s = DniSettings(cycles=15, n0=1)
        for z in np.linspace(median, top, 10):
            idx = int(round(z / step))
            z_lat = idx * step
            want = float(grid.cdf[idx])
            got = dni_cdf(freq, LN, z_lat + step / 2, s, ev)
            assert got == pytest.approx(want, abs=5e-5)

    def test_rejects_negative_support(self):
        from aggdist import Normal
        with pytest.raises(ParameterError):
            dni_cdf(Poisson(2.0), Normal(0.0, 1.0), 1.0)


class TestQuantileSearch:
    def test_matches_recursion_grid(self):
        freq, sev = Poisson(2.0), Gamma(2.0, 1.0)
        step = 2.0 ** -10
        disc = discretise(sev, step, 1 << 15, Mode.CENTRAL)
        grid = panjer_recursion(disc, panjer_params(freq, float(disc.probs[0])),
                                AtQuantile(0.99))
        want = (len(grid) - 1) * step
        got = dni_quantile(freq, sev, 0.99,
                           DniSettings(cycles=20, n0=2, quantile_cdf_tol=None,
                                       quantile_rel_tol=1e-6))
        assert got == pytest.approx(want, abs=2 * step)

    def test_atom_at_zero(self):
        freq = Poisson(0.05)  # Pr[N=0] ~ 0.951
        with pytest.warns(UserWarning, match="atom at zero"):
            got = dni_quantile(freq, Gamma(2.0, 1.0), 0.9, DniSettings(cycles=10))
        assert got == 0.0


class TestExpectedShortfall:
    def test_near_degenerate_compound(self):
        # one loss from a severity this tight is effectively a constant
        freq = Binomial(1, 1.0 - 1e-12)
        sev = Gamma(1e6, 5e-6)  # mean 5, sd 0.005
        q = 4.99
        h_q = float(sev.cdf(q)) * (1.0 - 1e-12)
        got = es_via_cf(freq, sev, q, h_q, DniSettings(cycles=320, n0=2))
        assert got == pytest.approx(5.0, rel=1e-4)

    def test_matches_grid_tail_mean(self):
        freq, sev = Poisson(2.0), Gamma(2.0, 1.0)
        step = 2.0 ** -10
        disc = discretise(sev, step, 1 << 15, Mode.CENTRAL)
        grid = panjer_recursion(disc, panjer_params(freq, float(disc.probs[0])),
                                AtQuantile(1.0 - 1e-9))
        alpha = 0.99
        q = var_from_grid(grid, alpha)
        want = es_from_grid(grid, alpha)
        h_q = float(grid.cdf[int(round(q / step)) - 1])  # Pr[Z < q]
        got = es_via_cf(freq, sev, q, h_q, DniSettings(cycles=60, n0=2))
        assert got == pytest.approx(want, rel=1e-4)

    def test_level_substitution_is_negligible(self):
        freq, sev = Poisson(2.0), Gamma(2.0, 1.0)
        alpha = 0.99
        s = DniSettings(cycles=40, n0=2, quantile_cdf_tol=None, quantile_rel_tol=1e-13)
        ev = ForwardCfEvaluator(sev, 1e-13)
        q = dni_quantile(freq, sev, alpha, s, ev)
        h_q = dni_cdf(freq, sev, q, s, ev)
        assert h_q == pytest.approx(alpha, abs=1e-9)
        es_exact = es_via_cf(freq, sev, q, h_q, s, ev)
        es_alpha = es_via_cf(freq, sev, q, alpha, s, ev)
        assert es_alpha == pytest.approx(es_exact, rel=1e-9)

    def test_infinite_mean_rejected(self):
        from aggdist import GPD
        with pytest.raises(EsUndefinedError):
            es_via_cf(Poisson(2.0), GPD(1.0, 1.0), 10.0, 0.9)
