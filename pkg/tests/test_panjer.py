"""Panjer recursion against the brute-force convolution oracle and anchors."""

import math

import numpy as np
import pytest

from aggdist import (AtIndex, AtQuantile, Binomial, GridTooShortError,
                     Lognormal, Gamma, GPD, Mode, NegBin, ParameterError, Poisson,
                     TailPolicy, UnderflowError, brute_force_convolution,
                     compound_via_fft, discretise, extended_panjer_recursion,
                     panjer_params, panjer_quantile, panjer_recursion,
                     panjer_recursion_abl, stabilised_compound, zero_modified,
                     zero_truncated)
from aggdist.panjer import Ab1Frequency, scaled_frequency

LN = Lognormal(0.0, 2.0)


class TestPanjerParams:
    def test_poisson_anchor(self):
        p = panjer_params(Poisson(100.0), 0.364455845)
        assert (p.a, p.b) == (0.0, 100.0)
        assert p.h0 == pytest.approx(2.50419e-28, rel=1e-5)

    def test_poisson_zero_f0(self):
        assert panjer_params(Poisson(3.0), 0.0).h0 == pytest.approx(math.exp(-3.0), rel=1e-15)

    def test_underflow_signal(self):
        with pytest.raises(UnderflowError):
            panjer_params(Poisson(800.0), 0.0)

    def test_negbin_start_is_pgf(self):
        nb = NegBin(2.5, 0.4)
        f0 = 0.3
        p = panjer_params(nb, f0)
        q = nb.p
        assert p.a == pytest.approx(1 - q, rel=1e-14)
        assert p.b == pytest.approx((1 - q) * (nb.r - 1), rel=1e-14)
        assert p.h0 == pytest.approx((1 + (1 - f0) * (1 - q) / q) ** -nb.r, rel=1e-13)

    def test_binomial_start_is_pgf(self):
        bn = Binomial(7, 0.35)
        p = panjer_params(bn, 0.2)
        assert p.a == pytest.approx(-0.35 / 0.65, rel=1e-14)
        assert p.b == pytest.approx(0.35 * 8 / 0.65, rel=1e-14)
        assert p.h0 == pytest.approx((1 + 0.35 * (0.2 - 1)) ** 7, rel=1e-14)

    def test_rejects_bad_f0(self):
        with pytest.raises(ParameterError):
            panjer_params(Poisson(1.0), 1.0)


class TestRecursionAnchors:
    def test_lattice_cdf_at_reference_quantile(self):
        disc = discretise(LN, 1.0, 8192, Mode.CENTRAL)
        grid = panjer_recursion(disc, panjer_params(Poisson(100.0), float(disc.probs[0])),
                                AtQuantile(0.999))
        assert (len(grid) - 1) * grid.step == 5849.0
        assert grid.cdf[-1] == pytest.approx(0.999000217, abs=1e-9)

    def test_degenerate_severity_recovers_frequency_law(self):
        # point mass at one lattice step: compound equals the count law
        probs = np.array([0.0, 1.0])
        disc = type(discretise(LN, 1.0, 4))(step=1.0, probs=probs,
                                            mode=Mode.CENTRAL, tail_policy=TailPolicy.IGNORE)
        freq = Poisson(3.0)
        grid = panjer_recursion(disc, panjer_params(freq, 0.0), AtIndex(30))
        want = [freq.pmf(n) for n in range(31)]
        np.testing.assert_allclose(grid.density, want, rtol=1e-12, atol=1e-300)

    def test_stop_at_index(self):
        disc = discretise(LN, 1.0, 64, Mode.CENTRAL)
        grid = panjer_recursion(disc, panjer_params(Poisson(2.0), float(disc.probs[0])),
                                AtIndex(40))
        assert len(grid) == 41

    def test_unreachable_level_fails_fast(self):
        disc = discretise(LN, 1.0, 4, Mode.CENTRAL)  # keeps far too little mass
        with pytest.raises(GridTooShortError):
            panjer_recursion(disc, panjer_params(Poisson(5.0), float(disc.probs[0])),
                             AtQuantile(0.999))


def _random_case(rng):
    freq = [Poisson(rng.uniform(0.5, 8.0)),
            Binomial(int(rng.integers(2, 15)), float(rng.uniform(0.1, 0.8))),
            NegBin(float(rng.uniform(0.7, 5.0)), float(rng.uniform(0.2, 0.8)))][rng.integers(0, 3)]
    sev = [Lognormal(float(rng.uniform(-0.5, 0.5)), float(rng.uniform(0.5, 2.0))),
           Gamma(float(rng.uniform(0.8, 3.0)), float(rng.uniform(0.5, 2.0))),
           GPD(float(rng.uniform(0.0, 1.0)), float(rng.uniform(0.5, 2.0)))][rng.integers(0, 3)]
    step = float(rng.choice([0.25, 0.5, 1.0]))
    return freq, sev, step


class TestOracleEquivalence:
    def test_twenty_random_cases(self):
        rng = np.random.default_rng(2024)
        for _ in range(20):
            freq, sev, step = _random_case(rng)
            disc = discretise(sev, step, 51, Mode.CENTRAL)
            grid = panjer_recursion(disc, panjer_params(freq, float(disc.probs[0])),
                                    AtIndex(50))
            oracle = brute_force_convolution(disc, freq, 50)
            np.testing.assert_allclose(grid.density, oracle.density, atol=1e-12)

    def test_oracle_zero_index_is_p0(self):
        disc = discretise(LN, 1.0, 8, Mode.BACKWARD)  # f0 = 0
        oracle = brute_force_convolution(disc, Poisson(2.0), 6)
        assert oracle.density[0] == pytest.approx(math.exp(-2.0), rel=1e-12)

    def test_oracle_with_positive_f0(self):
        # k-sum truncated at 1 - 1e-14 pmf mass; compare against recursion
        disc = discretise(Gamma(2.0, 1.0), 0.5, 41, Mode.CENTRAL)
        freq = NegBin(2.0, 0.5)
        oracle = brute_force_convolution(disc, freq, 40)
        grid = panjer_recursion(disc, panjer_params(freq, float(disc.probs[0])), AtIndex(40))
        np.testing.assert_allclose(oracle.density, grid.density, atol=1e-12)


class TestBoundOrdering:
    def test_forward_gives_upper_cdf(self):
        freq = Poisson(4.0)
        grids = {}
        for mode in Mode:
            disc = discretise(LN, 0.5, 201, mode)
            f0 = float(disc.probs[0])
            grids[mode] = panjer_recursion(disc, panjer_params(freq, f0), AtIndex(200))
        assert np.all(grids[Mode.BACKWARD].cdf <= grids[Mode.CENTRAL].cdf + 1e-14)
        assert np.all(grids[Mode.CENTRAL].cdf <= grids[Mode.FORWARD].cdf + 1e-14)


class TestMassConservation:
    def test_absorbing_lattice_full_run(self):
        disc = discretise(Gamma(2.0, 1.0), 0.25, 256, Mode.CENTRAL, TailPolicy.ABSORB_LAST)
        freq = Poisson(3.0)
        grid = panjer_recursion(disc, panjer_params(freq, float(disc.probs[0])),
                                AtIndex(255 * 8))
        assert grid.total_mass == pytest.approx(1.0, abs=1e-9)


class TestExtendedRecursion:
    def test_unmodified_zero_class_matches_base_bitwise(self):
        disc = discretise(LN, 1.0, 101, Mode.CENTRAL)
        freq = Poisson(2.0)
        base = panjer_recursion(disc, panjer_params(freq, float(disc.probs[0])), AtIndex(100))
        mod = zero_modified(freq, freq.pmf(0))
        ext = extended_panjer_recursion(disc, mod, AtIndex(100))
        np.testing.assert_array_equal(ext.density, base.density)

    def test_zero_truncated_degenerate_severity(self):
        probs = np.array([0.0, 1.0])
        disc = type(discretise(LN, 1.0, 4))(step=1.0, probs=probs,
                                            mode=Mode.CENTRAL, tail_policy=TailPolicy.IGNORE)
        lam = 2.5
        trunc = zero_truncated(Poisson(lam))
        grid = extended_panjer_recursion(disc, trunc, AtIndex(25))
        assert grid.density[0] == 0.0
        scale = 1.0 / (1.0 - math.exp(-lam))
        for n in range(1, 26):
            want = scale * Poisson(lam).pmf(n)
            assert grid.density[n] == pytest.approx(want, rel=1e-12)

    def test_zero_truncated_against_oracle(self):
        disc = discretise(LN, 1.0, 12, Mode.CENTRAL)
        trunc = zero_truncated(Poisson(2.0))
        grid = extended_panjer_recursion(disc, trunc, AtIndex(10))
        k_star = trunc.mass_truncation_index(1e-14)
        oracle = brute_force_convolution(disc, trunc.pmf_sequence(k_star), 10)
        np.testing.assert_allclose(grid.density, oracle.density, atol=1e-12)

    def test_zero_modified_against_oracle(self):
        disc = discretise(Gamma(2.0, 1.0), 0.5, 31, Mode.CENTRAL)
        mod = zero_modified(NegBin(1.5, 0.45), 0.55)
        grid = extended_panjer_recursion(disc, mod, AtIndex(30))
        oracle = brute_force_convolution(disc, mod.pmf_sequence(mod.mass_truncation_index(1e-14)), 30)
        np.testing.assert_allclose(grid.density, oracle.density, atol=1e-12)


class TestAblRecursion:
    def test_shifted_truncated_poisson_identity_severity(self):
        lam, level = 2.0, 3
        probs = np.array([0.0, 1.0])
        disc = type(discretise(LN, 1.0, 4))(step=1.0, probs=probs,
                                            mode=Mode.CENTRAL, tail_policy=TailPolicy.IGNORE)
        norm = 1.0 - sum(Poisson(lam).pmf(k) for k in range(level))
        p_l = Poisson(lam).pmf(level) / norm
        grid = panjer_recursion_abl(disc, a=0.0, b=lam, l=level, p_l=p_l, stop=AtIndex(20))
        for n in range(level):
            assert grid.density[n] == 0.0
        for n in range(level, 21):
            assert grid.density[n] == pytest.approx(Poisson(lam).pmf(n) / norm, rel=1e-12)

    def test_against_oracle(self):
        lam, level = 1.5, 2
        disc = discretise(LN, 1.0, 31, Mode.BACKWARD)  # f0 = 0
        norm = 1.0 - sum(Poisson(lam).pmf(k) for k in range(level))
        pmf = np.array([0.0] * level + [Poisson(lam).pmf(k) / norm for k in range(level, 60)])
        p_l = pmf[level]
        grid = panjer_recursion_abl(disc, a=0.0, b=lam, l=level, p_l=p_l, stop=AtIndex(30))
        oracle = brute_force_convolution(disc, pmf, 30)
        np.testing.assert_allclose(grid.density, oracle.density, atol=1e-12)

    def test_requires_zero_f0(self):
        disc = discretise(LN, 1.0, 8, Mode.CENTRAL)
        with pytest.raises(ParameterError):
            panjer_recursion_abl(disc, 0.0, 1.0, 2, 0.3, AtIndex(5))


class TestStabilisedCompound:
    def test_no_split_equals_plain_recursion(self):
        disc = discretise(Gamma(2.0, 1.0), 0.25, 512, Mode.CENTRAL)
        freq = Poisson(20.0)
        plain = panjer_recursion(disc, panjer_params(freq, float(disc.probs[0])),
                                 AtQuantile(0.999))
        stab = stabilised_compound(freq, disc, AtQuantile(0.999))
        np.testing.assert_array_equal(stab.density, plain.density)

    def test_split_matches_plain_when_both_feasible(self):
        # above the split threshold, but h0 = exp(-800 (1 - f0)) is still
        # representable because f0 > 0
        disc = discretise(LN, 1.0, 4096, Mode.CENTRAL)
        freq = Poisson(800.0)
        plain = panjer_recursion(disc, panjer_params(freq, float(disc.probs[0])),
                                 AtIndex(4095))
        stab = stabilised_compound(freq, disc, AtIndex(4095))
        np.testing.assert_allclose(stab.cdf, plain.cdf, atol=1e-11)

    def test_forced_split_count(self):
        _, splits = scaled_frequency(Poisson(800.0))
        assert splits == 2
        _, splits = scaled_frequency(Poisson(3000.0))
        assert splits == 8  # 3000/4 = 750 still above the guard

    def test_binomial_split_matches_plain(self):
        disc = discretise(Gamma(2.0, 1.0), 0.5, 128, Mode.CENTRAL)
        freq = Binomial(50, 0.3)
        plain = panjer_recursion(disc, panjer_params(freq, float(disc.probs[0])),
                                 AtIndex(2047))
        from aggdist.panjer import _stabilised_binomial
        import aggdist.panjer as pj
        old = pj.UNDERFLOW_GUARD_PARAM
        pj.UNDERFLOW_GUARD_PARAM = 4.0  # force a split of the 50 trials
        try:
            stab = _stabilised_binomial(freq, disc, AtIndex(2047))
        finally:
            pj.UNDERFLOW_GUARD_PARAM = old
        assert stab.settings["splits"] > 1
        np.testing.assert_allclose(stab.cdf, plain.cdf, atol=1e-11)

    def test_large_rate_matches_fft_engine(self):
        # h0 = exp(-800 (1 - f0)) underflows only for f0 = 0; the split path
        # must agree with the independent fft engine on the cdf
        step = 1.0
        m = 2 ** 15
        disc = discretise(LN, step, m, Mode.CENTRAL)
        freq = Poisson(800.0)
        stab = stabilised_compound(freq, disc, AtQuantile(0.999))
        fft_grid = compound_via_fft(disc, freq, m, theta=20.0 / m)
        n = len(stab)
        np.testing.assert_allclose(stab.cdf, fft_grid.cdf[:n], atol=1e-9)


class TestQuantileHelper:
    def test_reference_value(self):
        q, _ = panjer_quantile(Poisson(100.0), LN, 1.0, 0.999)
        assert q == 5849.0
