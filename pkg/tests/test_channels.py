"""Distribution tests for direct, RIS-only and composite links.

Monte Carlo oracles here use moderate trial counts for speed; the full
1e6-trial comparisons at the stated tolerances run in test_acceptance.py.
"""

import math

import numpy as np
import pytest
from scipy import integrate, stats

from risnoma.channels import (
    LaguerreFit,
    LinkBudget,
    NakagamiParams,
    RisLinkParams,
    composite_snr_cdf_closed,
    composite_snr_cdf_quadrature,
    direct_snr_cdf,
    direct_snr_pdf,
    double_nakagami_moment,
    double_nakagami_pdf,
    fit_laguerre,
    resolve_links,
    ris_snr_cdf,
    ris_snr_cdf_q_approx,
)
from risnoma.environment import EnvironmentParams, ScenarioConfig, generate_scenario
from risnoma.sim_oracle import batch_rng, sample_nakagami, sample_ris_sum
from risnoma.special_math import q_function

M1 = NakagamiParams(m=1.0)
M2 = NakagamiParams(m=2.0)

# frozen arbitrary-precision oracle values (m=Omega=1 hops)
PROD_MEAN_RAYLEIGH = math.pi / 4.0
FIT_A_RAYLEIGH = 1.6099457599185225
FIT_B_RAYLEIGH = 0.4878413813377144
# m=2 hops
PROD_MEAN_M2 = 0.8835729338221293
PROD_VAR_M2 = 0.2192988706169550


def _ris(n, m=1.0, omega=1.0, amp=1.0):
    p = NakagamiParams(m=m, omega=omega)
    return RisLinkParams(hop_g2r=p, hop_r2a=p, n_elements=n, amp_g2r=amp, amp_r2a=amp)


def _table_i_link(seed=7, m_direct=1.5, m_hops=2.0, tx_power_dbm=37.0):
    env = EnvironmentParams()
    scen = generate_scenario(ScenarioConfig(tx_power_dbm=tx_power_dbm), seed)
    links = resolve_links(env, scen, m_direct=m_direct, m_hops=m_hops)
    return links[0]


class TestDoubleNakagamiPdf:
    def test_normalization(self):
        val, _ = integrate.quad(lambda x: double_nakagami_pdf(M2, M2, x), 0, 20)
        assert val == pytest.approx(1.0, abs=1e-8)

    def test_rayleigh_product_vs_mc(self):
        # bin probability around x=1 vs the analytic density, 1e6 draws
        rng = batch_rng(101, 0)
        draws = sample_nakagami(M1, rng, 1_000_000) * sample_nakagami(M1, rng, 1_000_000)
        lo, hi = 0.95, 1.05
        empirical = np.mean((draws >= lo) & (draws < hi))
        analytic, _ = integrate.quad(lambda x: double_nakagami_pdf(M1, M1, x), lo, hi)
        assert empirical == pytest.approx(analytic, rel=0.02)

    def test_vanishes_at_origin(self):
        assert double_nakagami_pdf(M2, M2, 1e-6) < 1e-12

    def test_domain(self):
        with pytest.raises(ValueError):
            double_nakagami_pdf(M1, M1, 0.0)


class TestDoubleNakagamiMoment:
    def test_unit_second_moment(self):
        assert double_nakagami_moment(M1, M1, 2) == pytest.approx(1.0, rel=1e-12)

    def test_rayleigh_mean(self):
        assert double_nakagami_moment(M1, M1, 1) == pytest.approx(PROD_MEAN_RAYLEIGH, rel=1e-12)

    def test_mixed_params_vs_mc(self):
        p1 = NakagamiParams(m=2.0, omega=1.0)
        p2 = NakagamiParams(m=3.0, omega=2.0)
        rng = batch_rng(102, 0)
        draws = sample_nakagami(p1, rng, 1_000_000) * sample_nakagami(p2, rng, 1_000_000)
        assert float(np.mean(draws)) == pytest.approx(
            double_nakagami_moment(p1, p2, 1), rel=0.005
        )

    def test_quadrature_consistency(self):
        for n in (1, 2, 3):
            ref, _ = integrate.quad(lambda x: x**n * double_nakagami_pdf(M2, M2, x), 0, 30)
            assert double_nakagami_moment(M2, M2, n) == pytest.approx(ref, rel=1e-7)

    def test_domain(self):
        with pytest.raises(ValueError):
            double_nakagami_moment(M1, M1, 0)


class TestFitLaguerre:
    def test_rayleigh_single_element_oracle(self):
        fit = fit_laguerre(_ris(1))
        assert fit.a == pytest.approx(FIT_A_RAYLEIGH, rel=1e-9)
        assert fit.b == pytest.approx(FIT_B_RAYLEIGH, rel=1e-9)
        assert fit.mean_sum == pytest.approx(PROD_MEAN_RAYLEIGH, rel=1e-12)

    def test_linearity_in_n(self):
        f1, f4 = fit_laguerre(_ris(1)), fit_laguerre(_ris(4))
        assert f4.a == pytest.approx(4 * f1.a, rel=1e-12)
        assert f4.b == pytest.approx(f1.b, rel=1e-12)
        assert f4.mean_sum == pytest.approx(4 * f1.mean_sum, rel=1e-12)

    def test_m2_frozen_moments(self):
        fit = fit_laguerre(_ris(1, m=2.0))
        assert fit.mean_sum == pytest.approx(PROD_MEAN_M2, rel=1e-12)
        assert fit.var_sum == pytest.approx(PROD_VAR_M2, rel=1e-12)

    def test_gamma_fit_ks_distance(self):
        ris = _ris(64, m=2.0)
        fit = fit_laguerre(ris)
        draws = sample_ris_sum(ris, batch_rng(103, 0), 100_000)
        ks, _ = stats.kstest(draws, "gamma", args=(fit.a, 0.0, fit.b))
        assert ks <= 0.02

    def test_inconsistent_fit_rejected(self):
        with pytest.raises(ValueError):
            LaguerreFit(a=1.0, b=1.0, mean_sum=2.0, var_sum=1.0)


class TestRisSnrCdf:
    def test_boundaries(self):
        fit = fit_laguerre(_ris(16, m=2.0))
        assert ris_snr_cdf(fit, 10.0, 0.0) == 0.0
        assert ris_snr_cdf(fit, 10.0, 1e9) == pytest.approx(1.0, abs=1e-12)

    def test_monotone(self):
        fit = fit_laguerre(_ris(16, m=2.0))
        grid = np.linspace(0.0, 5000.0, 200)
        vals = ris_snr_cdf(fit, 10.0, grid)
        assert np.all(np.diff(vals) >= 0)

    def test_vs_mc(self):
        ris = _ris(16, m=2.0)
        fit = fit_laguerre(ris)
        gbar = 3.0
        peak = gbar * fit.mean_sum**2
        grid = np.linspace(peak * 1e-2, peak * 3, 60)
        rng = batch_rng(104, 0)
        snr = gbar * sample_ris_sum(ris, rng, 200_000) ** 2
        emp = np.searchsorted(np.sort(snr), grid, side="right") / snr.size
        assert np.max(np.abs(ris_snr_cdf(fit, gbar, grid) - emp)) <= 0.015

    def test_domain(self):
        fit = fit_laguerre(_ris(4))
        with pytest.raises(ValueError):
            ris_snr_cdf(fit, 0.0, 1.0)


class TestRisSnrCdfQApprox:
    def test_zero_gamma(self):
        fit = fit_laguerre(_ris(64, m=2.0))
        assert ris_snr_cdf_q_approx(fit, 5.0, 0.0) == pytest.approx(0.0, abs=1e-12)

    def test_value_at_mean(self):
        # sqrt(gamma/gamma_bar_r) = E[sum] puts the normal argument at zero;
        # with the truncated-normal normalizer the value is 1 - 0.5/Q(-sqrt(a))
        fit = fit_laguerre(_ris(64, m=2.0))
        gbar = 5.0
        gamma = gbar * fit.mean_sum**2
        expected = 1.0 - 0.5 / q_function(-math.sqrt(fit.a))
        assert ris_snr_cdf_q_approx(fit, gbar, gamma) == pytest.approx(expected, rel=1e-10)

    def test_tracks_exact_cdf(self):
        fit = fit_laguerre(_ris(64, m=2.0))
        gbar = 5.0
        peak = gbar * fit.mean_sum**2
        grid = np.linspace(peak * 0.2, peak * 3, 200)
        gap = np.abs(ris_snr_cdf_q_approx(fit, gbar, grid) - ris_snr_cdf(fit, gbar, grid))
        assert np.max(gap) <= 0.02

    def test_range(self):
        fit = fit_laguerre(_ris(8))
        grid = np.linspace(0.0, 100.0, 50)
        vals = ris_snr_cdf_q_approx(fit, 1.0, grid)
        assert np.all((vals >= 0.0) & (vals <= 1.0))


class TestDirectSnrCdf:
    def test_rayleigh_identity(self):
        p = NakagamiParams(m=1.0, omega=1.0)
        for gbar in (0.5, 10.0, 400.0):
            for g in (0.1, 1.0, 7.0):
                assert direct_snr_cdf(p, gbar, g * gbar) == pytest.approx(
                    1.0 - math.exp(-g), rel=1e-12
                )

    def test_vs_mc(self):
        p = NakagamiParams(m=2.5, omega=1.0)
        gbar = 10.0
        rng = batch_rng(105, 0)
        snr = gbar * sample_nakagami(p, rng, 400_000) ** 2
        grid = np.linspace(0.5, 50.0, 60)
        emp = np.searchsorted(np.sort(snr), grid, side="right") / snr.size
        assert np.max(np.abs(direct_snr_cdf(p, gbar, grid) - emp)) <= 0.005

    def test_pdf_normalization(self):
        p = NakagamiParams(m=2.5, omega=1.0)
        val, _ = integrate.quad(lambda g: direct_snr_pdf(p, 10.0, g), 0, np.inf)
        assert val == pytest.approx(1.0, abs=1e-8)

    def test_pdf_matches_cdf_derivative(self):
        p = NakagamiParams(m=3.0, omega=1.0)
        h = 1e-5
        for g in (2.0, 8.0, 15.0):
            num = (direct_snr_cdf(p, 10.0, g + h) - direct_snr_cdf(p, 10.0, g - h)) / (2 * h)
            assert num == pytest.approx(direct_snr_pdf(p, 10.0, g), abs=1e-6)

    def test_pdf_mode(self):
        # gamma-distribution mode (m-1)/m * Omega * gamma_bar vs sampled argmax
        p = NakagamiParams(m=3.0, omega=1.0)
        gbar = 10.0
        snr = gbar * sample_nakagami(p, batch_rng(106, 0), 500_000) ** 2
        hist, edges = np.histogram(snr, bins=120, range=(0, 40))
        sampled_mode = 0.5 * (edges[np.argmax(hist)] + edges[np.argmax(hist) + 1])
        assert sampled_mode == pytest.approx((p.m - 1) / p.m * gbar, abs=1.0)

    def test_domain(self):
        with pytest.raises(ValueError):
            direct_snr_cdf(M1, -1.0, 1.0)


class TestCompositeQuadrature:
    def test_zero_gamma(self):
        link = _table_i_link()
        assert composite_snr_cdf_quadrature(link.laguerre(16), link.direct_fading,
                                            link.budget(), 0.0) == 0.0

    def test_no_ris_degenerates_to_direct(self):
        link = _table_i_link()
        for g in (1.0, 50.0, 900.0):
            assert composite_snr_cdf_quadrature(None, link.direct_fading, link.budget(), g) == (
                pytest.approx(direct_snr_cdf(link.direct_fading, link.gamma_bar_d, g), abs=1e-6)
            )

    def test_vs_mc(self):
        link = _table_i_link()
        n = 32
        fit = link.laguerre(n)
        b = link.budget()
        amp_mean = b.amp_ris * fit.mean_sum + b.amp_direct
        grid = np.linspace(0.05, 3.0, 25) * b.gamma_bar_c * amp_mean**2
        rng = batch_rng(107, 0)
        amp = (b.amp_ris * sample_ris_sum(link.ris_params(n), rng, 200_000)
               + b.amp_direct * sample_nakagami(link.direct_fading, rng, 200_000))
        snr = b.gamma_bar_c * amp**2
        emp = np.searchsorted(np.sort(snr), grid, side="right") / snr.size
        quad_vals = [composite_snr_cdf_quadrature(fit, link.direct_fading, b, g) for g in grid]
        assert np.max(np.abs(np.array(quad_vals) - emp)) <= 0.01


class TestCompositeClosed:
    def test_zero_gamma(self):
        link = _table_i_link()
        assert composite_snr_cdf_closed(link.laguerre(16), link.rounded_direct(),
                                        link.budget(), 0.0) == 0.0

    def test_matches_quadrature(self):
        link = _table_i_link()  # m_direct pinned to 1.5 so rounding is a no-op
        b = link.budget()
        for n in (8, 64):
            fit = link.laguerre(n)
            amp_mean = b.amp_ris * fit.mean_sum + b.amp_direct
            # grid straddles the branch point gamma = gamma_bar_r * mean_sum^2
            branch = link.gamma_bar_r * fit.mean_sum**2
            grid = np.concatenate([
                np.linspace(0.1, 2.0, 8) * branch,
                np.linspace(0.05, 3.5, 30) * b.gamma_bar_c * amp_mean**2,
            ])
            for g in grid:
                ref = composite_snr_cdf_quadrature(fit, link.direct_fading, b, g)
                assert composite_snr_cdf_closed(fit, link.direct_fading, b, g) == (
                    pytest.approx(ref, abs=1e-3)
                )

    def test_monotone(self):
        link = _table_i_link()
        fit = link.laguerre(64)
        b = link.budget()
        amp_mean = b.amp_ris * fit.mean_sum + b.amp_direct
        grid = np.linspace(1e-4, 4.0, 200) * b.gamma_bar_c * amp_mean**2
        vals = [composite_snr_cdf_closed(fit, link.direct_fading, b, g) for g in grid]
        assert all(x <= y + 1e-12 for x, y in zip(vals, vals[1:]))

    def test_half_integer_shape_required(self):
        link = _table_i_link(m_direct=1.37)
        with pytest.raises(ValueError):
            composite_snr_cdf_closed(link.laguerre(8), link.direct_fading, link.budget(), 1.0)

    def test_no_ris_degenerates_to_direct(self):
        link = _table_i_link()
        g = 100.0
        assert composite_snr_cdf_closed(None, link.direct_fading, link.budget(), g) == (
            pytest.approx(direct_snr_cdf(link.direct_fading, link.gamma_bar_d, g), rel=1e-12)
        )

    def test_unclamped_diagnostic(self):
        link = _table_i_link()
        fit = link.laguerre(16)
        raw = composite_snr_cdf_closed(fit, link.direct_fading, link.budget(), 1e-9, clamp=False)
        assert isinstance(raw, float)  # may stray outside [0,1]; clamped path may not
        clamped = composite_snr_cdf_closed(fit, link.direct_fading, link.budget(), 1e-9)
        assert 0.0 <= clamped <= 1.0


class TestLinkResolution:
    def test_rounded_direct(self):
        link = _table_i_link(m_direct=1.37)
        assert link.rounded_direct().m == 1.5
        link = _table_i_link(m_direct=2.2)
        assert link.rounded_direct().m == 2.0

    def test_budget_consistency(self):
        link = _table_i_link()
        b = link.budget()
        assert b.gamma_bar_d == pytest.approx(b.gamma_bar_c * b.amp_direct**2, rel=1e-12)
        assert b.amp_ris == pytest.approx(link.amp_ris, rel=1e-12)

    def test_shape_defaults_from_los(self):
        env = EnvironmentParams()
        scen = generate_scenario(ScenarioConfig(), 7)
        links = resolve_links(env, scen)
        for link in links:
            assert link.direct_fading.m >= 4.0 / 3.0 - 1e-9
