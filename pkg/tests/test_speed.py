"""Variational spreading speed, decay rates, and wave-constant calibration."""

import dataclasses

import numpy as np
import pytest

from pulsefront import habitat, speed, spectral
from pulsefront.errors import ConvergenceError, HypothesisError, InvariantError

from conftest import build_medium, build_params


def fine_scan_speed(kernel, a_const=1.0, n_points=10_000, lo=1e-2, hi=20.0):
    """Independent oracle: direct minimization of the quadrature quotient."""
    mu = np.geomspace(lo, hi, n_points)
    khat = np.exp(-np.outer(mu, kernel.s)) @ kernel.weights
    quotient = (khat - 1.0 + a_const) / mu
    k = int(np.argmin(quotient))
    return float(quotient[k]), float(mu[k])


class TestSpreadingSpeed:
    def test_homogeneous_against_fine_scan(self):
        cell, ker, nl = build_medium()
        res = speed.spreading_speed(1, nl.a0, ker, cell)
        c_scan, mu_scan = fine_scan_speed(ker)
        assert abs(res.c_star - c_scan) <= 1e-6 * c_scan
        assert res.bracket[0] < res.mu_star < res.bracket[2]

    def test_direction_symmetry(self):
        cell, ker, nl = build_medium(a0=(1.0, 0.4))
        cp = speed.spreading_speed(1, nl.a0, ker, cell)
        cm = speed.spreading_speed(-1, nl.a0, ker, cell)
        assert abs(cp.c_star - cm.c_star) <= 1e-10

    def test_monotone_in_a0(self):
        cell, ker, nl = build_medium(a0=(1.0, 0.4))
        res = speed.spreading_speed(1, nl.a0, ker, cell)
        lifted = habitat.sample_field(cell, (1.5, 0.4))
        res_up = speed.spreading_speed(1, lifted, ker, cell)
        assert res_up.c_star > res.c_star

    def test_boundary_minimum_rejected(self):
        cell, ker, nl = build_medium()
        with pytest.raises(ConvergenceError, match="widen"):
            speed.spreading_speed(1, nl.a0, ker, cell, search=(5.0, 20.0))

    def test_h2_failure(self):
        cell, ker, nl = build_medium(a0=(-1.0, 0.1))
        with pytest.raises(HypothesisError, match="H2"):
            speed.spreading_speed(1, nl.a0, ker, cell)


class TestDecayRate:
    def test_round_trip_identity(self):
        cell, ker, nl = build_medium(a0=(1.0, 0.4))
        res = speed.spreading_speed(1, nl.a0, ker, cell)
        mu_bar = 0.8 * res.mu_star
        lam = spectral.principal_eigenpair(
            spectral.assemble(1, mu_bar, nl.a0, ker, cell)).lam
        mu_back = speed.decay_rate_for_speed(lam / mu_bar, res, nl.a0, ker, cell)
        assert abs(mu_back - mu_bar) <= 1e-8

    def test_supercritical_residual(self):
        cell, ker, nl = build_medium()
        res = speed.spreading_speed(1, nl.a0, ker, cell)
        c = 1.2 * res.c_star
        mu = speed.decay_rate_for_speed(c, res, nl.a0, ker, cell)
        assert 0 < mu < res.mu_star
        lam = spectral.principal_eigenpair(
            spectral.assemble(1, mu, nl.a0, ker, cell)).lam
        assert abs(lam / mu - c) <= 1e-10 * c

    def test_subcritical_rejected(self):
        cell, ker, nl = build_medium()
        res = speed.spreading_speed(1, nl.a0, ker, cell)
        with pytest.raises(ConvergenceError, match="no subcritical decay rate"):
            speed.decay_rate_for_speed(0.9 * res.c_star, res, nl.a0, ker, cell)


class TestWaveParams:
    def test_homogeneous_closed_forms(self):
        par = build_params()
        assert np.max(np.abs(par.phi.values - 1.0)) <= 1e-9
        assert np.max(np.abs(par.phi1.values - 1.0)) <= 1e-9
        assert np.max(np.abs(par.phi0.values - 1.0)) <= 1e-9
        assert par.L == 1.0
        gap1 = par.mu1 * par.c - par.lam_mu1
        assert par.d0 == pytest.approx(max(1.0, 1.0 / gap1), rel=1e-9)
        assert par.b_max == pytest.approx(1.0, abs=1e-9)
        assert par.lam0 == pytest.approx(1.0, abs=1e-10)

    def test_mu_ordering(self):
        for par in (build_params(), build_params(a0=(1.0, 0.4))):
            assert 0 < par.mu < par.mu1 < min(2.0 * par.mu, par.mu_star)
            assert par.mu1 * par.c - par.lam_mu1 > 0
            assert par.d1 >= par.d0 > 0
            assert 0 < par.b <= par.b_max

    def test_band_condition_by_reevaluation(self):
        par = build_params()
        # conservative envelope stays >= b on [M - 2 delta0, M] and the
        # window cannot be pushed one grid step further right
        h = par.cell.h
        r = np.arange(round((par.M - 2 * par.kernel.delta0) / h),
                      round(par.M / h) + 1) * h
        g = (np.exp(-par.mu * r) * par.phi.min
             - par.d1 * np.exp(-par.mu1 * r) * par.phi1.max)
        assert np.all(g >= par.b)
        r_next = par.M + h
        g_next = (np.exp(-par.mu * r_next) * par.phi.min
                  - par.d1 * np.exp(-par.mu1 * r_next) * par.phi1.max)
        assert g_next < par.b

    def test_periodic_medium_invariants(self):
        par = build_params(a0=(1.0, 0.4))
        assert par.phi1.min > 0
        assert np.isfinite(par.d0) and par.d0 > 0
        assert np.all(par.b * par.phi0.values <= par.u_plus.values)
        assert par.u_plus.min > 0

    def test_explicit_b_too_large(self):
        cell, ker, nl = build_medium()
        res = speed.spreading_speed(1, nl.a0, ker, cell)
        with pytest.raises(InvariantError, match="b too large"):
            speed.build_wave_params(1.2 * res.c_star, 1, nl, ker, cell,
                                    speed_result=res, b_explicit=0.5)

    def test_bad_factors_rejected(self):
        cell, ker, nl = build_medium()
        res = speed.spreading_speed(1, nl.a0, ker, cell)
        c = 1.2 * res.c_star
        with pytest.raises(ValueError):
            speed.build_wave_params(c, 1, nl, ker, cell, d1_factor=0.5,
                                    speed_result=res)
        with pytest.raises(ValueError):
            speed.build_wave_params(c, 1, nl, ker, cell, b_factor=1.5,
                                    speed_result=res)
        with pytest.raises(ValueError):
            speed.build_wave_params(c, 1, nl, ker, cell, d2=-1.0,
                                    speed_result=res)
