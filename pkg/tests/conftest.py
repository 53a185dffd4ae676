"""Shared fixtures: media and (expensive, session-scoped) extracted waves."""

from __future__ import annotations

import time

import pytest

from pulsefront import habitat, speed, waves


def build_medium(a0=(1.0,), b=(1.0,), p=1.0, n=64, delta0=1.0, q=None):
    """Cell, kernel and nonlinearity with grid-aligned quadrature nodes."""
    cell = habitat.build_cell(p, n)
    if q is None:
        q = int(round(delta0 / cell.h))
    kernel = habitat.build_kernel("quartic", delta0, q)
    nl = habitat.Nonlinearity(habitat.sample_field(cell, a0),
                              habitat.sample_field(cell, b))
    return cell, kernel, nl


def build_params(a0=(1.0,), b=(1.0,), n=64, delta0=1.0, c_mult=1.2, **kw):
    cell, kernel, nl = build_medium(a0=a0, b=b, n=n, delta0=delta0)
    res = speed.spreading_speed(1, nl.a0, kernel, cell)
    return speed.build_wave_params(c_mult * res.c_star, 1, nl, kernel, cell,
                                   speed_result=res, **kw)


def extract_timed(params, t_cap=150.0):
    dom = waves.make_wave_domain(params, t_cap)
    pair = waves.build_sub_super_pair(params, dom)
    start = time.perf_counter()
    wave = waves.extract_pulsating_wave(pair, t_cap=t_cap)
    return wave, pair, time.perf_counter() - start


@pytest.fixture(scope="session")
def homog_params():
    return build_params()


@pytest.fixture(scope="session")
def cos_params():
    return build_params(a0=(1.0, 0.4))


@pytest.fixture(scope="session")
def homog_wave(homog_params):
    return extract_timed(homog_params)


@pytest.fixture(scope="session")
def cos_wave(cos_params):
    return extract_timed(cos_params)


@pytest.fixture(scope="session")
def homog_wave_variant(homog_params):
    params_b = build_params(d1_factor=4.0, d2=1.0, b_factor=0.25)
    assert abs(params_b.c - homog_params.c) < 1e-12
    return extract_timed(params_b)
