"""Compiled core and numpy fallback agree on the hot kernels."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pulsefront import _corepy, backend

try:
    from pulsefront import _core
except ImportError:
    _core = None

needs_core = pytest.mark.skipif(_core is None, reason="extension not built")


def random_problem(rng, n, q, pad):
    u = rng.standard_normal(n)
    u_pad = np.concatenate([rng.standard_normal(pad), u, rng.standard_normal(pad)])
    offsets = np.sort(rng.choice(np.arange(-pad, pad + 1), size=q,
                                 replace=False)).astype(np.int64)
    weights = rng.uniform(0.0, 1.0, q)
    weights /= weights.sum()
    a0 = rng.uniform(0.5, 1.5, n)
    b = rng.uniform(0.5, 1.5, n)
    return u_pad, u, offsets, weights, a0, b


def test_backend_name_consistent():
    assert backend.backend_name() in ("compiled", "numpy")
    assert backend.COMPILED == (backend.backend_name() == "compiled")


@needs_core
@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=10_000),
       st.integers(min_value=8, max_value=200),
       st.integers(min_value=1, max_value=15))
def test_backends_agree(seed, n, q):
    rng = np.random.default_rng(seed)
    pad = q + 2
    u_pad, u, offsets, weights, a0, b = random_problem(rng, n, q, pad)
    conv_c = _core.stencil_apply(u_pad, offsets, weights, n, pad)
    conv_p = _corepy.stencil_apply(u_pad, offsets, weights, n, pad)
    np.testing.assert_allclose(conv_c, conv_p, rtol=1e-14, atol=1e-15)
    rhs_c = _core.dispersal_rhs(u_pad, u, offsets, weights, a0, b, pad)
    rhs_p = _corepy.dispersal_rhs(u_pad, u, offsets, weights, a0, b, pad)
    np.testing.assert_allclose(rhs_c, rhs_p, rtol=1e-14, atol=1e-15)


def test_fallback_rhs_formula():
    rng = np.random.default_rng(3)
    n, q, pad = 32, 9, 11
    u_pad, u, offsets, weights, a0, b = random_problem(rng, n, q, pad)
    out = _corepy.dispersal_rhs(u_pad, u, offsets, weights, a0, b, pad)
    conv = np.array([np.sum(weights * u_pad[i + pad + offsets])
                     for i in range(n)])
    expected = conv - u + u * (a0 - b * np.maximum(u, 0.0))
    np.testing.assert_allclose(out, expected, rtol=1e-13, atol=1e-15)
