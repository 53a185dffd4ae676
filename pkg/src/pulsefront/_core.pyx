# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled stencil kernels.

Hot loops of the package: offset-convolution of a padded state and the full
dispersal right-hand side  (K u)(x) - u(x) + u(x) f(x, u(x)).  The offset
loop is outermost so the inner loop streams contiguously and vectorizes;
per element the accumulation still runs in ascending-offset order, matching
the pure-numpy fallback in `_corepy` exactly.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


cdef void _accumulate(double[::1] out, double[::1] u_pad,
                      cnp.int64_t[::1] offsets, double[::1] weights,
                      Py_ssize_t n, Py_ssize_t pad) noexcept nogil:
    cdef Py_ssize_t i, j, base, q = offsets.shape[0]
    cdef double w
    for j in range(q):
        w = weights[j]
        base = pad + offsets[j]
        for i in range(n):
            out[i] += w * u_pad[base + i]


def stencil_apply(double[::1] u_pad, cnp.int64_t[::1] offsets,
                  double[::1] weights, Py_ssize_t n, Py_ssize_t pad):
    """Return out[i] = sum_j weights[j] * u_pad[i + pad + offsets[j]]."""
    out_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    _accumulate(out, u_pad, offsets, weights, n, pad)
    return out_arr


def dispersal_rhs(double[::1] u_pad, double[::1] u, cnp.int64_t[::1] offsets,
                  double[::1] weights, double[::1] a0, double[::1] b,
                  Py_ssize_t pad):
    """Stencil convolution fused with the monostable reaction term.

    out[i] = conv[i] - u[i] + u[i] * (a0[i] - b[i] * max(u[i], 0))
    """
    cdef Py_ssize_t i, n = u.shape[0]
    out_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double ui, up
    _accumulate(out, u_pad, offsets, weights, n, pad)
    for i in range(n):
        ui = u[i]
        up = ui if ui > 0.0 else 0.0
        out[i] = out[i] - ui + ui * (a0[i] - b[i] * up)
    return out_arr
