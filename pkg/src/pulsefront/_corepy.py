"""Pure-numpy fallback for the stencil kernels in ``_core``.

Same call signatures and the same ascending-j summation order as the compiled
extension, so the two backends agree to rounding.
"""

from __future__ import annotations

import numpy as np


def stencil_apply(u_pad, offsets, weights, n, pad):
    """Return out[i] = sum_j weights[j] * u_pad[i + pad + offsets[j]]."""
    out = np.zeros(n)
    for off, w in zip(offsets, weights):
        lo = pad + off
        out += w * u_pad[lo : lo + n]
    return out


def dispersal_rhs(u_pad, u, offsets, weights, a0, b, pad):
    """Stencil convolution fused with the monostable reaction term."""
    conv = stencil_apply(u_pad, offsets, weights, u.shape[0], pad)
    return conv - u + u * (a0 - b * np.maximum(u, 0.0))
