"""Periodic medium: period cell, coefficient fields, nonlinearity, kernel.

The medium is one-dimensional.  A habitat is a period cell [0, p) with a
uniform grid, periodic coefficient fields a0(x) and b(x) given by finite
Fourier series, the monostable reaction f(x, u) = a0(x) - b(x) * max(u, 0),
and a compactly supported dispersal kernel discretized by the composite
midpoint rule and renormalized to unit discrete mass.

Kernel quadrature nodes must land on integer multiples of the grid spacing
so that convolution is a pure stencil over grid nodes (no interpolation,
which would break monotonicity of the discrete operator).  With q midpoint
nodes on [-delta0, delta0] this holds exactly when q divides delta0/h.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvariantError

# Fourier coefficient list (c0, a1, b1, a2, b2, ...) meaning
# c0 + sum_m a_m cos(2 pi m x / p) + b_m sin(2 pi m x / p).
FourierCoeffs = tuple


@dataclass(frozen=True)
class PeriodCell:
    """Uniform grid on one period [0, p)."""

    p: float
    n: int
    h: float = field(init=False)
    x: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.p <= 0:
            raise ValueError(f"period must be positive, got {self.p}")
        if self.n < 8:
            raise ValueError(f"n too small: {self.n} < 8")
        object.__setattr__(self, "h", self.p / self.n)
        object.__setattr__(self, "x", np.arange(self.n) * (self.p / self.n))

    def index_of(self, x, tol: float = 1e-9):
        """Wrapped grid index of coordinate(s) x; x must be grid aligned."""
        idx = np.asarray(np.rint(np.asarray(x) / self.h), dtype=np.int64)
        if np.max(np.abs(np.asarray(x) - idx * self.h)) > tol * self.h:
            raise ValueError("coordinate not aligned to the cell grid")
        return idx % self.n


def build_cell(p: float, n: int) -> PeriodCell:
    return PeriodCell(p=float(p), n=int(n))


@dataclass(frozen=True)
class PeriodicField:
    """Samples of a p-periodic function on the cell grid.

    ``fourier`` keeps the generating coefficients so the field can be
    resampled exactly on a refined grid (used by the eigen-refinement
    diagnostic).
    """

    cell: PeriodCell
    values: np.ndarray
    fourier: FourierCoeffs | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.cell.n,):
            raise ValueError("field length does not match the cell grid")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", v)

    def at(self, x):
        """Evaluate at grid-aligned coordinates, wrapping by periodicity."""
        return self.values[self.cell.index_of(x)]

    @property
    def min(self) -> float:
        return float(np.min(self.values))

    @property
    def max(self) -> float:
        return float(np.max(self.values))


def fourier_values(coeffs, x, p):
    """Evaluate c0 + sum a_m cos(2 pi m x/p) + b_m sin(2 pi m x/p)."""
    coeffs = tuple(float(c) for c in coeffs)
    if not coeffs:
        raise ValueError("empty coefficient list")
    x = np.asarray(x, dtype=float)
    out = np.full_like(x, coeffs[0])
    pairs = coeffs[1:]
    for m in range(len(pairs) // 2 + len(pairs) % 2):
        a_m = pairs[2 * m] if 2 * m < len(pairs) else 0.0
        b_m = pairs[2 * m + 1] if 2 * m + 1 < len(pairs) else 0.0
        w = 2.0 * np.pi * (m + 1) / p
        out += a_m * np.cos(w * x) + b_m * np.sin(w * x)
    return out


def sample_field(cell: PeriodCell, coeffs) -> PeriodicField:
    """Sample a finite Fourier series exactly at the grid nodes."""
    vals = fourier_values(coeffs, cell.x, cell.p)
    return PeriodicField(cell=cell, values=vals, fourier=tuple(float(c) for c in coeffs))


def constant_field(cell: PeriodCell, value: float) -> PeriodicField:
    return sample_field(cell, (value,))


@dataclass(frozen=True)
class Nonlinearity:
    """Monostable reaction f(x, u) = a0(x) - b(x) * max(u, 0).

    Satisfies the standing assumptions exactly: df/du = -b(x) < 0 for u >= 0,
    f(x, u) < 0 for u > max a0 / min b, and f(x, u) = f(x, 0) for u <= 0.
    """

    a0: PeriodicField
    b: PeriodicField

    def __post_init__(self):
        if self.b.min <= 0:
            raise ValueError("b must be strictly positive (H1)")
        if self.a0.cell is not self.b.cell and self.a0.cell != self.b.cell:
            raise ValueError("a0 and b must share a cell")

    @property
    def cell(self) -> PeriodCell:
        return self.a0.cell

    def f(self, a0_vals, b_vals, u):
        return a0_vals - b_vals * np.maximum(u, 0.0)

    def df_du(self, b_vals, u):
        """Right-derivative in u: -b(x) for u >= 0, 0 for u < 0."""
        return np.where(np.asarray(u) >= 0.0, -b_vals, 0.0)

    def u_cap(self) -> float:
        """f(x, u) < 0 for every u above this level."""
        return self.a0.max / self.b.min


_KERNEL_SHAPES = ("quartic", "smooth-bump")


def _shape_profile(shape: str, t: np.ndarray) -> np.ndarray:
    """Reference kernel on [-1, 1]; positive inside, C^1-zero at the edges."""
    if shape == "quartic":
        return (15.0 / 16.0) * (1.0 - t * t) ** 2
    if shape == "smooth-bump":
        out = np.zeros_like(t)
        inside = np.abs(t) < 1.0
        out[inside] = np.exp(-1.0 / (1.0 - t[inside] ** 2))
        return out
    raise ValueError(f"unsupported kernel shape: {shape!r}")


@dataclass(frozen=True)
class Kernel:
    """Compactly supported dispersal kernel with midpoint quadrature.

    ``weights`` are the renormalized products w_j * k(s_j); their sum is
    exactly 1, so the discrete operator conserves mass like the continuum
    kernel with integral 1.
    """

    shape: str
    delta0: float
    q: int
    s: np.ndarray
    k_raw: np.ndarray
    norm_const: float
    weights: np.ndarray

    def k(self, s):
        """Pre-normalization kernel value k(s) (scaled to [-delta0, delta0])."""
        t = np.asarray(s, dtype=float) / self.delta0
        return _shape_profile(self.shape, t) / self.delta0

    def tilted_sum(self, mu: float, xi: int = 1) -> float:
        """Discrete transform sum_j W_j exp(-mu * s_j * xi)."""
        return float(np.sum(self.weights * np.exp(-mu * self.s * xi)))

    def refine(self, factor: int = 2) -> "Kernel":
        return build_kernel(self.shape, self.delta0, self.q * factor)

    def coarsen(self) -> "Kernel":
        if self.q % 2:
            raise ValueError("cannot coarsen a kernel with odd q")
        return build_kernel(self.shape, self.delta0, self.q // 2)


def build_kernel(shape: str, delta0: float, q: int) -> Kernel:
    """Midpoint-rule kernel on [-delta0, delta0], renormalized to unit mass."""
    if shape not in _KERNEL_SHAPES:
        raise ValueError(f"unsupported kernel shape: {shape!r}")
    if delta0 <= 0:
        raise ValueError("delta0 must be positive")
    if q < 16:
        raise ValueError(f"q too small: {q} < 16")
    step = 2.0 * delta0 / q
    s = -delta0 + (np.arange(q) + 0.5) * step
    k_raw = _shape_profile(shape, s / delta0) / delta0
    raw_mass = float(np.sum(step * k_raw))
    norm = 1.0 / raw_mass
    weights = step * k_raw * norm
    return Kernel(shape=shape, delta0=float(delta0), q=int(q), s=s,
                  k_raw=k_raw, norm_const=norm, weights=weights)


def kernel_offsets(kernel: Kernel, h: float, tol: float = 1e-9) -> np.ndarray:
    """Kernel node offsets in grid steps; raises if nodes miss the grid."""
    off = kernel.s / h
    rounded = np.rint(off)
    if np.max(np.abs(off - rounded)) > tol:
        raise InvariantError(
            "grid/kernel misalignment: quadrature nodes do not land on grid "
            f"nodes (delta0={kernel.delta0}, q={kernel.q}, h={h}); choose q "
            "dividing delta0/h"
        )
    if kernel.delta0 <= h:
        raise InvariantError("kernel support below grid spacing (delta0 <= h)")
    return rounded.astype(np.int64)


def periodize_kernel(kernel: Kernel, cell: PeriodCell) -> np.ndarray:
    """Wrap kernel weights onto the cell grid.

    For p-periodic states, convolution over the line reduces to one period
    with weights summed over integer period shifts; on the grid this is the
    offset-mod-n reduction below.  Total mass 1 is preserved exactly.
    """
    offsets = kernel_offsets(kernel, cell.h)
    wrapped = np.zeros(cell.n)
    np.add.at(wrapped, offsets % cell.n, kernel.weights)
    return wrapped


def wrapped_convolve(wrapped: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Periodic convolution with a wrapped weight vector."""
    n = u.shape[0]
    out = np.zeros(n)
    idx = np.arange(n)
    for d in np.nonzero(wrapped)[0]:
        out += wrapped[d] * u[(idx + d) % n]
    return out


@dataclass(frozen=True)
class HypothesesReport:
    """Outcome of the standing-hypothesis checks for a medium."""

    h1: bool
    h2: bool
    h3_sufficient: bool
    h4: bool
    lambda0: float
    min_b: float
    a0_oscillation: float
    notes: tuple

    @property
    def ok(self) -> bool:
        """Hard hypotheses only; an unmet H3 sufficient condition is a note."""
        return self.h1 and self.h2 and self.h4

    def to_dict(self) -> dict:
        return {
            "H1": self.h1,
            "H2": self.h2,
            "H3_sufficient": self.h3_sufficient,
            "H4": self.h4,
            "lambda0": self.lambda0,
            "min_b": self.min_b,
            "a0_oscillation": self.a0_oscillation,
            "notes": list(self.notes),
        }


def check_hypotheses(nl: Nonlinearity, kernel: Kernel, cell: PeriodCell) -> HypothesesReport:
    """Check H1/H2/H4 and the sufficient condition for H3.

    H2 needs the principal spectrum point of the untilted operator, so this
    pulls in the spectral module.  The report never claims H3 false: when
    max a0 - min a0 >= 1 it records only that the sufficient condition is
    unmet (a small dispersal distance is another sufficient route).
    """
    from . import spectral

    min_b = nl.b.min
    h1 = bool(min_b > 0)
    osc = nl.a0.max - nl.a0.min
    h3_sufficient = bool(osc < 1.0)
    pair = spectral.principal_eigenpair(spectral.assemble(1, 0.0, nl.a0, kernel, cell))
    h2 = bool(pair.lam > 0)
    notes = [
        "H4 holds by construction: f(x,u) = f(x,0) for u <= 0.",
        "H3 sufficient condition: max a0 - min a0 < 1; alternatively a "
        "small dispersal distance delta0 suffices (kernel-scaling route).",
    ]
    if not h3_sufficient:
        notes.append("H3 sufficient condition not met (this does not refute H3).")
    return HypothesesReport(
        h1=h1, h2=h2, h3_sufficient=h3_sufficient, h4=True,
        lambda0=pair.lam, min_b=min_b, a0_oscillation=float(osc),
        notes=tuple(notes),
    )
