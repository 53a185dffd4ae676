"""Spreading speed, decay rates, and the constants of the wave construction.

The spreading speed in direction xi is the variational minimum
c*(xi) = inf_{mu>0} lambda0(xi, mu, a0)/mu, located by a coarse geometric
scan followed by golden-section refinement.  For a supercritical speed
c > c*, the decay rate mu(c) in (0, mu*) solves lambda0(mu)/mu = c by
bisection (the quotient is strictly decreasing there).

``build_wave_params`` then calibrates every constant of the explicit
sub/super-solution family: the second rate mu1 in (mu, min{2 mu, mu*}),
the eigenpairs at mu, mu1 and 0, the subtraction coefficient d0 with
d0 = max{ max phi / min phi1,  L max phi^2 / ((mu1 c - lambda(mu1)) min phi1) },
the small-amplitude bound b_max = lambda0 / max(b(x) phi0(x)) for the
implemented reaction family, and the band threshold M such that the
conservative envelope of the subtracted profile stays at least b on
[M - 2 delta0, M].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, HypothesisError, InvariantError
from .habitat import Kernel, Nonlinearity, PeriodCell, PeriodicField
from . import spectral

GOLDEN_STEP = (3.0 - math.sqrt(5.0)) / 2.0


@dataclass(frozen=True)
class SpeedResult:
    """Spreading speed with the dispersion data that produced it."""

    xi: int
    c_star: float
    mu_star: float
    curve: spectral.DispersionCurve
    bracket: tuple


@dataclass(frozen=True)
class WaveParams:
    """Full constant set for one supercritical wave construction."""

    xi: int
    c: float
    c_star: float
    mu_star: float
    mu: float
    mu1: float
    lam_mu: float
    lam_mu1: float
    lam0: float
    phi: PeriodicField
    phi1: PeriodicField
    phi0: PeriodicField
    u_plus: PeriodicField
    L: float
    d0: float
    d1: float
    d2: float
    b: float
    b_max: float
    M: float
    nl: Nonlinearity
    kernel: Kernel
    cell: PeriodCell

    def constants_dict(self) -> dict:
        return {
            "xi": self.xi, "c": self.c, "c_star": self.c_star,
            "mu_star": self.mu_star, "mu": self.mu, "mu1": self.mu1,
            "lambda_mu": self.lam_mu, "lambda_mu1": self.lam_mu1,
            "lambda0": self.lam0, "L": self.L, "d0": self.d0, "d1": self.d1,
            "d2": self.d2, "b": self.b, "b_max": self.b_max, "M": self.M,
        }


class _CurvePoint:
    """Eigen-solves of lambda0(mu)/mu with warm starting between calls."""

    def __init__(self, xi, a0, kernel, cell, tol=spectral.DEFAULT_TOL):
        self.xi, self.a0, self.kernel, self.cell = xi, a0, kernel, cell
        self.tol = tol
        self.v0 = None
        self.evaluations = 0

    def lam(self, mu: float) -> float:
        pair = spectral.principal_eigenpair(
            spectral.assemble(self.xi, mu, self.a0, self.kernel, self.cell),
            tol=self.tol, v0=self.v0,
        )
        self.v0 = pair.phi.values
        self.evaluations += 1
        return pair.lam

    def quotient(self, mu: float) -> float:
        return self.lam(mu) / mu


def spreading_speed(xi: int, a0: PeriodicField, kernel: Kernel, cell: PeriodCell,
                    search: tuple = (1e-2, 20.0), scan_points: int = 32,
                    rel_width: float = 1e-8,
                    tol: float = spectral.DEFAULT_TOL) -> SpeedResult:
    """Locate c*(xi) = min_mu lambda0(xi, mu, a0)/mu on the search interval."""
    mu_lo, mu_hi = float(search[0]), float(search[1])
    if not (0 < mu_lo < mu_hi):
        raise ValueError("search interval must satisfy 0 < mu_lo < mu_hi")
    lam0_pair = spectral.principal_eigenpair(
        spectral.assemble(xi, 0.0, a0, kernel, cell), tol=tol)
    if lam0_pair.lam <= 0:
        raise HypothesisError(
            f"H2 fails: lambda0(a0) = {lam0_pair.lam:.6g} <= 0; the zero "
            "state is not linearly unstable"
        )
    mu_grid = np.geomspace(mu_lo, mu_hi, scan_points)
    curve = spectral.lambda0_curve(xi, a0, mu_grid, kernel, cell, tol=tol)
    quotients = curve.lam0 / curve.mu
    k = int(np.argmin(quotients))
    if k == 0 or k == scan_points - 1:
        raise ConvergenceError(
            "minimum of lambda0(mu)/mu lies at the search boundary "
            f"(mu = {mu_grid[k]:.6g}); widen the (mu_lo, mu_hi) interval"
        )
    point = _CurvePoint(xi, a0, kernel, cell, tol=tol)
    a, b, c = mu_grid[k - 1], mu_grid[k], mu_grid[k + 1]
    gb = quotients[k]
    while (c - a) > rel_width * b:
        if (c - b) > (b - a):
            x = b + GOLDEN_STEP * (c - b)
            gx = point.quotient(x)
            if gx < gb:
                a, b, gb = b, x, gx
            else:
                c = x
        else:
            x = b - GOLDEN_STEP * (b - a)
            gx = point.quotient(x)
            if gx < gb:
                c, b, gb = b, x, gx
            else:
                a = x
    return SpeedResult(xi=xi, c_star=float(gb), mu_star=float(b),
                       curve=curve, bracket=(float(a), float(b), float(c)))


def decay_rate_for_speed(c: float, result: SpeedResult, a0: PeriodicField,
                         kernel: Kernel, cell: PeriodCell,
                         rel_tol: float = 1e-10,
                         tol: float = spectral.DEFAULT_TOL) -> float:
    """Solve lambda0(mu)/mu = c for mu in (0, mu*); requires c > c*."""
    if c <= result.c_star * (1.0 + 1e-9):
        raise ConvergenceError(
            "no subcritical decay rate; waves below c* do not exist "
            f"(c = {c:.6g}, c* = {result.c_star:.6g})"
        )
    point = _CurvePoint(result.xi, a0, kernel, cell, tol=tol)
    hi = result.mu_star
    lo = hi / 16.0
    for _ in range(80):
        if point.quotient(lo) > c:
            break
        lo /= 2.0
    else:
        raise ConvergenceError("could not bracket the decay rate from below")
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        g = point.quotient(mid)
        if abs(g - c) <= rel_tol * c:
            return float(mid)
        if g > c:
            lo = mid
        else:
            hi = mid
    raise ConvergenceError("decay-rate bisection did not reach tolerance")


def _band_envelope(mu, mu1, phi_min, phi1_max, d1, delta0, h):
    """Sliding 2*delta0-window minimum of the conservative envelope.

    The envelope g(r) = exp(-mu r) min phi - d1 exp(-mu1 r) max phi1 bounds
    the subtracted profile from below uniformly in x and t.  Returns the
    grid of right endpoints r2 together with min g over [r2-2delta0, r2].
    """
    r_cross = math.log(max(d1 * phi1_max / phi_min, 1.0)) / (mu1 - mu)
    r_max = r_cross + 2.0 * delta0 + 40.0 / mu  # well past the hump
    n_pts = int(math.ceil(r_max / h))
    r = np.arange(n_pts + 1) * h
    g = np.exp(-mu * r) * phi_min - d1 * np.exp(-mu1 * r) * phi1_max
    w = max(int(round(2.0 * delta0 / h)), 1)
    window_min = np.array([np.min(g[j - w: j + 1]) for j in range(w, n_pts + 1)])
    return r[w:], window_min


def _band_threshold(mu, mu1, phi_min, phi1_max, d1, b, delta0, h):
    """Largest grid r2 with the conservative envelope >= b on [r2-2delta0, r2]."""
    r2, window_min = _band_envelope(mu, mu1, phi_min, phi1_max, d1, delta0, h)
    ok = np.nonzero(window_min >= b)[0]
    if ok.size == 0:
        raise InvariantError("b too large; decrease b_factor")
    return float(r2[ok[-1]])


def build_wave_params(c: float, xi: int, nl: Nonlinearity, kernel: Kernel,
                      cell: PeriodCell, d1_factor: float = 2.0, d2: float = 0.0,
                      b_factor: float = 0.5, b_explicit: float | None = None,
                      search: tuple = (1e-2, 20.0),
                      speed_result: SpeedResult | None = None,
                      u_plus: PeriodicField | None = None,
                      tol: float = spectral.DEFAULT_TOL) -> WaveParams:
    """Calibrate every constant of the sub/super-solution pair at speed c.

    The small amplitude b must satisfy two smallness constraints: the
    small-amplitude sub-solution bound b <= b_max and
    the band condition, which caps b at the largest sliding-window minimum
    of the conservative envelope.  ``b_factor`` scales the tighter of the
    two caps, so the default always yields a valid construction; passing
    ``b_explicit`` bypasses the scaling and may trigger the band error.
    """
    if d1_factor < 1.0:
        raise ValueError("d1_factor must be >= 1")
    if d2 < 0.0:
        raise ValueError("d2 must be >= 0")
    if not (0.0 < b_factor < 1.0):
        raise ValueError("b_factor must lie in (0, 1)")
    a0 = nl.a0
    if speed_result is None:
        speed_result = spreading_speed(xi, a0, kernel, cell, search=search, tol=tol)
    mu = decay_rate_for_speed(c, speed_result, a0, kernel, cell, tol=tol)
    mu_star = speed_result.mu_star
    mu1 = 0.5 * (mu + min(2.0 * mu, mu_star))  # midpoint of the admissible interval
    pair_mu = spectral.principal_eigenpair(
        spectral.assemble(xi, mu, a0, kernel, cell), tol=tol)
    pair_mu1 = spectral.principal_eigenpair(
        spectral.assemble(xi, mu1, a0, kernel, cell), tol=tol)
    pair_0 = spectral.principal_eigenpair(
        spectral.assemble(xi, 0.0, a0, kernel, cell), tol=tol)
    gap1 = mu1 * c - pair_mu1.lam
    if gap1 <= 0:
        raise InvariantError(
            "mu1*c - lambda(mu1) <= 0; impossible for mu1 < mu* "
            "(dispersion data inconsistent)"
        )
    L = nl.b.max  # -f_u = b(x) on u >= 0 for the implemented family
    phi_max = pair_mu.phi.max  # = 1 by normalization
    d0 = max(phi_max / pair_mu1.phi.min,
             L * phi_max ** 2 / (gap1 * pair_mu1.phi.min))
    d1 = d1_factor * d0
    b_max = pair_0.lam / float(np.max(nl.b.values * pair_0.phi.values))
    if b_explicit is not None:
        b = float(b_explicit)
        if not (0.0 < b <= b_max):
            raise InvariantError(f"explicit b = {b:.3g} outside (0, b_max]")
    else:
        _, window_min = _band_envelope(mu, mu1, pair_mu.phi.min,
                                       pair_mu1.phi.max, d1,
                                       kernel.delta0, cell.h)
        b_band = float(np.max(window_min))
        if b_band <= 0:
            raise InvariantError("b too large; decrease b_factor")
        b = b_factor * min(b_max, b_band)
    M = _band_threshold(mu, mu1, pair_mu.phi.min, pair_mu1.phi.max, d1, b,
                        kernel.delta0, cell.h)
    if u_plus is None:
        from . import dynamics

        u_plus = dynamics.stationary_solution(nl, kernel, cell)
    if np.any(b * pair_0.phi.values > u_plus.values):
        raise InvariantError("b too large; b*phi0 exceeds u+ somewhere")
    return WaveParams(
        xi=xi, c=float(c), c_star=speed_result.c_star, mu_star=mu_star,
        mu=float(mu), mu1=float(mu1), lam_mu=pair_mu.lam, lam_mu1=pair_mu1.lam,
        lam0=pair_0.lam, phi=pair_mu.phi, phi1=pair_mu1.phi, phi0=pair_0.phi,
        u_plus=u_plus, L=float(L), d0=float(d0), d1=float(d1), d2=float(d2),
        b=float(b), b_max=float(b_max), M=M, nl=nl, kernel=kernel, cell=cell,
    )
