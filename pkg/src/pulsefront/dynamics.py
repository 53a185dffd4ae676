"""Time integration of the nonlocal evolution equation.

Method of lines with the classical 4-stage Runge-Kutta scheme.  The spatial
operator is bounded (no diffusion-style stiffness), so explicit stepping is
cheap, and with dt inside the stated stability margin the one-step map is
monotone: ordered states stay ordered, which the comparison harness checks
to 1e-10.

On a truncated line the convolution stencil needs values outside the
domain.  The left closure clamps to the periodic stationary state u+ (the
wave's left limit); the right closure is either zero or an exponential
extension A*exp(-mu x) with the known decay rate mu, fitted on the
rightmost 2*delta0 window (used during wave runs, where the tail provably
has that form).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .backend import dispersal_rhs, stencil_apply
from .errors import ConvergenceError, InvariantError
from .habitat import Kernel, Nonlinearity, PeriodCell, PeriodicField, kernel_offsets

logger = logging.getLogger(__name__)

RIGHT_CLOSURES = ("zero", "exponential")


@dataclass(frozen=True)
class LineDomain:
    """Uniform truncation [x_lo, x_hi) of the line, aligned to the cell grid."""

    x_lo: float
    n_nodes: int
    h: float
    right_closure: str = "zero"
    right_rate: float = 0.0

    def __post_init__(self):
        if self.right_closure not in RIGHT_CLOSURES:
            raise ValueError(f"unknown right closure {self.right_closure!r}")
        if self.right_closure == "exponential" and self.right_rate <= 0:
            raise ValueError("exponential closure needs a positive rate")

    @property
    def x_hi(self) -> float:
        return self.x_lo + self.n_nodes * self.h

    @property
    def nodes(self) -> np.ndarray:
        return self.x_lo + np.arange(self.n_nodes) * self.h


def build_line(x_lo: float, x_hi: float, cell: PeriodCell,
               right_closure: str = "zero", right_rate: float = 0.0) -> LineDomain:
    """Line domain snapped outward to the cell grid."""
    h = cell.h
    i_lo = math.floor(x_lo / h + 1e-9)
    i_hi = math.ceil(x_hi / h - 1e-9)
    if i_hi - i_lo < 1:
        raise ValueError("empty line domain")
    return LineDomain(x_lo=i_lo * h, n_nodes=i_hi - i_lo, h=h,
                      right_closure=right_closure, right_rate=right_rate)


@dataclass
class State:
    """Grid function with its time stamp."""

    u: np.ndarray
    t: float = 0.0


class PeriodicOperator:
    """Dispersal operator on the cell with wrapped kernel weights."""

    def __init__(self, nl: Nonlinearity, kernel: Kernel, cell: PeriodCell):
        offsets = kernel_offsets(kernel, cell.h)
        n = cell.n
        wrapped = np.zeros(n)
        np.add.at(wrapped, offsets % n, kernel.weights)
        self.residues = np.nonzero(wrapped)[0].astype(np.int64)
        self.weights = wrapped[self.residues]
        self.a0 = np.ascontiguousarray(nl.a0.values)
        self.b = np.ascontiguousarray(nl.b.values)
        self.n = n

    def conv(self, u: np.ndarray) -> np.ndarray:
        u_pad = np.concatenate([u, u])
        return stencil_apply(u_pad, self.residues, self.weights, self.n, 0)

    def rhs(self, u: np.ndarray) -> np.ndarray:
        u_pad = np.concatenate([u, u])
        return dispersal_rhs(u_pad, u, self.residues, self.weights,
                             self.a0, self.b, 0)


def make_periodic_rhs(nl: Nonlinearity, kernel: Kernel, cell: PeriodCell):
    """RHS (K u) - u + u f(x, u) on the cell, with wrapped kernel weights."""
    return PeriodicOperator(nl, kernel, cell).rhs


class LineOperator:
    """Dispersal operator on the truncated line with the configured closures."""

    def __init__(self, nl: Nonlinearity, kernel: Kernel, domain: LineDomain,
                 u_plus: PeriodicField, floor: float = 1e-12):
        offsets = kernel_offsets(kernel, domain.h)
        pad = int(offsets[-1])
        if pad != -int(offsets[0]):
            raise InvariantError("kernel offsets are not symmetric")
        self.offsets = offsets
        self.pad = pad
        self.weights = np.ascontiguousarray(kernel.weights)
        self.domain = domain
        self.n = domain.n_nodes
        nodes = domain.nodes
        self.a0 = np.ascontiguousarray(nl.a0.at(nodes))
        self.b = np.ascontiguousarray(nl.b.at(nodes))
        self.left_vals = u_plus.at(domain.x_lo + np.arange(-pad, 0) * domain.h)
        self.w_fit = max(int(round(2.0 * kernel.delta0 / domain.h)), 4)
        self.x_fit = nodes[-self.w_fit:]
        self.x_pad = domain.x_hi + np.arange(pad) * domain.h
        self.mu = domain.right_rate
        self.floor = floor
        self._warned = False

    def _right_pad(self, u: np.ndarray) -> np.ndarray:
        if self.domain.right_closure == "zero":
            return np.zeros(self.pad)
        tail = u[-self.w_fit:]
        if np.min(tail) <= self.floor:
            if not self._warned:
                logger.warning("right tail below floor; falling back to zero closure")
                self._warned = True
            return np.zeros(self.pad)
        log_tail = np.log(tail)
        log_a = float(np.mean(log_tail + self.mu * self.x_fit))
        if np.max(np.abs(log_tail + self.mu * self.x_fit - log_a)) > 3.0:
            if not self._warned:
                logger.warning(
                    "right tail not yet exponential; falling back to zero closure")
                self._warned = True
            return np.zeros(self.pad)
        return np.exp(log_a - self.mu * self.x_pad)

    def padded(self, u: np.ndarray) -> np.ndarray:
        u_pad = np.empty(self.n + 2 * self.pad)
        u_pad[:self.pad] = self.left_vals
        u_pad[self.pad:self.pad + self.n] = u
        u_pad[self.pad + self.n:] = self._right_pad(u)
        return u_pad

    def conv(self, u: np.ndarray) -> np.ndarray:
        return stencil_apply(self.padded(u), self.offsets, self.weights,
                             self.n, self.pad)

    def rhs(self, u: np.ndarray) -> np.ndarray:
        return dispersal_rhs(self.padded(u), u, self.offsets, self.weights,
                             self.a0, self.b, self.pad)


def make_line_rhs(nl: Nonlinearity, kernel: Kernel, domain: LineDomain,
                  u_plus: PeriodicField, floor: float = 1e-12):
    """RHS on the truncated line with the configured closures."""
    return LineOperator(nl, kernel, domain, u_plus, floor=floor).rhs


def stability_dt_bound(nl: Nonlinearity, u_cap: float | None = None) -> float:
    """Explicit stability margin for the bounded spatial operator."""
    if u_cap is None:
        u_cap = nl.u_cap()
    return 0.2 / (1.0 + nl.a0.max + nl.b.max * u_cap)


@dataclass(frozen=True)
class IntegratorConfig:
    """Classical RK4 configuration; dt must satisfy the stability bound."""

    dt: float
    t_end: float
    record_stride: int = 1

    def __post_init__(self):
        if self.dt <= 0 or self.t_end <= 0:
            raise ValueError("dt and t_end must be positive")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")

    def validate_for(self, nl: Nonlinearity, u_cap: float | None = None) -> None:
        bound = stability_dt_bound(nl, u_cap)
        if self.dt > bound:
            raise ValueError(
                f"dt = {self.dt:.6g} exceeds the stability bound {bound:.6g}")

    @property
    def n_steps(self) -> int:
        steps = int(round(self.t_end / self.dt))
        if abs(steps * self.dt - self.t_end) > 1e-9 * max(1.0, self.t_end):
            raise ValueError("t_end must be an integer number of steps")
        return steps


def rk4_step(u: np.ndarray, dt: float, rhs) -> np.ndarray:
    k1 = rhs(u)
    k2 = rhs(u + 0.5 * dt * k1)
    k3 = rhs(u + 0.5 * dt * k2)
    k4 = rhs(u + dt * k3)
    return u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@dataclass
class Trajectory:
    """States recorded at output strides, plus sup-norm of du/dt there."""

    times: np.ndarray
    states: np.ndarray
    rhs_sup: np.ndarray

    @property
    def final(self) -> State:
        return State(u=self.states[-1].copy(), t=float(self.times[-1]))


def integrate(state: State, config: IntegratorConfig, rhs) -> Trajectory:
    """RK4 time stepping with records every ``record_stride`` steps."""
    u = np.asarray(state.u, dtype=float).copy()
    t = state.t
    times, snaps, sups = [t], [u.copy()], [float(np.max(np.abs(rhs(u))))]
    for step in range(1, config.n_steps + 1):
        u = rk4_step(u, config.dt, rhs)
        t = state.t + step * config.dt
        if step % config.record_stride == 0 or step == config.n_steps:
            if not np.all(np.isfinite(u)):
                raise ConvergenceError(f"blow-up detected at t = {t:.6g}")
            times.append(t)
            snaps.append(u.copy())
            sups.append(float(np.max(np.abs(rhs(u)))))
    return Trajectory(times=np.array(times), states=np.array(snaps),
                      rhs_sup=np.array(sups))


def stationary_solution(nl: Nonlinearity, kernel: Kernel, cell: PeriodCell,
                        u0=None, tol: float = 1e-10, t_max: float = 400.0,
                        dt: float | None = None) -> PeriodicField:
    """Unique positive periodic stationary state u+, by forward integration.

    Any strictly positive start converges (monostable dynamics); two-start
    agreement is checked in the tests rather than here.
    """
    if u0 is None:
        u0 = np.full(cell.n, 0.5 * nl.u_cap())
    elif np.isscalar(u0):
        u0 = np.full(cell.n, float(u0))
    else:
        u0 = np.asarray(u0, dtype=float).copy()
    if np.min(u0) <= 0:
        raise ValueError("u0 must be strictly positive on the cell")
    if dt is None:
        dt = 0.5 * stability_dt_bound(nl, max(nl.u_cap(), float(np.max(u0))))
    rhs = make_periodic_rhs(nl, kernel, cell)
    u = u0
    t = 0.0
    chunk = max(int(round(1.0 / dt)), 1)
    while t < t_max:
        for _ in range(chunk):
            u = rk4_step(u, dt, rhs)
        t += chunk * dt
        if not np.all(np.isfinite(u)):
            raise ConvergenceError("stationary solve blew up")
        if float(np.max(np.abs(rhs(u)))) <= tol:
            if np.min(u) <= 0:
                raise InvariantError("stationary state is not strictly positive")
            return PeriodicField(cell=cell, values=u)
    raise ConvergenceError(
        f"stationary state not reached by t = {t_max} (residual "
        f"{float(np.max(np.abs(rhs(u)))):.3g} > {tol:.3g})"
    )


@dataclass(frozen=True)
class ComparisonReport:
    """Outcome of a comparison-principle run for one ordered pair."""

    min_gap: float
    strict_checked: bool
    strict_min_gap: float
    t_strict: float


def comparison_harness(u1_0: np.ndarray, u2_0: np.ndarray, rhs,
                       config: IntegratorConfig, strict_mask=None,
                       strict_time: float = 1.0,
                       order_tol: float = 1e-10) -> ComparisonReport:
    """Evolve an ordered pair and verify the discrete comparison principle.

    Raises on ordering violations beyond ``order_tol`` (they signal an
    integrator or stencil bug: the positive-weight scheme at stable dt is
    monotone).  When the initial gap is nontrivial, strict ordering is also
    required at the first record past ``strict_time``, over ``strict_mask``
    (everywhere if None); on a long line pass a light-cone mask, since
    strict positivity propagates from the initial gap support at finite
    numerical range.
    """
    u1 = np.asarray(u1_0, dtype=float).copy()
    u2 = np.asarray(u2_0, dtype=float).copy()
    gap0 = u2 - u1
    if np.min(gap0) < 0:
        raise ValueError("initial data are not ordered: u1 <= u2 required")
    nontrivial = bool(np.max(gap0) > 0)
    if strict_mask is None:
        strict_mask = np.ones(u1.shape[0], dtype=bool)
    min_gap = float(np.min(gap0))
    strict_min_gap = math.inf
    strict_checked = False
    t_strict = math.nan
    t = 0.0
    for step in range(1, config.n_steps + 1):
        u1 = rk4_step(u1, config.dt, rhs)
        u2 = rk4_step(u2, config.dt, rhs)
        t = step * config.dt
        if step % config.record_stride == 0 or step == config.n_steps:
            gap = u2 - u1
            g = float(np.min(gap))
            min_gap = min(min_gap, g)
            if g < -order_tol:
                raise InvariantError(
                    f"comparison violated at t = {t:.6g}: min gap {g:.3e}")
            if nontrivial and not strict_checked and t >= strict_time:
                strict_min_gap = float(np.min(gap[strict_mask]))
                strict_checked = True
                t_strict = t
                if strict_min_gap <= 0:
                    raise InvariantError(
                        f"strict ordering fails at t = {t:.6g} "
                        f"(min gap {strict_min_gap:.3e} on the strict region)")
    return ComparisonReport(min_gap=min_gap, strict_checked=strict_checked,
                            strict_min_gap=strict_min_gap, t_strict=t_strict)


@dataclass
class FrontSpeedResult:
    """Level-set track of an invading front and its fitted speed."""

    times: np.ndarray
    x_level: np.ndarray
    u_max: np.ndarray
    u_min: np.ndarray
    rhs_sup: np.ndarray
    level: float
    fitted_speed: float


def level_crossing(u: np.ndarray, nodes: np.ndarray, level: float) -> float:
    """Rightmost crossing x with u >= level, linearly interpolated."""
    above = u >= level
    if not above.any() or above.all():
        raise ConvergenceError("front not found: no level crossing")
    i = int(np.max(np.nonzero(above)[0]))
    if i == u.shape[0] - 1:
        return float(nodes[i])
    frac = (u[i] - level) / (u[i] - u[i + 1])
    return float(nodes[i] + frac * (nodes[i + 1] - nodes[i]))


def front_speed_measurement(u0: np.ndarray, rhs, domain: LineDomain,
                            kernel: Kernel, level: float,
                            config: IntegratorConfig,
                            fit_fraction: float = 0.5) -> FrontSpeedResult:
    """Track x_level(t) = max{x : u >= level} and fit its asymptotic slope."""
    u = np.asarray(u0, dtype=float).copy()
    nodes = domain.nodes
    guard = domain.x_hi - 5.0 * kernel.delta0
    times, xs, umax, umin, sups = [], [], [], [], []

    def record(t):
        x = level_crossing(u, nodes, level)
        if x > guard:
            raise ConvergenceError(
                "front reached the right closure zone; domain too short")
        times.append(t)
        xs.append(x)
        umax.append(float(np.max(u)))
        umin.append(float(np.min(u)))
        sups.append(float(np.max(np.abs(rhs(u)))))

    record(0.0)
    for step in range(1, config.n_steps + 1):
        u = rk4_step(u, config.dt, rhs)
        if step % config.record_stride == 0 or step == config.n_steps:
            if not np.all(np.isfinite(u)):
                raise ConvergenceError("blow-up during front run")
            record(step * config.dt)
    times_a = np.array(times)
    xs_a = np.array(xs)
    start = int(len(times_a) * (1.0 - fit_fraction))
    slope = float(np.polyfit(times_a[start:], xs_a[start:], 1)[0])
    return FrontSpeedResult(times=times_a, x_level=xs_a, u_max=np.array(umax),
                            u_min=np.array(umin), rhs_sup=np.array(sups),
                            level=level, fitted_speed=slope)
