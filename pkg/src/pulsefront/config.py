"""Run configuration: flat key-value sections, strictly validated.

Format (INI-style, parsed with configparser):

    [medium]
    period = 1.0
    a0 = 1.0, 0.4        ; Fourier coefficients c0, a1, b1, a2, b2, ...
    b = 1.0

    [kernel]
    shape = quartic      ; or smooth-bump
    delta0 = 1.0
    q = 64

    [grid]
    n = 64
    left_margin = 20.0   ; line margins in units of delta0
    right_margin = 40.0

    [solver]
    tol_eig = 1e-12
    tol_wave = 1e-6
    dt_safety = 0.45
    t_cap = 150.0

    [experiment]
    xi = 1
    c_multiplier = 1.2   ; or c = <absolute speed>
    ...

Unknown sections or keys are rejected; validation reports every violation,
not just the first.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, fields

from .errors import ConfigError
from . import habitat


def _parse_float(s: str) -> float:
    return float(s)


def _parse_int(s: str) -> int:
    v = float(s)
    if v != int(v):
        raise ValueError(f"expected integer, got {s}")
    return int(v)


def _parse_coeffs(s: str) -> tuple:
    parts = [p.strip() for p in s.split(",") if p.strip()]
    if not parts:
        raise ValueError("empty coefficient list")
    return tuple(float(p) for p in parts)


def _parse_str(s: str) -> str:
    return s.strip()


# key -> (attribute, parser); grouped by section
_SCHEMA = {
    "medium": {
        "period": ("period", _parse_float),
        "a0": ("a0_coeffs", _parse_coeffs),
        "b": ("b_coeffs", _parse_coeffs),
    },
    "kernel": {
        "shape": ("kernel_shape", _parse_str),
        "delta0": ("delta0", _parse_float),
        "q": ("q", _parse_int),
    },
    "grid": {
        "n": ("n", _parse_int),
        "left_margin": ("left_margin", _parse_float),
        "right_margin": ("right_margin", _parse_float),
    },
    "solver": {
        "tol_eig": ("tol_eig", _parse_float),
        "tol_wave": ("tol_wave", _parse_float),
        "dt_safety": ("dt_safety", _parse_float),
        "t_cap": ("t_cap", _parse_float),
        "stationary_tol": ("stationary_tol", _parse_float),
    },
    "experiment": {
        "xi": ("xi", _parse_int),
        "c": ("c", _parse_float),
        "c_multiplier": ("c_multiplier", _parse_float),
        "mu_lo": ("mu_lo", _parse_float),
        "mu_hi": ("mu_hi", _parse_float),
        "mu_count": ("mu_count", _parse_int),
        "d1_factor": ("d1_factor", _parse_float),
        "d2": ("d2", _parse_float),
        "b_factor": ("b_factor", _parse_float),
        "variant_d1_factor": ("variant_d1_factor", _parse_float),
        "variant_d2": ("variant_d2", _parse_float),
        "variant_b_factor": ("variant_b_factor", _parse_float),
        "t_end": ("t_end", _parse_float),
        "m_phases": ("m_phases", _parse_int),
        "level": ("level", _parse_float),
        "domain_length": ("domain_length", _parse_float),
        "perturbation": ("perturbation", _parse_float),
        "seed": ("seed", _parse_int),
        "eps0": ("eps0", _parse_float),
    },
}


@dataclass
class RunConfig:
    """Fully validated run description."""

    period: float = 1.0
    a0_coeffs: tuple = (1.0,)
    b_coeffs: tuple = (1.0,)
    kernel_shape: str = "quartic"
    delta0: float = 1.0
    q: int = 64
    n: int = 64
    left_margin: float = 20.0
    right_margin: float = 40.0
    tol_eig: float = 1e-12
    tol_wave: float = 1e-6
    dt_safety: float = 0.45
    t_cap: float = 150.0
    stationary_tol: float = 1e-10
    xi: int = 1
    c: float | None = None
    c_multiplier: float = 1.2
    mu_lo: float = 1e-2
    mu_hi: float = 20.0
    mu_count: int = 32
    d1_factor: float = 2.0
    d2: float = 0.0
    b_factor: float = 0.5
    variant_d1_factor: float = 4.0
    variant_d2: float = 1.0
    variant_b_factor: float = 0.25
    t_end: float = 100.0
    m_phases: int = 8
    level: float = 0.5
    domain_length: float = 400.0
    perturbation: float = 1.3
    seed: int = 0
    eps0: float = 0.5

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out

    # -- object builders ----------------------------------------------------
    def cell(self) -> habitat.PeriodCell:
        return habitat.build_cell(self.period, self.n)

    def kernel(self) -> habitat.Kernel:
        return habitat.build_kernel(self.kernel_shape, self.delta0, self.q)

    def nonlinearity(self) -> habitat.Nonlinearity:
        cell = self.cell()
        return habitat.Nonlinearity(
            habitat.sample_field(cell, self.a0_coeffs),
            habitat.sample_field(cell, self.b_coeffs),
        )


def _semantic_violations(cfg: RunConfig) -> list:
    v = []
    if cfg.period <= 0:
        v.append("medium.period: must be positive")
    if cfg.n < 8:
        v.append("grid.n: n too small (need n >= 8)")
    if cfg.kernel_shape not in ("quartic", "smooth-bump"):
        v.append(f"kernel.shape: unsupported shape {cfg.kernel_shape!r}")
    if cfg.delta0 <= 0:
        v.append("kernel.delta0: must be positive")
    if cfg.q < 16:
        v.append("kernel.q: q too small (need q >= 16)")
    if cfg.b_coeffs and cfg.period > 0 and cfg.n >= 8:
        h = cfg.period / cfg.n
        if cfg.delta0 <= h:
            v.append("kernel.delta0: kernel support below grid spacing")
        else:
            m = cfg.delta0 / h
            if abs(m - round(m)) > 1e-9:
                v.append("kernel.delta0: delta0/h must be an integer "
                         "(stencil alignment)")
            elif cfg.q > 0 and round(m) % cfg.q:
                v.append("kernel.q: q must divide delta0/h "
                         "(quadrature nodes must land on grid nodes)")
    if not (0 < cfg.dt_safety <= 1):
        v.append("solver.dt_safety: must lie in (0, 1]")
    if cfg.tol_eig <= 0 or cfg.tol_wave <= 0:
        v.append("solver tolerances must be positive")
    if cfg.xi not in (1, -1):
        v.append("experiment.xi: must be +1 or -1")
    if cfg.c is None and cfg.c_multiplier <= 0:
        v.append("experiment.c_multiplier: must be positive")
    if not (0 < cfg.b_factor < 1):
        v.append("experiment.b_factor: must lie in (0, 1)")
    if not (0 < cfg.variant_b_factor < 1):
        v.append("experiment.variant_b_factor: must lie in (0, 1)")
    if cfg.d1_factor < 1 or cfg.variant_d1_factor < 1:
        v.append("experiment.d1_factor: must be >= 1")
    if cfg.d2 < 0 or cfg.variant_d2 < 0:
        v.append("experiment.d2: must be >= 0")
    if cfg.n >= 8 and cfg.m_phases >= 1 and cfg.n % cfg.m_phases:
        v.append("experiment.m_phases: must divide grid.n")
    if cfg.m_phases < 1:
        v.append("experiment.m_phases: must be >= 1")
    if not (0 < cfg.eps0 < 1):
        v.append("experiment.eps0: must lie in (0, 1)")
    try:
        habitat.fourier_values(cfg.a0_coeffs, 0.0, max(cfg.period, 1e-300))
    except Exception as exc:
        v.append(f"medium.a0: {exc}")
    b_vals = None
    if cfg.period > 0 and cfg.n >= 8:
        try:
            cell = cfg.cell()
            b_vals = habitat.fourier_values(cfg.b_coeffs, cell.x, cfg.period)
        except Exception as exc:
            v.append(f"medium.b: {exc}")
        if b_vals is not None and float(b_vals.min()) <= 0:
            v.append("medium.b: must be strictly positive on the cell (H1)")
    return v


def parse_config(text: str) -> RunConfig:
    """Parse and validate; raises ConfigError carrying every violation."""
    parser = configparser.ConfigParser(interpolation=None,
                                       inline_comment_prefixes=(";", "#"))
    try:
        parser.read_file(io.StringIO(text))
    except configparser.Error as exc:
        lineno = getattr(exc, "lineno", None)
        where = f" (line {lineno})" if lineno else ""
        raise ConfigError([f"syntax error{where}: {exc.message.splitlines()[0]}"])
    violations = []
    values = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            violations.append(f"unknown section [{section}]")
            continue
        schema = _SCHEMA[section]
        for key, raw in parser.items(section):
            if key not in schema:
                violations.append(f"unknown key {section}.{key}")
                continue
            attr, parse = schema[key]
            try:
                values[attr] = parse(raw)
            except ValueError as exc:
                violations.append(f"{section}.{key}: {exc}")
    cfg = RunConfig(**values)
    if not violations:
        violations.extend(_semantic_violations(cfg))
    if violations:
        raise ConfigError(violations)
    return cfg
