"""Config-driven front end: parse, dispatch, emit reproducible artifacts.

Exit codes: 0 success, 1 usage/config error, 2 hypothesis-check failure,
3 numerical non-convergence, 4 invariant violation.  Every failure that
occurs after dispatch starts is also recorded in the run manifest.

All CSV artifacts use 17-significant-digit decimal formatting so that
identical config and version produce byte-identical files; the manifest
differs only in its wall-clock field.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, backend_name
from . import dynamics, habitat, spectral, speed, waves
from .config import RunConfig, parse_config
from .errors import (ConfigError, ConvergenceError, HypothesisError,
                     InvariantError, PulsefrontError)

logger = logging.getLogger(__name__)

COMMANDS = ("hypotheses", "eig", "speed", "spread", "wave", "stability",
            "uniqueness")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_HYPOTHESIS = 2
EXIT_NONCONVERGENCE = 3
EXIT_INVARIANT = 4

_STATUS = {
    EXIT_OK: "ok",
    EXIT_HYPOTHESIS: "hypothesis-failure",
    EXIT_NONCONVERGENCE: "non-convergence",
    EXIT_INVARIANT: "invariant-violation",
}


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(_fmt(v) for v in row) + "\n")


@dataclass
class RunManifest:
    """Reproducible record of one command run."""

    command: str
    config: dict
    version: str
    backend: str
    threads: int
    wall_clock_s: float
    constants: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    artifacts: list = field(default_factory=list)
    exit_status: int = EXIT_OK
    status: str = "ok"
    error: str | None = None

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        return cls(**json.loads(text))

    def write(self, out_dir: Path) -> Path:
        path = out_dir / "manifest.json"
        path.write_text(self.to_json() + "\n", encoding="utf-8")
        return path


def _jsonable(d: dict) -> dict:
    out = {}
    for k, v in d.items():
        if isinstance(v, (np.floating, np.integer)):
            v = v.item()
        out[k] = v
    return out


# ---------------------------------------------------------------------------
# command bodies


def _medium(cfg: RunConfig):
    cell = cfg.cell()
    kernel = cfg.kernel()
    nl = cfg.nonlinearity()
    return cell, kernel, nl


def _speed_result(cfg: RunConfig, nl, kernel, cell):
    return speed.spreading_speed(cfg.xi, nl.a0, kernel, cell,
                                 search=(cfg.mu_lo, cfg.mu_hi), tol=cfg.tol_eig)


def _wave_speed(cfg: RunConfig, result) -> float:
    return cfg.c if cfg.c is not None else cfg.c_multiplier * result.c_star


def _cmd_hypotheses(cfg: RunConfig, out_dir: Path, manifest: RunManifest):
    cell, kernel, nl = _medium(cfg)
    report = habitat.check_hypotheses(nl, kernel, cell)
    manifest.checks["hypotheses"] = report.to_dict()
    diag = spectral.refinement_diagnostic(cfg.xi, 0.0, nl.a0, kernel, cell)
    manifest.checks["eigenfunction_refinement"] = {
        "min_phi_coarse": diag.min_phi_coarse,
        "min_phi_fine": diag.min_phi_fine,
        "flagged": diag.flagged,
        "message": diag.message,
    }
    if not report.ok:
        raise HypothesisError(
            "standing hypotheses fail: "
            + ", ".join(h for h, v in (("H1", report.h1), ("H2", report.h2),
                                       ("H4", report.h4)) if not v))


def _cmd_eig(cfg: RunConfig, out_dir: Path, manifest: RunManifest):
    cell, kernel, nl = _medium(cfg)
    mu_grid = np.geomspace(cfg.mu_lo, cfg.mu_hi, cfg.mu_count)
    curve = spectral.lambda0_curve(cfg.xi, nl.a0, mu_grid, kernel, cell,
                                   tol=cfg.tol_eig)
    path = out_dir / "eig.csv"
    write_csv(path, ["mu", "lambda0", "residual", "iters", "min_phi", "max_phi"],
              zip(curve.mu, curve.lam0, curve.residual, curve.iterations,
                  curve.min_phi, curve.max_phi))
    manifest.artifacts.append(path.name)
    manifest.constants["lambda0_at_mu0"] = spectral.principal_eigenpair(
        spectral.assemble(cfg.xi, 0.0, nl.a0, kernel, cell), tol=cfg.tol_eig).lam


def _cmd_speed(cfg: RunConfig, out_dir: Path, manifest: RunManifest):
    cell, kernel, nl = _medium(cfg)
    result = _speed_result(cfg, nl, kernel, cell)
    payload = {
        "c_star": result.c_star,
        "mu_star": result.mu_star,
        "bracket": list(result.bracket),
        "curve": [{"mu": float(m), "lambda0": float(l)}
                  for m, l in zip(result.curve.mu, result.curve.lam0)],
    }
    path = out_dir / "speed.json"
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    manifest.artifacts.append(path.name)
    manifest.constants.update(c_star=result.c_star, mu_star=result.mu_star)


def _cmd_spread(cfg: RunConfig, out_dir: Path, manifest: RunManifest):
    cell, kernel, nl = _medium(cfg)
    result = _speed_result(cfg, nl, kernel, cell)
    u_plus = dynamics.stationary_solution(nl, kernel, cell,
                                          tol=cfg.stationary_tol)
    d0 = kernel.delta0
    domain = dynamics.build_line(-20.0 * d0, cfg.domain_length * d0, cell)
    if cfg.level <= 0 or cfg.level >= u_plus.min:
        raise InvariantError("experiment.level must lie in (0, min u+)")
    nodes = domain.nodes
    u0 = np.where(nodes <= 0.0, u_plus.at(nodes), 0.0)
    dt = cfg.dt_safety * dynamics.stability_dt_bound(nl)
    steps = int(np.ceil(cfg.t_end / dt))
    dt = cfg.t_end / steps
    stride = max(1, int(round(1.0 / dt)))
    op = dynamics.LineOperator(nl, kernel, domain, u_plus)
    config = dynamics.IntegratorConfig(dt=dt, t_end=cfg.t_end,
                                       record_stride=stride)
    config.validate_for(nl)
    res = dynamics.front_speed_measurement(u0, op.rhs, domain, kernel,
                                           cfg.level, config)
    path = out_dir / "spread.csv"
    write_csv(path, ["t", "x_level", "u_max", "u_min", "rhs_sup"],
              zip(res.times, res.x_level, res.u_max, res.u_min, res.rhs_sup))
    manifest.artifacts.append(path.name)
    manifest.constants.update(c_star=result.c_star, fitted_speed=res.fitted_speed,
                              level=cfg.level)
    manifest.checks["speed_rel_error"] = abs(res.fitted_speed - result.c_star) / result.c_star


def _build_wave(cfg: RunConfig):
    cell, kernel, nl = _medium(cfg)
    result = _speed_result(cfg, nl, kernel, cell)
    c = _wave_speed(cfg, result)
    params = speed.build_wave_params(
        c, cfg.xi, nl, kernel, cell, d1_factor=cfg.d1_factor, d2=cfg.d2,
        b_factor=cfg.b_factor, speed_result=result, tol=cfg.tol_eig)
    m_store = 32
    if cell.n % m_store or m_store % cfg.m_phases:
        raise ConfigError([
            "grid.n must be divisible by 32 and experiment.m_phases must "
            "divide 32 for wave extraction"])
    domain = waves.make_wave_domain(params, cfg.t_cap, cfg.left_margin,
                                    cfg.right_margin)
    pair = waves.build_sub_super_pair(params, domain)
    wave = waves.extract_pulsating_wave(pair, t_cap=cfg.t_cap,
                                        tol_wave=cfg.tol_wave,
                                        m_store=m_store,
                                        dt_safety=cfg.dt_safety)
    return params, wave


def _cmd_wave(cfg: RunConfig, out_dir: Path, manifest: RunManifest):
    params, wave = _build_wave(cfg)
    manifest.constants.update(_jsonable(params.constants_dict()))
    manifest.checks["wave"] = _jsonable(wave.checks)
    for cand in (waves.sub_combined_candidate(params),
                 waves.super_candidate(params),
                 waves.sub_small_candidate(params)):
        rep = waves.residual_sign_check(cand, params)
        manifest.checks[f"residual_{cand.label}"] = {
            "kind": rep.kind, "max_violation": rep.max_violation,
            "tol_q": rep.tol_q, "ok": rep.ok,
        }
    fit = waves.tail_decay_fit(wave)
    manifest.constants["mu_hat"] = fit.mu_hat
    manifest.checks["tail"] = {"mu_rel_error": fit.rel_error,
                               "ratio_right_edge": fit.ratio_right_edge}
    der = waves.time_derivative_checks(wave)
    manifest.checks["derivatives"] = {
        "ut_min": der.ut_min, "left_sup": der.left_sup,
        "tail_ratio_dev": der.tail_ratio_dev, "ok": der.ok(),
    }
    cst = waves.squeeze_constants(wave, eps0=cfg.eps0)
    sq = waves.verify_squeeze(wave, cst, (cst.eps0 / 4.0, cst.eps0 / 2.0))
    manifest.constants.update(M0=cst.M0, sigma0=cst.sigma0, eta0=cst.eta0,
                              l=cst.l, eta=cst.eta)
    manifest.checks["squeeze"] = {
        "max_super_violation": sq.max_super_violation,
        "max_sub_violation": sq.max_sub_violation,
        "tol_s": sq.tol_s, "n_points": sq.n_points, "ok": sq.ok,
    }
    stride = wave.m_store // cfg.m_phases
    rows = []
    for k_out in range(cfg.m_phases):
        prof = wave.frame_profile(k_out * stride)[wave.trust]
        for eta, psi in zip(wave.eta[wave.trust], prof):
            rows.append((eta, k_out, psi))
    path = out_dir / "profiles.csv"
    write_csv(path, ["eta", "phase_k", "psi"], rows)
    manifest.artifacts.append(path.name)


def _cmd_stability(cfg: RunConfig, out_dir: Path, manifest: RunManifest):
    params, wave = _build_wave(cfg)
    manifest.constants.update(_jsonable(params.constants_dict()))
    result = waves.stability_experiment(wave, factor=cfg.perturbation,
                                        t_end=cfg.t_end,
                                        right_margin=cfg.right_margin)
    path = out_dir / "series.csv"
    write_csv(path, ["t", "sup_ratio_error"],
              zip(result.times, result.sup_ratio_err))
    manifest.artifacts.append(path.name)
    manifest.checks["stability"] = {
        "initial": float(result.sup_ratio_err[0]),
        "final": float(result.sup_ratio_err[-1]),
        "hypothesis_met": result.hypothesis_met,
        "note": result.note,
    }


def _cmd_uniqueness(cfg: RunConfig, out_dir: Path, manifest: RunManifest):
    cell, kernel, nl = _medium(cfg)
    result = _speed_result(cfg, nl, kernel, cell)
    c = _wave_speed(cfg, result)
    u_plus = dynamics.stationary_solution(nl, kernel, cell,
                                          tol=cfg.stationary_tol)
    par_a = speed.build_wave_params(
        c, cfg.xi, nl, kernel, cell, d1_factor=cfg.d1_factor, d2=cfg.d2,
        b_factor=cfg.b_factor, speed_result=result, u_plus=u_plus,
        tol=cfg.tol_eig)
    par_b = speed.build_wave_params(
        c, cfg.xi, nl, kernel, cell, d1_factor=cfg.variant_d1_factor,
        d2=cfg.variant_d2, b_factor=cfg.variant_b_factor,
        speed_result=result, u_plus=u_plus, tol=cfg.tol_eig)
    rep = waves.uniqueness_experiment(par_a, par_b, t_cap=cfg.t_cap,
                                      tol_wave=cfg.tol_wave)
    manifest.constants.update(c=c, c_star=result.c_star)
    manifest.checks["uniqueness"] = {
        "distance": rep.distance, "gap_a": rep.gap_a, "gap_b": rep.gap_b,
        "bound": 2.0 * cfg.tol_wave, "ok": rep.distance <= 2.0 * cfg.tol_wave,
    }


_BODIES = {
    "hypotheses": _cmd_hypotheses,
    "eig": _cmd_eig,
    "speed": _cmd_speed,
    "spread": _cmd_spread,
    "wave": _cmd_wave,
    "stability": _cmd_stability,
    "uniqueness": _cmd_uniqueness,
}


def dispatch(command: str, cfg: RunConfig, out_dir, threads: int = 0) -> RunManifest:
    """Run one command, writing artifacts and the manifest to out_dir."""
    if command not in COMMANDS:
        raise ValueError(f"unknown command {command!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(command=command, config=cfg.to_dict(),
                           version=__version__, backend=backend_name(),
                           threads=threads, wall_clock_s=0.0)
    start = time.perf_counter()
    try:
        _BODIES[command](cfg, out_dir, manifest)
    except HypothesisError as exc:
        manifest.exit_status, manifest.error = EXIT_HYPOTHESIS, str(exc)
    except ConvergenceError as exc:
        manifest.exit_status, manifest.error = EXIT_NONCONVERGENCE, str(exc)
    except (InvariantError, ConfigError) as exc:
        manifest.exit_status, manifest.error = EXIT_INVARIANT, str(exc)
    manifest.status = _STATUS[manifest.exit_status]
    manifest.wall_clock_s = time.perf_counter() - start
    manifest.write(out_dir)
    return manifest


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pulsefront",
        description="Spreading speeds and pulsating waves of nonlocal "
                    "monostable equations in periodic media.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="path to the run config")
    parser.add_argument("--out-dir", required=True, help="artifact directory")
    parser.add_argument("--threads", type=int, default=0,
                        help="worker threads (0 = auto); runs are "
                             "deterministic regardless")
    parser.add_argument("--log-level", default="warning",
                        choices=("debug", "info", "warning", "error"))
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level.upper()))
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = parse_config(text)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return EXIT_USAGE
    manifest = dispatch(args.command, cfg, args.out_dir, threads=args.threads)
    if manifest.error:
        print(f"{manifest.status}: {manifest.error}", file=sys.stderr)
    return manifest.exit_status


if __name__ == "__main__":
    sys.exit(main())
