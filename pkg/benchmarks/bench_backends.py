"""Benchmark the compiled stencil core against the pure-numpy fallback.

Times the two hot kernels (offset convolution and the fused dispersal RHS)
and a short RK4 wave-style integration, at sizes matching real runs.

Usage: python benchmarks/bench_backends.py
"""

from __future__ import annotations

import time

import numpy as np

from pulsefront import _corepy

try:
    from pulsefront import _core
except ImportError:
    _core = None


def bench(fn, *args, repeat=7, number=20):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        for _ in range(number):
            fn(*args)
        best = min(best, (time.perf_counter() - t0) / number)
    return best


def problem(n, q):
    rng = np.random.default_rng(0)
    pad = q
    u = rng.uniform(0.0, 1.0, n)
    u_pad = np.concatenate([np.full(pad, 1.0), u, np.zeros(pad)])
    offsets = np.arange(-pad + 1, pad, 2, dtype=np.int64)[:q]
    weights = rng.uniform(0.0, 1.0, offsets.size)
    weights /= weights.sum()
    a0 = rng.uniform(0.8, 1.2, n)
    b = np.ones(n)
    return u_pad, u, offsets, weights, a0, b, pad


def rk4_run(mod, n, q, steps=50):
    u_pad, u, offsets, weights, a0, b, pad = problem(n, q)

    def rhs(v):
        vp = np.empty(n + 2 * pad)
        vp[:pad] = 1.0
        vp[pad:pad + n] = v
        vp[pad + n:] = 0.0
        return mod.dispersal_rhs(vp, v, offsets, weights, a0, b, pad)

    dt = 0.02
    v = u.copy()
    t0 = time.perf_counter()
    for _ in range(steps):
        k1 = rhs(v)
        k2 = rhs(v + 0.5 * dt * k1)
        k3 = rhs(v + 0.5 * dt * k2)
        k4 = rhs(v + dt * k3)
        v = v + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return time.perf_counter() - t0


def main():
    mods = [("numpy", _corepy)]
    if _core is not None:
        mods.insert(0, ("compiled", _core))
    else:
        print("compiled extension not available; timing the fallback only\n")

    print(f"{'case':<34}" + "".join(f"{name:>12}" for name, _ in mods)
          + ("     speedup" if len(mods) == 2 else ""))
    cases = [("stencil_apply", 10_825, 64), ("stencil_apply", 43_300, 128),
             ("dispersal_rhs", 10_825, 64), ("dispersal_rhs", 43_300, 128)]
    for kind, n, q in cases:
        args = problem(n, q)
        u_pad, u, offsets, weights, a0, b, pad = args
        times = []
        for _, mod in mods:
            if kind == "stencil_apply":
                t = bench(mod.stencil_apply, u_pad, offsets, weights, n, pad)
            else:
                t = bench(mod.dispersal_rhs, u_pad, u, offsets, weights,
                          a0, b, pad)
            times.append(t)
        row = f"{kind} n={n:>6} q={q:<4}"
        line = f"{row:<34}" + "".join(f"{t * 1e3:>10.3f}ms" for t in times)
        if len(times) == 2:
            line += f"{times[1] / times[0]:>11.2f}x"
        print(line)
    for n, q in ((10_825, 64), (43_300, 128)):
        times = [rk4_run(mod, n, q) for _, mod in mods]
        row = f"rk4 50 steps n={n:>6} q={q:<4}"
        line = f"{row:<34}" + "".join(f"{t * 1e3:>10.1f}ms" for t in times)
        if len(times) == 2:
            line += f"{times[1] / times[0]:>11.2f}x"
        print(line)

    # consistency spot check between the two implementations
    if len(mods) == 2:
        u_pad, u, offsets, weights, a0, b, pad = problem(4096, 64)
        d = np.max(np.abs(
            _core.dispersal_rhs(u_pad, u, offsets, weights, a0, b, pad)
            - _corepy.dispersal_rhs(u_pad, u, offsets, weights, a0, b, pad)))
        print(f"\nmax |compiled - numpy| on a spot check: {d:.3e}")


if __name__ == "__main__":
    main()
