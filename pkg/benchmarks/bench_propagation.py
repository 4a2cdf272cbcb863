#!/usr/bin/env python3
"""Benchmark the compiled propagation kernel against its NumPy twin.

Builds single- and two-mode systems of increasing dimension, drives the
same midpoint-step propagation through both backends, and reports wall
time, speedup, and the worst amplitude difference.  The two backends are
algorithm-identical, so the difference column should sit at the level of
floating-point reordering.

Usage: python3 benchmarks/bench_propagation.py [--T 40] [--steps 400]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from adiadio import _propagate_py
from adiadio.evolution import coherent_initial_state
from adiadio.fock import enumerate_basis
from adiadio.operators import CoherentParams, build_hi, build_hp, get_ramp
from adiadio.poly import parse_equation

try:
    from adiadio import _propagate as _compiled
except ImportError:
    _compiled = None

# the quartic growth of the target spectrum with the cutoff sets the
# substep count, so these sizes keep the whole table under a minute
CASES = [
    ("x - 6", 1, 24),
    ("x - 6", 1, 48),
    ("x y - 6", 2, 13),
    ("x y - 6", 2, 18),
]


def _inputs(equation: str, num_modes: int, cutoff: int, T: float, steps: int):
    p = parse_equation(equation)
    basis = enumerate_basis(num_modes, cutoff)
    coherent = CoherentParams.uniform(0.5, num_modes)
    h0 = build_hi(coherent, basis).dense()
    w = build_hp(p, basis).dense() - h0
    ramp = get_ramp("linear")
    dt = T / steps
    fmid = np.array([float(ramp.f((i + 0.5) / steps)) for i in range(steps)])
    psi = coherent_initial_state(coherent, basis).amplitudes.astype(np.complex128)
    spread0 = float(np.linalg.norm(h0, 2))
    spread_w = float(np.linalg.norm(w, 2))
    return basis.size, h0, w, fmid, dt, psi, spread0, spread_w


def _run(fn, h0, w, fmid, dt, psi, spread0, spread_w):
    work = psi.copy()
    t0 = time.perf_counter()
    stats = fn(h0, w, fmid, dt, work, 1e-10, 48, spread0, spread_w, 25.0)
    return time.perf_counter() - t0, work, stats


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--T", type=float, default=40.0)
    parser.add_argument("--steps", type=int, default=400)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    if _compiled is None:
        print("compiled extension not importable; nothing to compare")
        return 1

    header = (f"{'system':<14} {'dim':>5} {'compiled':>10} {'python':>10} "
              f"{'speedup':>8} {'max |dpsi|':>11} {'substeps':>9}")
    print(header)
    print("-" * len(header))
    for equation, num_modes, cutoff in CASES:
        dim, h0, w, fmid, dt, psi, s0, sw = _inputs(
            equation, num_modes, cutoff, args.T, args.steps)
        t_c = min(_run(_compiled.propagate, h0, w, fmid, dt, psi, s0, sw)[0]
                  for _ in range(args.repeats))
        t_p = min(_run(_propagate_py.propagate, h0, w, fmid, dt, psi, s0, sw)[0]
                  for _ in range(args.repeats))
        _, psi_c, st_c = _run(_compiled.propagate, h0, w, fmid, dt, psi, s0, sw)
        _, psi_p, st_p = _run(_propagate_py.propagate, h0, w, fmid, dt, psi, s0, sw)
        diff = float(np.max(np.abs(psi_c - psi_p)))
        same = "yes" if st_c["substeps"] == st_p["substeps"] else "NO"
        label = f"{equation} c{cutoff}"
        print(f"{label:<14} {dim:>5} {t_c:>9.3f}s {t_p:>9.3f}s "
              f"{t_p / t_c:>7.2f}x {diff:>11.2e} {same:>9}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
