"""State preparation and schedule-driven time evolution.

The propagator is piecewise-constant at step midpoints: each step applies
exp(-i dt H(f_k)) with f_k the ramp value at the step's midpoint, which is
second order in dt for smooth ramps.  The step exponential itself is applied
either through the Lanczos kernel (spread-adaptive sub-steps, compiled when
available) or, for small dimensions with very stiff diagonals, through an
exact per-step eigendecomposition; both preserve the norm to solver accuracy.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import kernels
from .fock import FockBasis
from .operators import CoherentParams, OperatorMatrix, Schedule
from .serialize import dumps, write_csv

__all__ = [
    "NORM_TOL",
    "STEP_TOL",
    "EvolutionError",
    "TruncationTailError",
    "QuantumState",
    "Distribution",
    "coherent_initial_state",
    "evolve",
    "probabilities",
]

NORM_TOL = 1e-9
STEP_TOL = 1e-10
HALVING_TOL = 1e-7
DEFAULT_TAIL_TOL = 1e-3
KMAX = 48
Q_TARGET = 25.0
EIGH_DIM_LIMIT = 1024
MAX_STEPS = 1_048_576

DISTRIBUTION_SOURCES = ("truncated_model", "sampled_histogram")


class EvolutionError(RuntimeError):
    """Propagation failed an acceptance check (norm drift, halving, budget)."""


class TruncationTailError(ValueError):
    """Too much coherent-state weight lies outside the truncated basis."""


@dataclass
class QuantumState:
    """Complex amplitudes over a FockBasis, unit norm within norm_tol."""

    basis: FockBasis
    amplitudes: np.ndarray
    time_label: float = 0.0
    tail_mass: float | None = None
    stats: dict | None = None

    def __post_init__(self):
        amps = np.ascontiguousarray(self.amplitudes, dtype=np.complex128)
        if amps.shape != (self.basis.size,):
            raise ValueError(
                f"amplitude vector has shape {amps.shape}, expected ({self.basis.size},)")
        self.amplitudes = amps
        drift = abs(float(np.linalg.norm(amps)) - 1.0)
        if drift > NORM_TOL:
            raise ValueError(
                f"state norm drifts from 1 by {drift:.3e} (tolerance {NORM_TOL:.1e})")

    def probability_of(self, occupations) -> float:
        idx = self.basis.index.get(tuple(occupations))
        if idx is None:
            return 0.0
        return float(abs(self.amplitudes[idx]) ** 2)


@dataclass
class Distribution:
    """Probabilities over a FockBasis, summing to 1 within 1e-12.

    source records how it was produced; accuracy is the sup-norm guarantee
    for sampled histograms (None for exact model distributions); counts are
    the raw draws when sampled.
    """

    basis: FockBasis
    probs: np.ndarray
    source: str
    accuracy: float | None = None
    counts: np.ndarray | None = None

    def __post_init__(self):
        if self.source not in DISTRIBUTION_SOURCES:
            raise ValueError(f"unknown distribution source {self.source!r}")
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.shape != (self.basis.size,):
            raise ValueError(
                f"probability vector has shape {probs.shape}, expected ({self.basis.size},)")
        if probs.size and float(probs.min()) < 0.0:
            raise ValueError("negative probability")
        total = float(probs.sum())
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        self.probs = probs

    def probability_of(self, occupations) -> float:
        idx = self.basis.index.get(tuple(occupations))
        return 0.0 if idx is None else float(self.probs[idx])

    def top_states(self, k: int = 10) -> list[tuple[tuple[int, ...], float]]:
        order = np.argsort(self.probs)[::-1][:k]
        return [(self.basis.states[i], float(self.probs[i])) for i in order]

    def to_dict(self) -> dict:
        out = {
            "basis": self.basis.meta(),
            "source": self.source,
            "accuracy": self.accuracy,
            "probabilities": [
                {"state": list(s), "p": float(p)}
                for s, p in zip(self.basis.states, self.probs)
            ],
        }
        if self.counts is not None:
            out["counts"] = [int(c) for c in self.counts]
        return out

    def to_json(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write(dumps(self.to_dict()))
            fh.write("\n")

    def to_csv(self, path: str) -> None:
        header = [f"n{i}" for i in range(self.basis.num_modes)] + ["p"]
        rows = [list(s) + [float(p)] for s, p in zip(self.basis.states, self.probs)]
        write_csv(path, header, rows)


def coherent_initial_state(coherent: CoherentParams, basis: FockBasis,
                           tail_tol: float = DEFAULT_TAIL_TOL) -> QuantumState:
    """Mode product of coherent states, projected onto the basis and renormalized.

    The discarded tail mass (probability outside the truncation) is checked
    against tail_tol and recorded on the returned state.
    """
    if len(coherent.alphas) != basis.num_modes:
        raise ValueError(
            f"got {len(coherent.alphas)} displacements, basis has {basis.num_modes} modes")
    max_n = max(max(s) for s in basis.states)
    per_mode = np.empty((basis.num_modes, max_n + 1))
    for i, a in enumerate(coherent.alphas):
        amp = math.exp(-0.5 * a * a)
        for n in range(max_n + 1):
            per_mode[i, n] = amp
            amp *= a / math.sqrt(n + 1)

    amps = np.empty(basis.size, dtype=np.complex128)
    for idx, state in enumerate(basis.states):
        v = 1.0
        for i, n in enumerate(state):
            v *= per_mode[i, n]
        amps[idx] = v

    inside = float(np.sum(np.abs(amps) ** 2))
    tail = max(0.0, 1.0 - inside)
    if tail > tail_tol:
        raise TruncationTailError(
            f"coherent state keeps {tail:.3e} of its weight outside the basis "
            f"(tolerance {tail_tol:.1e}); raise the cutoff or shrink the displacement")
    amps /= math.sqrt(inside)
    return QuantumState(basis=basis, amplitudes=amps, time_label=0.0,
                        tail_mass=tail)


def _gershgorin_spread(m) -> float:
    if sp.issparse(m):
        diag = m.diagonal()
        radius = np.asarray(np.abs(m).sum(axis=1)).ravel() - np.abs(diag)
    else:
        diag = np.diag(m)
        radius = np.abs(m).sum(axis=1) - np.abs(diag)
    if diag.size == 0:
        return 0.0
    return float((diag + radius).max() - (diag - radius).min())


def _dense_c(om: OperatorMatrix) -> np.ndarray:
    d = om.dense()
    return np.ascontiguousarray(d, dtype=np.float64)


def evolve(hi: OperatorMatrix, hp: OperatorMatrix, schedule: Schedule,
           psi0: QuantumState, *, steps: int | None = None,
           step_tol: float = STEP_TOL, norm_tol: float = NORM_TOL,
           method: str = "auto", adaptive: bool = True,
           halving_tol: float = HALVING_TOL, kmax: int = KMAX,
           q_target: float = Q_TARGET, max_steps: int = MAX_STEPS) -> QuantumState:
    """Evolve psi0 through the interpolated Hamiltonian over schedule.total_time.

    steps defaults to max(1000, ceil(8 T)); stiffness beyond that resolution
    is handled inside the step exponential, not by the outer count.  With
    adaptive=True the run is repeated at doubled step count until no
    probability moves by more than halving_tol, and the finer result is
    returned.  Norm drift beyond norm_tol raises EvolutionError.
    """
    if hi.basis is not hp.basis and hi.basis != hp.basis:
        raise ValueError("operators live on different bases")
    if psi0.basis is not hi.basis and psi0.basis != hi.basis:
        raise ValueError("state lives on a different basis")
    T = schedule.total_time
    if not (T > 0.0) or not math.isfinite(T):
        raise ValueError(f"total_time must be positive and finite, got {T!r}")
    if method not in ("auto", "krylov", "eigh"):
        raise ValueError(f"unknown method {method!r}")

    dim = hi.dim
    if dim > 8192:
        raise ValueError(
            "dense propagation above 8192 states is not supported; lower the cutoff")
    h0 = _dense_c(hi)
    w = _dense_c(hp) - h0
    w = np.ascontiguousarray(w)

    spread0 = _gershgorin_spread(h0)
    spread_w = _gershgorin_spread(w)

    n_steps = steps if steps is not None else max(1000, int(math.ceil(8.0 * T)))
    if n_steps < 1:
        raise ValueError("steps must be positive")
    if n_steps > max_steps:
        raise EvolutionError(
            f"requested {n_steps} steps exceeds the budget of {max_steps}")

    def run(n: int) -> tuple[np.ndarray, dict]:
        dt = T / n
        s_mid = (np.arange(n) + 0.5) / n
        fmid = np.ascontiguousarray(
            np.asarray(schedule.ramp.f(s_mid), dtype=np.float64))
        psi = np.array(psi0.amplitudes, dtype=np.complex128, copy=True)
        nrm = float(np.linalg.norm(psi))
        if nrm == 0.0:
            raise ValueError("initial state has zero norm")
        psi /= nrm

        use_eigh = method == "eigh" or (
            method == "auto" and dim <= EIGH_DIM_LIMIT
            and dt * (spread0 + spread_w) > 2.5 * dim)
        if use_eigh:
            drift = 0.0
            hbuf = np.empty_like(h0)
            for k in range(n):
                np.multiply(w, fmid[k], out=hbuf)
                hbuf += h0
                lam, u = np.linalg.eigh(hbuf)
                psi = u @ (np.exp(-1j * lam * dt) * (u.T @ psi))
                drift = max(drift, abs(float(np.linalg.norm(psi)) - 1.0))
            stats = {"method": "eigh", "backend": "numpy", "steps": n,
                     "substeps": n, "max_krylov": 0, "max_norm_drift": drift,
                     "splits": 0}
        else:
            report = kernels.propagate(h0, w, fmid, dt, psi, step_tol, kmax,
                                       spread0, spread_w, q_target)
            stats = {"method": "krylov", "backend": kernels.BACKEND,
                     "steps": n, **report}
        return psi, stats

    psi, stats = run(n_steps)
    halvings = 0
    halving_diff = None
    if adaptive:
        while True:
            finer = n_steps * 2
            if finer > max_steps:
                raise EvolutionError(
                    f"step halving did not converge within the budget of "
                    f"{max_steps} steps (last diff {halving_diff!r})")
            psi_f, stats_f = run(finer)
            diff = float(np.max(np.abs(np.abs(psi_f) ** 2 - np.abs(psi) ** 2)))
            halvings += 1
            psi, stats = psi_f, stats_f
            n_steps = finer
            halving_diff = diff
            if diff <= halving_tol:
                break

    drift = stats["max_norm_drift"]
    if drift > norm_tol:
        raise EvolutionError(
            f"norm drift {drift:.3e} exceeds the tolerance {norm_tol:.1e}")
    stats["halvings"] = halvings
    stats["halving_diff"] = halving_diff
    return QuantumState(basis=hi.basis, amplitudes=psi, time_label=T,
                        stats=stats)


def probabilities(state: QuantumState) -> Distribution:
    """Exact occupation distribution of a state over its own basis."""
    p = np.abs(state.amplitudes) ** 2
    p /= p.sum()
    return Distribution(basis=state.basis, probs=p, source="truncated_model")
