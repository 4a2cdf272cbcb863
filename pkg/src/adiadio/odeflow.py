"""Direct integration of the eigenpair flow equations.

Instead of rediagonalizing H(s) point by point, the lowest m eigenpairs are
integrated as an ODE in s: energies move with the diagonal matrix element of
W = H_P - H_I in their own eigenvector, eigenvectors rotate through the
first-order coupling B[l,q] / (E_q - E_l).  This is the independent
cross-check on the spectral scanner: same curves, entirely different
machinery.  The formulas require a nonzero commutator [H_I, H_P] and break
down at exact degeneracies, so integration stops a margin short of any
endpoint degeneracy and the terminal value is extrapolated.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .operators import OperatorMatrix, Schedule, commutator_nonzero
from .serialize import write_csv
from .spectral import eigs_lowest

__all__ = [
    "S_MARGIN",
    "LOCAL_TOL",
    "DRIFT_TOL",
    "ORTHO_TOL",
    "DegenerateFlowError",
    "FlowDriftError",
    "OdeFlowState",
    "flow_derivatives",
    "OdeFlowResult",
    "integrate_flow",
]

S_MARGIN = 1e-3
LOCAL_TOL = 1e-8
DRIFT_TOL = 1e-6
ORTHO_TOL = 1e-8
GAP_FLOOR = 1e-8
COMMUTATOR_FLOOR = 1e-12
CROSS_CHECK_EVERY = 10


class DegenerateFlowError(RuntimeError):
    """Two integrated levels collided; the coupling denominator vanished."""

    def __init__(self, message: str, s: float, gap: float):
        super().__init__(message)
        self.s = s
        self.gap = gap


class FlowDriftError(RuntimeError):
    """Integrated energies drifted from a direct diagonalization check."""


@dataclass
class OdeFlowState:
    """Integration variables at one s: energies, eigenvectors, and the data
    that makes the right-hand side self-contained."""

    s: float
    energies: np.ndarray
    vectors: np.ndarray
    w: OperatorMatrix
    ramp_derivative: Callable


def flow_derivatives(state: OdeFlowState,
                     gap_floor: float = GAP_FLOOR) -> tuple[np.ndarray, np.ndarray]:
    """Right-hand side of the eigenpair flow at state.s.

    dE_q/ds = f'(s) B[q,q]; dV_q/ds = f'(s) sum_{l != q} B[l,q]/(E_q - E_l) V_l
    with B = V^T W V.  Raises DegenerateFlowError when any level pair is
    closer than gap_floor.
    """
    e = state.energies
    v = state.vectors
    m = e.shape[0]
    fp = float(state.ramp_derivative(state.s))
    b = v.T @ (state.w.entries @ v)
    de = fp * np.diag(b).copy()
    if m == 1:
        return de, np.zeros_like(v)

    diff = e[np.newaxis, :] - e[:, np.newaxis]  # diff[l, q] = E_q - E_l
    off = ~np.eye(m, dtype=bool)
    min_gap = float(np.min(np.abs(diff[off])))
    if min_gap < gap_floor:
        raise DegenerateFlowError(
            f"levels collide at s = {state.s:.6f} (gap {min_gap:.3e} below "
            f"{gap_floor:.1e}); the first-order flow is singular there",
            s=state.s, gap=min_gap)
    coeff = np.zeros((m, m))
    coeff[off] = fp * b[off] / diff[off]
    dv = v @ coeff
    return de, dv


@dataclass
class OdeFlowResult:
    """Accepted-step history plus the terminal extrapolation and checks."""

    s_hist: np.ndarray
    energy_hist: np.ndarray
    gap_hist: np.ndarray
    defect_hist: np.ndarray
    final_state: OdeFlowState
    e0_extrapolated: float
    checkpoints: list[dict] = field(default_factory=list)
    cross_checks: list[dict] = field(default_factory=list)
    steps_accepted: int = 0
    steps_rejected: int = 0

    def to_csv(self, path: str) -> None:
        m = self.energy_hist.shape[1]
        header = ["s"] + [f"E_{q}" for q in range(m)] + ["min_gap", "ortho_defect"]
        rows = [
            [self.s_hist[i]] + list(self.energy_hist[i])
            + [self.gap_hist[i], self.defect_hist[i]]
            for i in range(len(self.s_hist))
        ]
        write_csv(path, header, rows)


def _rk4(state: OdeFlowState, h: float, gap_floor: float) -> tuple[np.ndarray, np.ndarray]:
    """One classical RK4 step of size h; returns new (energies, vectors)."""
    s0, e0, v0 = state.s, state.energies, state.vectors

    def rhs(s, e, v):
        probe = OdeFlowState(s=s, energies=e, vectors=v, w=state.w,
                             ramp_derivative=state.ramp_derivative)
        return flow_derivatives(probe, gap_floor)

    k1e, k1v = rhs(s0, e0, v0)
    k2e, k2v = rhs(s0 + 0.5 * h, e0 + 0.5 * h * k1e, v0 + 0.5 * h * k1v)
    k3e, k3v = rhs(s0 + 0.5 * h, e0 + 0.5 * h * k2e, v0 + 0.5 * h * k2v)
    k4e, k4v = rhs(s0 + h, e0 + h * k3e, v0 + h * k3v)
    e1 = e0 + (h / 6.0) * (k1e + 2.0 * k2e + 2.0 * k3e + k4e)
    v1 = v0 + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    return e1, v1


def _renormalize(v: np.ndarray) -> tuple[np.ndarray, float]:
    """QR pass pulling the vector set back to orthonormal; returns defect before."""
    gram = v.T @ v
    defect = float(np.abs(gram - np.eye(v.shape[1])).max())
    q, r = np.linalg.qr(v)
    signs = np.sign(np.diag(r))
    signs[signs == 0.0] = 1.0
    return q * signs[np.newaxis, :], defect


def integrate_flow(hi: OperatorMatrix, hp: OperatorMatrix, schedule: Schedule,
                   m: int, *, s_margin: float = S_MARGIN,
                   local_tol: float = LOCAL_TOL, drift_tol: float = DRIFT_TOL,
                   ortho_tol: float = ORTHO_TOL, gap_floor: float = GAP_FLOOR,
                   h_init: float = 1e-3, h_min: float = 1e-12,
                   max_steps: int = 200_000,
                   check_m_doubling: bool = False) -> OdeFlowResult:
    """Integrate the m lowest eigenpairs from s = 0 to s = 1 - s_margin.

    Adaptive RK4 with step doubling (error from the two-half-steps vs
    full-step difference), a stabilizing orthogonalization pass after each
    accepted step, periodic direct-diagonalization cross-checks within
    drift_tol, and forced checkpoints at 1 - 4·margin, 1 - 2·margin, and
    1 - margin from which E_0(1) is extrapolated quadratically.

    Preconditions: [H_I, H_P] must not vanish (the flow would be trivial
    in the wrong basis) and the integrated levels must stay separated.
    """
    if hi.basis is not hp.basis and hi.basis != hp.basis:
        raise ValueError("operators live on different bases")
    if hi.is_sparse or hp.is_sparse:
        raise ValueError("the flow integrator works on dense operators")
    dim = hi.dim
    if not 1 <= m <= dim:
        raise ValueError(f"m = {m} outside [1, {dim}]")
    if not 0.0 < s_margin < 0.25:
        raise ValueError("s_margin must lie in (0, 0.25)")

    comm = commutator_nonzero(hi, hp)
    if comm <= COMMUTATOR_FLOOR:
        raise ValueError(
            f"[H_I, H_P] has Frobenius norm {comm:.3e}; the operators commute "
            "and the flow degenerates to relabeling")

    w = OperatorMatrix(basis=hi.basis, entries=hp.entries - hi.entries)
    ramp = schedule.ramp

    energies, vectors = eigs_lowest(hi, m)
    state = OdeFlowState(s=0.0, energies=energies, vectors=vectors,
                         w=w, ramp_derivative=ramp.df)

    s_end = 1.0 - s_margin
    targets = sorted({1.0 - 4.0 * s_margin, 1.0 - 2.0 * s_margin, s_end})
    targets = [t for t in targets if t > 0.0]
    checkpoints: list[dict] = []
    cross_checks: list[dict] = []

    s_hist = [0.0]
    e_hist = [energies.copy()]
    gap_hist = [_min_gap(energies)]
    defect_hist = [0.0]

    h = h_init
    accepted = 0
    rejected = 0
    target_idx = 0

    def direct_check(s: float, e: np.ndarray) -> dict:
        f = float(ramp.f(s))
        hmat = hi.entries * (1.0 - f) + hp.entries * f
        vals, _ = eigs_lowest(hmat, m)
        worst = float(np.max(np.abs(vals - e) / np.maximum(np.abs(vals), 1.0)))
        entry = {"s": s, "max_rel_diff": worst}
        if worst > drift_tol:
            raise FlowDriftError(
                f"integrated energies drift {worst:.3e} from direct "
                f"diagonalization at s = {s:.6f} (tolerance {drift_tol:.1e})")
        return entry

    while state.s < s_end - 1e-15:
        if accepted + rejected > max_steps:
            raise RuntimeError(f"flow integration exceeded {max_steps} steps")
        # never step past the next forced checkpoint
        limit = targets[target_idx] if target_idx < len(targets) else s_end
        h_eff = min(h, limit - state.s, s_end - state.s)
        if h_eff < h_min:
            h_eff = h_min

        try:
            e_full, v_full = _rk4(state, h_eff, gap_floor)
            half = OdeFlowState(s=state.s, energies=state.energies,
                                vectors=state.vectors, w=w,
                                ramp_derivative=ramp.df)
            e_h1, v_h1 = _rk4(half, 0.5 * h_eff, gap_floor)
            half2 = OdeFlowState(s=state.s + 0.5 * h_eff, energies=e_h1,
                                 vectors=v_h1, w=w, ramp_derivative=ramp.df)
            e_h2, v_h2 = _rk4(half2, 0.5 * h_eff, gap_floor)
        except DegenerateFlowError:
            if h_eff <= h_min * (1.0 + 1e-9):
                raise
            rejected += 1
            h = max(0.25 * h_eff, h_min)
            continue

        err = max(float(np.max(np.abs(e_h2 - e_full))),
                  float(np.max(np.abs(v_h2 - v_full)))) / 15.0
        if err > local_tol and h_eff > h_min * (1.0 + 1e-9):
            rejected += 1
            shrink = 0.9 * (local_tol / err) ** 0.2
            h = max(h_eff * min(max(shrink, 0.2), 0.9), h_min)
            continue

        v_new, defect = _renormalize(v_h2)
        if defect > ortho_tol:
            # drifting off the orthonormal manifold is a step-size problem
            if h_eff <= h_min * (1.0 + 1e-9):
                raise RuntimeError(
                    f"orthonormality defect {defect:.3e} at s = "
                    f"{state.s + h_eff:.6f} exceeds {ortho_tol:.1e} even at "
                    "the minimum step; step control failed")
            rejected += 1
            h = max(0.25 * h_eff, h_min)
            continue
        e_new = e_h2
        order = np.argsort(e_new)
        if not np.array_equal(order, np.arange(m)):
            e_new = e_new[order]
            v_new = v_new[:, order]

        state = OdeFlowState(s=state.s + h_eff, energies=e_new, vectors=v_new,
                             w=w, ramp_derivative=ramp.df)
        accepted += 1
        s_hist.append(state.s)
        e_hist.append(e_new.copy())
        gap_hist.append(_min_gap(e_new))
        defect_hist.append(defect)

        if accepted % CROSS_CHECK_EVERY == 0:
            cross_checks.append(direct_check(state.s, state.energies))

        if target_idx < len(targets) and state.s >= targets[target_idx] - 1e-12:
            entry = direct_check(state.s, state.energies)
            entry["energies"] = state.energies.tolist()
            checkpoints.append(entry)
            target_idx += 1

        if err > 0.0:
            grow = 0.9 * (local_tol / max(err, 1e-300)) ** 0.2
            h = min(h_eff * min(max(grow, 0.2), 5.0), 0.05)
        else:
            h = min(h_eff * 5.0, 0.05)

    if len(checkpoints) < 3:
        raise RuntimeError("integration ended before reaching its checkpoints")

    # quadratic (Lagrange) extrapolation of E_0 through the three checkpoints
    xs = [c["s"] for c in checkpoints[-3:]]
    ys = [c["energies"][0] for c in checkpoints[-3:]]
    e0 = _lagrange_eval(xs, ys, 1.0)

    result = OdeFlowResult(
        s_hist=np.array(s_hist), energy_hist=np.array(e_hist),
        gap_hist=np.array(gap_hist), defect_hist=np.array(defect_hist),
        final_state=state, e0_extrapolated=float(e0),
        checkpoints=checkpoints, cross_checks=cross_checks,
        steps_accepted=accepted, steps_rejected=rejected)

    if check_m_doubling and m < dim:
        m2 = min(2 * m, dim)
        ref = integrate_flow(hi, hp, schedule, m2, s_margin=s_margin,
                             local_tol=local_tol, drift_tol=drift_tol,
                             ortho_tol=ortho_tol, gap_floor=gap_floor,
                             h_init=h_init, h_min=h_min, max_steps=max_steps,
                             check_m_doubling=False)
        diff = abs(ref.e0_extrapolated - result.e0_extrapolated)
        result.checkpoints.append({
            "s": 1.0, "m_doubled": m2, "e0_difference": diff})
    return result


def _min_gap(e: np.ndarray) -> float:
    if e.shape[0] < 2:
        return math.inf
    return float(np.min(np.diff(np.sort(e))))


def _lagrange_eval(xs: list[float], ys: list[float], x: float) -> float:
    total = 0.0
    for i, (xi, yi) in enumerate(zip(xs, ys)):
        li = 1.0
        for j, xj in enumerate(xs):
            if j != i:
                li *= (x - xj) / (xi - xj)
        total += yi * li
    return total
