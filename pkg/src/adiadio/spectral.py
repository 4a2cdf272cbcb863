"""Low-lying spectra along the interpolation path.

The flow scanner diagonalizes H(s) on a grid and tracks curves through
crossings by maximum-overlap assignment between consecutive eigenvector
sets, so a curve keeps its identity even when the energy ordering swaps.
The gap report feeds the adiabatic runtime heuristic: minimal tracked gap,
the largest ground-to-excited coupling of the difference operator, and the
resulting minimal-time estimate.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg
from scipy.optimize import linear_sum_assignment

from .operators import OperatorMatrix, Schedule
from .serialize import dumps, write_csv

__all__ = [
    "EigsolverError",
    "DegenerateGapError",
    "eigs_lowest",
    "FlowState",
    "spectral_flow",
    "GapReport",
    "gap_and_time",
]

RESIDUAL_FACTOR = 1e-9
ORTHONORMALITY_TOL = 1e-10
DEFAULT_OVERLAP_FLOOR = 0.7
GAP_FLOOR = 1e-8
SAFETY_FACTOR = 10.0
# below this dimension a sparse operator is densified for eigensolving;
# subset eigh is both faster and immune to Lanczos misconvergence there
SPARSE_DENSE_CROSSOVER = 2048


class EigsolverError(RuntimeError):
    """Eigenpairs failed the residual or orthonormality acceptance check."""


class DegenerateGapError(RuntimeError):
    """Tracked gap fell below the floor; a runtime estimate would be meaningless."""

    def __init__(self, message: str, s: float, gap: float):
        super().__init__(message)
        self.s = s
        self.gap = gap


def _norm_bound(entries) -> float:
    # infinity norm, cheap and good enough to scale the residual tolerance
    if sp.issparse(entries):
        return float(np.abs(entries).sum(axis=1).max())
    return float(np.abs(entries).sum(axis=1).max()) if entries.size else 0.0


def eigs_lowest(op: OperatorMatrix | np.ndarray, m: int,
                check: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """The m lowest eigenpairs, ascending; vectors in columns.

    Accepts an OperatorMatrix or a bare symmetric ndarray.  Every returned
    pair must pass ||H v - λ v|| <= 1e-9 · ||H|| and the set must be
    orthonormal to 1e-10, otherwise EigsolverError.
    """
    entries = op.entries if isinstance(op, OperatorMatrix) else op
    dim = entries.shape[0]
    if not 1 <= m <= dim:
        raise ValueError(f"m = {m} outside [1, {dim}]")

    if sp.issparse(entries):
        if m >= dim - 1 or dim <= SPARSE_DENSE_CROSSOVER:
            dense = entries.toarray()
            vals, vecs = scipy.linalg.eigh(dense, subset_by_index=(0, m - 1))
        else:
            # plain Lanczos ("SA") can skip an extreme eigenvalue inside a
            # degenerate cluster, and its random start breaks run-to-run
            # reproducibility; shift-invert below a Gershgorin lower bound
            # avoids the skips. The start vector must be random so restarts
            # can populate degenerate clusters, but fixed-seed so repeated
            # runs agree bit for bit.
            diag = entries.diagonal()
            radii = np.asarray(np.abs(entries).sum(axis=1)).ravel() - np.abs(diag)
            lower = float((diag - radii).min())
            sigma = lower - 0.1 * (abs(lower) + 1.0)
            v0 = np.random.default_rng(0x1F0C).normal(size=dim)
            ncv = min(dim, max(2 * m + 1, 40))
            vals, vecs = sp.linalg.eigsh(entries, k=m, sigma=sigma,
                                         which="LM", v0=v0, ncv=ncv)
            order = np.argsort(vals)
            vals, vecs = vals[order], vecs[:, order]
    else:
        vals, vecs = scipy.linalg.eigh(entries, subset_by_index=(0, m - 1))

    if check:
        scale = max(_norm_bound(entries), 1.0)
        resid = entries @ vecs - vecs * vals[np.newaxis, :]
        worst = float(np.linalg.norm(resid, axis=0).max())
        if worst > RESIDUAL_FACTOR * scale:
            raise EigsolverError(
                f"eigenpair residual {worst:.3e} above {RESIDUAL_FACTOR * scale:.3e}")
        gram = vecs.T @ vecs - np.eye(m)
        defect = float(np.abs(gram).max())
        if defect > ORTHONORMALITY_TOL:
            raise EigsolverError(
                f"eigenvector set orthonormality defect {defect:.3e}")
    return vals, vecs


@dataclass
class FlowState:
    """Tracked low-lying spectrum along the schedule grid.

    curves[i, q] is the energy of tracked curve q at s_grid[i]; at each grid
    point the multiset {curves[i, :]} equals the m lowest eigenvalues, but a
    single column may cross others.  vectors[i][:, q] is the matching
    eigenvector (sign-aligned along s) when vectors were stored.
    """

    s_grid: np.ndarray
    curves: np.ndarray
    vectors: np.ndarray | None
    schedule: Schedule
    basis_meta: dict
    min_overlaps: np.ndarray
    warnings: list[dict] = field(default_factory=list)

    @property
    def num_tracked(self) -> int:
        return self.curves.shape[1]

    def to_csv(self, path: str) -> None:
        header = ["s"] + [f"E_{q}" for q in range(self.num_tracked)]
        rows = [[self.s_grid[i]] + list(self.curves[i])
                for i in range(len(self.s_grid))]
        write_csv(path, header, rows)

    def to_dict(self) -> dict:
        return {
            "basis": self.basis_meta,
            "ramp": self.schedule.ramp.name,
            "s_grid": self.s_grid.tolist(),
            "curves": self.curves.tolist(),
            "min_overlaps": self.min_overlaps.tolist(),
            "tracking_warnings": self.warnings,
        }

    def to_json(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write(dumps(self.to_dict()))
            fh.write("\n")


def spectral_flow(hi: OperatorMatrix, hp: OperatorMatrix, schedule: Schedule,
                  m: int, overlap_floor: float = DEFAULT_OVERLAP_FLOOR,
                  store_vectors: bool = True, jobs: int = 1) -> FlowState:
    """Diagonalize H(s) on the schedule grid and track m curves by overlap.

    Curves are matched between consecutive grid points with a maximum-overlap
    assignment; any matched overlap below overlap_floor is recorded as a
    tracking warning (likely under-resolved crossing).  m is clamped to the
    basis size.
    """
    if hi.basis is not hp.basis and hi.basis != hp.basis:
        raise ValueError("operators live on different bases")
    if m < 1:
        raise ValueError("m must be at least 1")
    m = min(m, hi.dim)
    grid = schedule.grid
    fvals = [float(schedule.ramp.f(s)) for s in grid]

    def solve(f):
        if f == 0.0:
            h = hi.entries.copy()
        elif f == 1.0:
            h = hp.entries.copy()
        else:
            h = hi.entries * (1.0 - f) + hp.entries * f
            if sp.issparse(h):
                h = h.tocsr()
        return eigs_lowest(h, m)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            solved = list(pool.map(solve, fvals))
    else:
        solved = [solve(f) for f in fvals]

    npts = len(grid)
    curves = np.empty((npts, m))
    vectors = np.empty((npts, hi.dim, m)) if store_vectors else None
    min_overlaps = np.empty(npts)
    min_overlaps[0] = 1.0
    track_warnings: list[dict] = []

    vals, vecs = solved[0]
    curves[0] = vals
    if store_vectors:
        vectors[0] = vecs
    prev_vecs = vecs

    for i in range(1, npts):
        vals, vecs = solved[i]
        overlap = prev_vecs.T @ vecs
        rows, cols = linear_sum_assignment(-np.abs(overlap))
        perm = np.empty(m, dtype=int)
        perm[rows] = cols
        vals = vals[perm]
        vecs = vecs[:, perm]
        matched = np.abs(overlap[rows, perm[rows]])
        min_overlaps[i] = float(matched.min())
        if min_overlaps[i] < overlap_floor:
            worst = int(np.argmin(matched))
            track_warnings.append({
                "s": float(grid[i]),
                "curve": worst,
                "overlap": float(matched[worst]),
                "message": "assignment overlap below floor; grid may be too coarse",
            })
        # sign-align so curves vary continuously
        signs = np.sign(np.sum(prev_vecs * vecs, axis=0))
        signs[signs == 0.0] = 1.0
        vecs = vecs * signs[np.newaxis, :]
        curves[i] = vals
        if store_vectors:
            vectors[i] = vecs
        prev_vecs = vecs

    return FlowState(s_grid=grid.copy(), curves=curves, vectors=vectors,
                     schedule=schedule, basis_meta=hi.basis.meta(),
                     min_overlaps=min_overlaps, warnings=track_warnings)


@dataclass(frozen=True)
class GapReport:
    """Minimal tracked gap, max ground coupling of W = H_P - H_I, and the
    safety-scaled runtime floor (safety · ||ΔH|| / gap²)."""

    gap: float
    gap_location: float
    delta_h_norm: float
    t_min: float
    grid_points: int
    refinements: int

    def to_dict(self) -> dict:
        return {
            "gap": self.gap,
            "gap_location": self.gap_location,
            "delta_h_norm": self.delta_h_norm,
            "t_min": self.t_min,
            "grid_points": self.grid_points,
            "refinements": self.refinements,
        }


def _gap_dh_scan(flow: FlowState, w_entries) -> tuple[float, float, float]:
    """Min instantaneous gap, its location, and max |<excited|W|ground>|."""
    npts = len(flow.s_grid)
    best_gap = np.inf
    best_s = float(flow.s_grid[0])
    dh = 0.0
    for i in range(npts):
        order = np.argsort(flow.curves[i])
        g_idx, e_idx = order[0], order[1]
        gap = float(flow.curves[i, e_idx] - flow.curves[i, g_idx])
        if gap < best_gap:
            best_gap = gap
            best_s = float(flow.s_grid[i])
        ground = flow.vectors[i][:, g_idx]
        wg = w_entries @ ground
        for q in order[1:]:
            dh = max(dh, abs(float(flow.vectors[i][:, q] @ wg)))
    return best_gap, best_s, dh


def gap_and_time(flow: FlowState, hi: OperatorMatrix, hp: OperatorMatrix,
                 safety_factor: float = SAFETY_FACTOR,
                 gap_floor: float = GAP_FLOOR,
                 refine: bool = True, max_refinements: int = 3,
                 jobs: int = 1) -> GapReport:
    """Runtime heuristic from a tracked flow.

    Scans the flow for the minimal instantaneous gap g and the largest
    coupling ||ΔH|| = max |<excited|W|ground>| with W = H_P - H_I, doubling
    the grid density until ||ΔH|| moves by less than 0.1% (or the refinement
    budget runs out), then reports t_min = safety · ||ΔH|| / g².  Raises
    DegenerateGapError when g falls below gap_floor: no finite runtime
    estimate separates states across a closed gap.
    """
    if flow.vectors is None:
        raise ValueError("flow was built without vectors; rerun with store_vectors=True")
    if flow.num_tracked < 2:
        raise ValueError("need at least two tracked curves for a gap")
    w_entries = hp.entries - hi.entries

    gap, s_at, dh = _gap_dh_scan(flow, w_entries)
    refinements = 0
    points = len(flow.s_grid)
    current = flow
    while refine and refinements < max_refinements:
        refined_grid = _double_grid(current.s_grid)
        sched = Schedule(total_time=flow.schedule.total_time,
                         ramp=flow.schedule.ramp, grid=refined_grid)
        current = spectral_flow(hi, hp, sched, flow.num_tracked, jobs=jobs)
        new_gap, new_s, new_dh = _gap_dh_scan(current, w_entries)
        refinements += 1
        points = len(refined_grid)
        converged = abs(new_dh - dh) <= 1e-3 * max(dh, 1e-300)
        gap, s_at, dh = new_gap, new_s, new_dh
        if converged:
            break

    if gap < gap_floor:
        raise DegenerateGapError(
            f"tracked gap {gap:.3e} at s = {s_at:.6f} is below the floor "
            f"{gap_floor:.1e}; the two lowest curves are effectively degenerate "
            "there (symmetric equations do this at the endpoint), so no finite "
            "runtime estimate applies on this grid",
            s=s_at, gap=gap)

    t_min = safety_factor * dh / (gap * gap)
    return GapReport(gap=gap, gap_location=s_at, delta_h_norm=dh, t_min=t_min,
                     grid_points=points, refinements=refinements)


def _double_grid(grid: np.ndarray) -> np.ndarray:
    mids = 0.5 * (grid[:-1] + grid[1:])
    out = np.empty(grid.size + mids.size)
    out[0::2] = grid
    out[1::2] = mids
    return out
