"""Hamiltonian assembly on truncated Fock bases.

Two operators drive everything downstream: the squared-polynomial diagonal
(whose exact integer zeros encode solvability) and the displaced number
operator whose ground state is the mode-product coherent state.  Both are
real symmetric; interpolation between them is linear in the ramp value.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .fock import FockBasis
from .poly import Polynomial, evaluate

__all__ = [
    "DENSE_LIMIT",
    "InexactConversionWarning",
    "CoherentParams",
    "Ramp",
    "RAMPS",
    "get_ramp",
    "Schedule",
    "default_schedule",
    "OperatorMatrix",
    "build_hp",
    "build_hi",
    "build_interpolated",
    "commutator_nonzero",
    "export_matrix",
]

# auto storage switches to CSR above this dimension
DENSE_LIMIT = 4096


class InexactConversionWarning(UserWarning):
    """An exact integer diagonal entry was rounded on conversion to float64."""


@dataclass(frozen=True)
class CoherentParams:
    """Real displacement per mode; mode i is displaced by alphas[i]."""

    alphas: tuple[float, ...]

    def __post_init__(self):
        if len(self.alphas) == 0:
            raise ValueError("need at least one displacement")
        for a in self.alphas:
            if not math.isfinite(a):
                raise ValueError(f"displacement {a!r} is not finite")
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))

    @classmethod
    def uniform(cls, alpha: float, num_modes: int) -> "CoherentParams":
        return cls(alphas=(float(alpha),) * num_modes)


@dataclass(frozen=True)
class Ramp:
    """Monotone schedule function with f(0) = 0 and f(1) = 1, plus f'."""

    name: str
    f: Callable
    df: Callable


RAMPS: dict[str, Ramp] = {
    "linear": Ramp("linear", lambda s: s, lambda s: np.ones_like(np.asarray(s, dtype=float))),
    "smoothstep": Ramp("smoothstep",
                       lambda s: s * s * (3.0 - 2.0 * s),
                       lambda s: 6.0 * s * (1.0 - s)),
}


def get_ramp(ramp: str | Ramp) -> Ramp:
    if isinstance(ramp, Ramp):
        return ramp
    try:
        return RAMPS[ramp]
    except KeyError:
        raise ValueError(
            f"unknown ramp {ramp!r}; choose from {sorted(RAMPS)}") from None


@dataclass(frozen=True)
class Schedule:
    """Total evolution time, ramp, and the s-grid used for flow scans."""

    total_time: float
    ramp: Ramp
    grid: np.ndarray = field(compare=False)

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        if grid.ndim != 1 or grid.size < 2:
            raise ValueError("grid must be a 1-D array with at least 2 points")
        if grid[0] < 0.0 or grid[-1] > 1.0 or np.any(np.diff(grid) <= 0.0):
            raise ValueError("grid must increase strictly within [0, 1]")
        object.__setattr__(self, "grid", grid)
        f = self.ramp.f
        if float(f(0.0)) != 0.0 or float(f(1.0)) != 1.0:
            raise ValueError("ramp must satisfy f(0) = 0 and f(1) = 1 exactly")
        probe = f(np.linspace(0.0, 1.0, 257))
        if np.any(np.diff(probe) < 0.0):
            raise ValueError("ramp must be nondecreasing on [0, 1]")


def default_schedule(total_time: float = 1.0, points: int = 101,
                     ramp: str | Ramp = "linear") -> Schedule:
    return Schedule(total_time=float(total_time), ramp=get_ramp(ramp),
                    grid=np.linspace(0.0, 1.0, points))


@dataclass(frozen=True)
class OperatorMatrix:
    """Real symmetric operator over a FockBasis, dense or CSR."""

    basis: FockBasis
    entries: object = field(compare=False)  # np.ndarray or sp.csr_matrix

    def __post_init__(self):
        m = self.entries
        if sp.issparse(m):
            if m.format != "csr":
                object.__setattr__(self, "entries", m.tocsr())
                m = self.entries
        elif not isinstance(m, np.ndarray):
            raise TypeError("entries must be an ndarray or a CSR matrix")
        if m.shape != (self.basis.size, self.basis.size):
            raise ValueError(
                f"entries shape {m.shape} does not match basis size {self.basis.size}")
        if m.dtype != np.float64:
            raise TypeError("entries must be float64")
        defect = _asymmetry(m)
        if defect != 0.0:
            raise ValueError(f"operator is not symmetric (defect {defect:g})")

    @property
    def dim(self) -> int:
        return self.basis.size

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.entries)

    def dense(self) -> np.ndarray:
        if self.is_sparse:
            return self.entries.toarray()
        return self.entries


def _asymmetry(m) -> float:
    if sp.issparse(m):
        d = (m - m.T).tocoo()
        return float(np.abs(d.data).max()) if d.nnz else 0.0
    if m.size == 0:
        return 0.0
    return float(np.abs(m - m.T).max())


def _resolve_storage(storage: str, dim: int) -> str:
    if storage not in ("auto", "dense", "sparse"):
        raise ValueError(f"unknown storage {storage!r}")
    if storage == "auto":
        return "dense" if dim <= DENSE_LIMIT else "sparse"
    return storage


def build_hp(p: Polynomial, basis: FockBasis, storage: str = "auto") -> OperatorMatrix:
    """Diagonal operator with entries D(n)^2, D the polynomial at the occupations.

    Values are computed in exact integer arithmetic and converted to float64
    at the end.  Inexact conversions (above 2^53) raise a warning naming the
    worst state; values beyond float range are an error.
    """
    if p.num_vars != basis.num_modes:
        raise ValueError(
            f"polynomial has {p.num_vars} variables, basis has {basis.num_modes} modes")
    diag = np.empty(basis.size, dtype=np.float64)
    inexact = 0
    worst: tuple[int, tuple[int, ...]] | None = None
    for i, state in enumerate(basis.states):
        v = evaluate(p, state)
        sq = v * v
        try:
            x = float(sq)
        except OverflowError:
            raise ValueError(
                f"squared value {sq} at state {state} exceeds float64 range; "
                "lower the cutoff or rescale the equation") from None
        if int(x) != sq:
            inexact += 1
            if worst is None or sq > worst[0]:
                worst = (sq, state)
        diag[i] = x
    if inexact:
        warnings.warn(
            f"{inexact} diagonal entries lost precision in float64 "
            f"(largest {worst[0]} at state {worst[1]})",
            InexactConversionWarning, stacklevel=2)
    kind = _resolve_storage(storage, basis.size)
    if kind == "dense":
        entries = np.diag(diag)
    else:
        entries = sp.diags(diag, format="csr", dtype=np.float64)
    return OperatorMatrix(basis=basis, entries=entries)


def build_hi(coherent: CoherentParams, basis: FockBasis,
             storage: str = "auto") -> OperatorMatrix:
    """Sum over modes of the displaced number operator (a† - α)(a - α).

    Diagonal: sum_i (n_i + α_i²).  Off-diagonal: -α_i √(n_i+1) between states
    that differ by one quantum in mode i; couplings pointing outside the
    truncated basis are dropped, so boundary rows just end.
    """
    if len(coherent.alphas) != basis.num_modes:
        raise ValueError(
            f"got {len(coherent.alphas)} displacements, basis has {basis.num_modes} modes")
    alphas = coherent.alphas
    offset = sum(a * a for a in alphas)
    kind = _resolve_storage(storage, basis.size)

    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    for i, state in enumerate(basis.states):
        rows.append(i)
        cols.append(i)
        vals.append(sum(state) + offset)
        for mode, a in enumerate(alphas):
            if a == 0.0:
                continue
            up = list(state)
            up[mode] += 1
            j = basis.index.get(tuple(up))
            if j is not None:
                c = -a * math.sqrt(state[mode] + 1)
                rows.extend((i, j))
                cols.extend((j, i))
                vals.extend((c, c))

    if kind == "dense":
        entries = np.zeros((basis.size, basis.size), dtype=np.float64)
        entries[rows, cols] = vals
    else:
        entries = sp.csr_matrix(
            (vals, (rows, cols)), shape=(basis.size, basis.size), dtype=np.float64)
    return OperatorMatrix(basis=basis, entries=entries)


def build_interpolated(hi: OperatorMatrix, hp: OperatorMatrix, s: float,
                       schedule: Schedule) -> OperatorMatrix:
    """(1 - f(s))·H_I + f(s)·H_P on the shared basis, endpoint-exact.

    At f = 0 and f = 1 the entries are bitwise copies of the corresponding
    input operator.
    """
    if hi.basis is not hp.basis and hi.basis != hp.basis:
        raise ValueError("operators live on different bases")
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"s = {s} outside [0, 1]")
    f = float(schedule.ramp.f(s))
    if f == 0.0:
        entries = hi.entries.copy()
    elif f == 1.0:
        entries = hp.entries.copy()
    else:
        entries = hi.entries * (1.0 - f) + hp.entries * f
        if sp.issparse(entries):
            entries = entries.tocsr()
    return OperatorMatrix(basis=hi.basis, entries=entries)


def commutator_nonzero(a: OperatorMatrix, b: OperatorMatrix) -> float:
    """Frobenius norm of [A, B]; zero means the flow has no work to do."""
    if a.basis is not b.basis and a.basis != b.basis:
        raise ValueError("operators live on different bases")
    if a.is_sparse or b.is_sparse:
        am = a.entries if a.is_sparse else sp.csr_matrix(a.entries)
        bm = b.entries if b.is_sparse else sp.csr_matrix(b.entries)
        comm = am @ bm - bm @ am
        return float(sp.linalg.norm(comm, "fro"))
    comm = a.entries @ b.entries - b.entries @ a.entries
    return float(np.linalg.norm(comm, "fro"))


def export_matrix(om: OperatorMatrix, path: str, fmt: str = "text") -> None:
    """Write an operator for external inspection.

    "text": '#'-prefixed header lines with the basis metadata, then one dense
    row per line, 17 significant digits.  "binary": .npy for dense entries or
    .npz (CSR) for sparse, plus a JSON metadata sidecar at path + ".meta.json".
    """
    meta = om.basis.meta()
    if fmt == "text":
        dense = om.dense()
        with open(path, "w") as fh:
            for key, value in meta.items():
                fh.write(f"# {key}: {value}\n")
            for row in dense:
                fh.write(" ".join(format(x, ".17g") for x in row))
                fh.write("\n")
    elif fmt == "binary":
        if om.is_sparse:
            sp.save_npz(path, om.entries)
        else:
            np.save(path, om.entries)
        with open(path + ".meta.json", "w") as fh:
            json.dump({**meta, "storage": "sparse" if om.is_sparse else "dense"},
                      fh, indent=2)
            fh.write("\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")
