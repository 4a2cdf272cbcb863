"""Pure-NumPy twin of the compiled propagator.

Algorithm-identical to _propagate.propagate (midpoint steps, adaptively
sub-stepped Lanczos exponential, same error estimate and splitting rules),
so the two backends are interchangeable up to floating-point ordering.
Kept dependency-free beyond numpy/scipy so a build without the extension
still works.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.linalg import eigh_tridiagonal

__all__ = ["propagate"]


def _expv(h: np.ndarray, psi: np.ndarray, tau: float, tol: float,
          kmax: int) -> tuple[bool, int, np.ndarray | None]:
    """One Lanczos exp(-i tau h) application; returns (converged, kdim, psi_new)."""
    n = h.shape[0]
    beta0 = float(np.linalg.norm(psi))
    if beta0 == 0.0:
        return True, 0, psi.copy()

    V = np.empty((kmax + 1, n), dtype=np.complex128)
    alphas = np.empty(kmax + 1)
    betas = np.empty(kmax + 1)
    V[0] = psi / beta0

    m = 0
    y = None
    converged = False
    for j in range(kmax):
        wvec = h @ V[j]
        alphas[j] = float(np.real(np.vdot(V[j], wvec)))
        wvec -= alphas[j] * V[j]
        if j > 0:
            wvec -= betas[j - 1] * V[j - 1]
        for _ in range(2):
            coeffs = V[: j + 1].conj() @ wvec
            wvec -= V[: j + 1].T @ coeffs
        bj = float(np.linalg.norm(wvec))
        betas[j] = bj
        m = j + 1

        lam, zmat = eigh_tridiagonal(alphas[:m].copy(), betas[: m - 1].copy())
        y = zmat @ (np.exp(-1j * lam * tau) * zmat[0])
        err = bj * abs(y[m - 1])
        if err <= tol or bj < 1e-300 or m == n:
            converged = True
            break
        if j + 1 < kmax:
            V[j + 1] = wvec / bj

    if not converged:
        return False, m, None
    return True, m, beta0 * (V[:m].T @ y)


def propagate(h0: np.ndarray, w: np.ndarray, fmid: np.ndarray, dt: float,
              psi: np.ndarray, step_tol: float, kmax: int,
              spread0: float, spread_w: float, q_target: float) -> dict:
    """Advance psi (in place) through len(fmid) midpoint steps of size dt.

    Returns {"substeps", "max_krylov", "max_norm_drift", "splits"}.
    """
    n = h0.shape[0]
    if kmax < 2:
        raise ValueError("kmax must be at least 2")
    kmax = min(kmax, n) if n else kmax
    if psi.shape[0] != n or w.shape != h0.shape:
        raise ValueError("shape mismatch")
    if len(fmid) == 0 or n == 0:
        return {"substeps": 0, "max_krylov": 0, "max_norm_drift": 0.0, "splits": 0}

    total_sub = 0
    max_k = 0
    splits = 0
    drift = 0.0
    hbuf = np.empty_like(h0)
    for f in fmid:
        np.multiply(w, f, out=hbuf)
        hbuf += h0

        spread_f = spread0 + abs(f) * spread_w
        n_sub = max(1, int(math.ceil(dt * spread_f / q_target)))
        dt_sub = dt / n_sub
        tol_sub = max(step_tol / n_sub, 1e-14)

        remaining = dt
        h_try = dt_sub
        while remaining > dt * 1e-14:
            tau = min(h_try, remaining)
            converged, kdim, out = _expv(hbuf, psi, tau,
                                         tol_sub * (tau / dt_sub), kmax)
            if converged:
                psi[:] = out
                remaining -= tau
                total_sub += 1
                max_k = max(max_k, kdim)
                if kdim < kmax // 2 and h_try < dt_sub:
                    h_try = min(h_try * 2.0, dt_sub)
            else:
                splits += 1
                h_try *= 0.5
                if h_try < dt * 1e-12:
                    raise RuntimeError(
                        "propagation substep underflow; matrix may be pathological")

        drift = max(drift, abs(float(np.linalg.norm(psi)) - 1.0))

    return {"substeps": total_sub, "max_krylov": max_k,
            "max_norm_drift": drift, "splits": splits}
