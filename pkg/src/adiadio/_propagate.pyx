# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled midpoint propagator with Lanczos exponential action.

Same contract as _propagate_py.propagate: advance psi through piecewise-
constant midpoint steps H(f_k) = H0 + f_k W, applying each step exponential
with an adaptively sub-stepped Lanczos expansion.  The per-substep error
estimate is the standard last-component bound beta_k * |y_k|; a substep that
cannot converge within the Krylov budget is split in half and retried.
"""

from libc.math cimport ceil, cos, fabs, sin, sqrt

import numpy as np

cimport numpy as cnp
from scipy.linalg.cython_blas cimport daxpy, dcopy, dsymv, dznrm2, zaxpy, zdotc, zgemv
from scipy.linalg.cython_lapack cimport dstev

cnp.import_array()


cdef struct ExpvResult:
    int converged
    int kdim
    double err


cdef ExpvResult _expv(double* h, int n, double complex* psi, double tau,
                      double tol, int kmax, int ldz,
                      double complex* V, double complex* wvec,
                      double* alpha, double* beta,
                      double* d, double* e, double* z, double* work,
                      double* ycos, double* ysin) noexcept nogil:
    """One Lanczos exp(-i tau H) application onto psi, in place.

    Scratch: V ((kmax+1) x n), wvec (n), alpha/beta (kmax+1), tridiagonal
    workspace d/e/z/work sized for ldz = kmax+1, ycos/ysin (kmax+1).
    """
    cdef ExpvResult res
    cdef int j, i, l, m, info, inc1 = 1, inc2 = 2
    cdef double beta0, bj, err, lam, ph, cp, sp_, zl0, zli
    cdef double one = 1.0, zero = 0.0
    cdef double complex coef, cz, zbeta
    cdef char uplo = b'L'
    cdef char jobz = b'V'
    cdef char ntrans = b'N'

    res.converged = 0
    res.kdim = 0
    res.err = 0.0

    beta0 = dznrm2(&n, psi, &inc1)
    if beta0 == 0.0:
        res.converged = 1
        return res

    for i in range(n):
        V[i] = psi[i] / beta0

    err = 0.0
    m = 0
    for j in range(kmax):
        # wvec = H @ V[j]: symmetric real matvec on the strided re/im parts
        dsymv(&uplo, &n, &one, h, &n, <double*> (V + j * n), &inc2,
              &zero, <double*> wvec, &inc2)
        dsymv(&uplo, &n, &one, h, &n, (<double*> (V + j * n)) + 1, &inc2,
              &zero, (<double*> wvec) + 1, &inc2)

        cz = zdotc(&n, V + j * n, &inc1, wvec, &inc1)
        alpha[j] = cz.real

        coef = -alpha[j]
        zaxpy(&n, &coef, V + j * n, &inc1, wvec, &inc1)
        if j > 0:
            coef = -beta[j - 1]
            zaxpy(&n, &coef, V + (j - 1) * n, &inc1, wvec, &inc1)

        # two full reorthogonalization passes keep V orthonormal to ~1e-15
        for l in range(2):
            for i in range(j + 1):
                cz = zdotc(&n, V + i * n, &inc1, wvec, &inc1)
                coef = -cz
                zaxpy(&n, &coef, V + i * n, &inc1, wvec, &inc1)

        bj = dznrm2(&n, wvec, &inc1)
        beta[j] = bj
        m = j + 1

        # y = Z exp(-i lam tau) Z^T e1 from the tridiagonal eigensolve
        for i in range(m):
            d[i] = alpha[i]
        for i in range(m - 1):
            e[i] = beta[i]
        dstev(&jobz, &m, d, e, z, &ldz, work, &info)
        if info != 0:
            res.converged = 0
            res.err = -1.0
            res.kdim = m
            return res
        for i in range(m):
            ycos[i] = 0.0
            ysin[i] = 0.0
        for l in range(m):
            lam = d[l]
            ph = -lam * tau
            cp = cos(ph)
            sp_ = sin(ph)
            zl0 = z[l * ldz]
            for i in range(m):
                zli = z[i + l * ldz] * zl0
                ycos[i] += zli * cp
                ysin[i] += zli * sp_

        err = bj * sqrt(ycos[m - 1] * ycos[m - 1] + ysin[m - 1] * ysin[m - 1])
        if err <= tol or bj < 1e-300 or m == n:
            res.converged = 1
            break

        if j + 1 < kmax:
            for i in range(n):
                V[(j + 1) * n + i] = wvec[i] / bj

    res.kdim = m
    res.err = err
    if not res.converged:
        return res

    # psi = beta0 * sum_i y_i V[i]; V rows are Fortran columns with lda = n
    for i in range(m):
        wvec[i] = beta0 * ycos[i] + beta0 * ysin[i] * 1j
    coef = 1.0
    zbeta = 0.0
    zgemv(&ntrans, &n, &m, &coef, <double complex*> V, &n, wvec, &inc1,
          &zbeta, psi, &inc1)
    return res


def propagate(cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] h0,
              cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] w,
              cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] fmid,
              double dt,
              cnp.ndarray[cnp.complex128_t, ndim=1, mode="c"] psi,
              double step_tol, int kmax,
              double spread0, double spread_w, double q_target):
    """Advance psi (in place) through len(fmid) midpoint steps of size dt.

    Returns {"substeps", "max_krylov", "max_norm_drift", "splits"}.
    """
    cdef int n = h0.shape[0]
    cdef int nsteps = fmid.shape[0]
    cdef int nn = n * n
    cdef int inc1 = 1
    cdef int ldz
    cdef int k, n_sub, total_sub = 0, max_k = 0, splits = 0
    cdef double f, spread_f, dt_sub, tol_sub, remaining, h_try, tau, nrm
    cdef double drift = 0.0
    cdef bint fail_tri = False, fail_under = False
    cdef ExpvResult res

    if kmax < 2:
        raise ValueError("kmax must be at least 2")
    if n > 0 and kmax > n:
        kmax = n
    ldz = kmax + 1
    if psi.shape[0] != n or w.shape[0] != n or w.shape[1] != n:
        raise ValueError("shape mismatch")
    if nsteps == 0 or n == 0:
        return {"substeps": 0, "max_krylov": 0, "max_norm_drift": 0.0, "splits": 0}

    cdef cnp.ndarray[cnp.float64_t, ndim=1] hbuf_arr = np.empty(nn, dtype=np.float64)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] V_arr = np.empty((kmax + 1) * n, dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] wvec_arr = np.empty(n, dtype=np.complex128)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] scr = np.empty(6 * ldz + ldz * ldz, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] work_arr = np.empty(max(1, 2 * ldz - 2), dtype=np.float64)

    cdef double* hbuf = &hbuf_arr[0]
    cdef double complex* V = &V_arr[0]
    cdef double complex* wvec = &wvec_arr[0]
    cdef double* alpha = &scr[0]
    cdef double* beta = alpha + ldz
    cdef double* d = beta + ldz
    cdef double* e = d + ldz
    cdef double* ycos = e + ldz
    cdef double* ysin = ycos + ldz
    cdef double* z = ysin + ldz
    cdef double* work = &work_arr[0]
    cdef double* h0p = &h0[0, 0]
    cdef double* wp = &w[0, 0]
    cdef double complex* psip = &psi[0]
    cdef double* fmidp = &fmid[0]

    with nogil:
        for k in range(nsteps):
            f = fmidp[k]
            dcopy(&nn, h0p, &inc1, hbuf, &inc1)
            daxpy(&nn, &f, wp, &inc1, hbuf, &inc1)

            spread_f = spread0 + fabs(f) * spread_w
            n_sub = <int> ceil(dt * spread_f / q_target)
            if n_sub < 1:
                n_sub = 1
            dt_sub = dt / n_sub
            tol_sub = step_tol / n_sub
            if tol_sub < 1e-14:
                tol_sub = 1e-14

            remaining = dt
            h_try = dt_sub
            while remaining > dt * 1e-14:
                tau = h_try if h_try < remaining else remaining
                res = _expv(hbuf, n, psip, tau, tol_sub * (tau / dt_sub),
                            kmax, ldz, V, wvec, alpha, beta, d, e, z, work,
                            ycos, ysin)
                if res.err < 0.0:
                    fail_tri = True
                    break
                if res.converged:
                    remaining -= tau
                    total_sub += 1
                    if res.kdim > max_k:
                        max_k = res.kdim
                    if res.kdim < kmax // 2 and h_try < dt_sub:
                        h_try = h_try * 2.0
                        if h_try > dt_sub:
                            h_try = dt_sub
                else:
                    splits += 1
                    h_try = h_try * 0.5
                    if h_try < dt * 1e-12:
                        fail_under = True
                        break
            if fail_tri or fail_under:
                break

            nrm = dznrm2(&n, psip, &inc1)
            if fabs(nrm - 1.0) > drift:
                drift = fabs(nrm - 1.0)

    if fail_tri:
        raise RuntimeError("tridiagonal eigensolve failed in kernel")
    if fail_under:
        raise RuntimeError("propagation substep underflow; matrix may be pathological")

    return {"substeps": total_sub, "max_krylov": max_k,
            "max_norm_drift": drift, "splits": splits}
