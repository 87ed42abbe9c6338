# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled coordinate descent kernel.

Mirrors _cd_py.cd_solve exactly: same update order (cyclic full sweep, then
active-set sweeps, then a confirming full sweep) and the same convergence
rule max_j a_j * dtheta_j^2 < tol.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

IS_COMPILED = True


cdef double _sweep(double[::1, :] D, double[::1] col_sq, double[::1] w,
                   bint unit_w, double wsum, double[::1] resid,
                   double[::1] theta, double* theta0, double lam,
                   double[::1] pf, bint nonneg,
                   long* idx, long n_idx, long n) noexcept nogil:
    cdef double maxd = 0.0
    cdef double rho, thr, new, d, aj, tj, upd, d0
    cdef long k, j, i
    for k in range(n_idx):
        j = idx[k]
        aj = col_sq[j]
        if aj <= 0.0:
            continue
        tj = theta[j]
        rho = 0.0
        if unit_w:
            for i in range(n):
                rho += D[i, j] * resid[i]
        else:
            for i in range(n):
                rho += w[i] * D[i, j] * resid[i]
        rho = rho / n + aj * tj
        thr = lam * pf[j]
        if nonneg:
            new = rho - thr
            new = new / aj if new > 0.0 else 0.0
        else:
            if rho > thr:
                new = (rho - thr) / aj
            elif rho < -thr:
                new = (rho + thr) / aj
            else:
                new = 0.0
        d = new - tj
        if d != 0.0:
            for i in range(n):
                resid[i] -= d * D[i, j]
            theta[j] = new
            upd = aj * d * d
            if upd > maxd:
                maxd = upd
    # exact weighted-mean intercept step
    d0 = 0.0
    if unit_w:
        for i in range(n):
            d0 += resid[i]
    else:
        for i in range(n):
            d0 += w[i] * resid[i]
    d0 /= wsum
    if d0 != 0.0:
        theta0[0] += d0
        for i in range(n):
            resid[i] -= d0
        upd = (wsum / n) * d0 * d0
        if upd > maxd:
            maxd = upd
    return maxd


def cd_solve(double[::1, :] D, double[::1] col_sq, double[::1] w,
             double[::1] resid, double[::1] theta, double theta0,
             double lam, double[::1] pf, bint nonneg, double tol,
             long max_sweeps):
    """See _cd_py.cd_solve for the contract."""
    cdef long n = D.shape[0]
    cdef long q = D.shape[1]
    cdef long sweeps = 0
    cdef long n_active, j
    cdef double maxd
    cdef bint unit_w = True
    cdef long i
    cdef double wsum = 0.0
    for i in range(n):
        if w[i] != 1.0:
            unit_w = False
        wsum += w[i]

    cdef cnp.ndarray[long, ndim=1] all_idx = np.arange(q, dtype=np.int64)
    cdef cnp.ndarray[long, ndim=1] active = np.empty(q, dtype=np.int64)
    cdef long* all_ptr = <long*> cnp.PyArray_DATA(all_idx)
    cdef long* act_ptr = <long*> cnp.PyArray_DATA(active)
    cdef double t0 = theta0
    cdef bint converged = False

    with nogil:
        while sweeps < max_sweeps:
            maxd = _sweep(D, col_sq, w, unit_w, wsum, resid, theta, &t0,
                          lam, pf, nonneg, all_ptr, q, n)
            sweeps += 1
            if maxd < tol:
                converged = True
                break
            n_active = 0
            for j in range(q):
                if theta[j] != 0.0:
                    act_ptr[n_active] = j
                    n_active += 1
            while sweeps < max_sweeps:
                maxd = _sweep(D, col_sq, w, unit_w, wsum, resid, theta, &t0,
                              lam, pf, nonneg, act_ptr, n_active, n)
                sweeps += 1
                if maxd < tol:
                    break
    return t0, sweeps, converged
