"""Pure-numpy coordinate descent kernel.

Fallback for when the compiled extension is unavailable; the compiled kernel
in _cd_fast.pyx implements the identical update order and convergence rule,
so the two produce the same iterates up to floating-point association.
"""

from __future__ import annotations

import numpy as np

IS_COMPILED = False


def cd_solve(D, col_sq, w, resid, theta, theta0, lam, pf, nonneg, tol, max_sweeps):
    """Cyclic coordinate descent at a single lambda, in place.

    Minimizes (1/(2n)) sum_i w_i (resid_i)^2 + lam * sum_j pf_j * p(theta_j)
    where resid = y_eff - theta0 - D @ theta is maintained in place and
    p is the identity on [0, inf) when nonneg else the absolute value.
    Weights w must average 1.  Convergence: max_j a_j * dtheta_j^2 < tol,
    with a full-sweep confirmation after active-set iterations.

    Returns (theta0, sweeps_used, converged).
    """
    n, q = D.shape
    wD = D * w[:, None] if not np.all(w == 1.0) else D
    wsum = float(w.sum())
    wbar = wsum / n
    sweeps = 0

    def sweep(idx):
        nonlocal theta0, sweeps, resid
        maxd = 0.0
        for j in idx:
            aj = col_sq[j]
            if aj <= 0.0:
                continue
            tj = theta[j]
            rho = wD[:, j] @ resid / n + aj * tj
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
                resid -= d * D[:, j]
                theta[j] = new
                upd = aj * d * d
                if upd > maxd:
                    maxd = upd
        d0 = float(w @ resid) / wsum  # exact weighted-mean intercept step
        if d0 != 0.0:
            theta0 += d0
            resid -= d0
            if wbar * d0 * d0 > maxd:
                maxd = wbar * d0 * d0
        sweeps += 1
        return maxd

    all_idx = np.arange(q)
    while sweeps < max_sweeps:
        maxd = sweep(all_idx)
        if maxd < tol:
            return theta0, sweeps, True
        active = np.flatnonzero(theta)
        while sweeps < max_sweeps:
            if sweep(active) < tol:
                break
    return theta0, sweeps, False
