"""Projected Gauss-Seidel kernel for the iterative (particle) contact block.

Sequential sweeps in fixed row order for determinism.  Friction is projected
onto the exact interval cone |p_t| <= mu * p_n every sweep; rolling resistance
is a bounded angular row with bound mu_r * r * p_n.  Compiled with numba.
"""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def pgs_sweeps(u, inv_m, inv_I, ia, ib, nx, nz, rax, raz, rbx, rbz,
               rhs_n, sigma_n, mu, mu_r, r_roll, p_n, p_t, p_r, n_iter):
    """Run n_iter sweeps; impulses and velocities updated in place.

    Returns the max velocity-scale residual of the final sweep.
    """
    nc = len(ia)
    residual = 0.0
    # pre-apply incoming (warm-start) impulses so that p_* and u stay
    # consistent: the sweeps below treat p as already reflected in u.
    for k in range(nc):
        a = ia[k]
        b = ib[k]
        nxk = nx[k]
        nzk = nz[k]
        txk = -nzk
        tzk = nxk
        cna = rax[k] * nzk - raz[k] * nxk
        cnb = rbx[k] * nzk - rbz[k] * nxk
        cta = rax[k] * tzk - raz[k] * txk
        ctb = rbx[k] * tzk - rbz[k] * txk
        px = nxk * p_n[k] + txk * p_t[k]
        pz = nzk * p_n[k] + tzk * p_t[k]
        if p_n[k] != 0.0 or p_t[k] != 0.0 or p_r[k] != 0.0:
            u[a, 0] -= inv_m[a] * px
            u[a, 1] -= inv_m[a] * pz
            u[a, 2] -= inv_I[a] * (cna * p_n[k] + cta * p_t[k] + p_r[k])
            u[b, 0] += inv_m[b] * px
            u[b, 1] += inv_m[b] * pz
            u[b, 2] += inv_I[b] * (cnb * p_n[k] + ctb * p_t[k] + p_r[k])
    for it in range(n_iter):
        last = it == n_iter - 1
        if last:
            residual = 0.0
        for k in range(nc):
            a = ia[k]
            b = ib[k]
            wma = inv_m[a]
            wmb = inv_m[b]
            wia = inv_I[a]
            wib = inv_I[b]
            nxk = nx[k]
            nzk = nz[k]
            txk = -nzk
            tzk = nxk
            # jacobian cross terms
            cna = rax[k] * nzk - raz[k] * nxk
            cnb = rbx[k] * nzk - rbz[k] * nxk
            cta = rax[k] * tzk - raz[k] * txk
            ctb = rbx[k] * tzk - rbz[k] * txk

            # --- normal row ---
            sn = (nxk * (u[b, 0] - u[a, 0]) + nzk * (u[b, 1] - u[a, 1])
                  + cnb * u[b, 2] - cna * u[a, 2])
            dn = wma + wmb + wia * cna * cna + wib * cnb * cnb + sigma_n[k]
            dp = (rhs_n[k] - sn - sigma_n[k] * p_n[k]) / dn
            pn_new = p_n[k] + dp
            if pn_new < 0.0:
                pn_new = 0.0
            dpa = pn_new - p_n[k]
            p_n[k] = pn_new
            if dpa != 0.0:
                u[a, 0] -= wma * nxk * dpa
                u[a, 1] -= wma * nzk * dpa
                u[a, 2] -= wia * cna * dpa
                u[b, 0] += wmb * nxk * dpa
                u[b, 1] += wmb * nzk * dpa
                u[b, 2] += wib * cnb * dpa
            if last and abs(dpa) * dn > residual:
                residual = abs(dpa) * dn

            # --- tangent row, interval cone projection ---
            st = (txk * (u[b, 0] - u[a, 0]) + tzk * (u[b, 1] - u[a, 1])
                  + ctb * u[b, 2] - cta * u[a, 2])
            dt = wma + wmb + wia * cta * cta + wib * ctb * ctb
            if dt > 1e-15:
                dp = -st / dt
                bound = mu[k] * p_n[k]
                pt_new = p_t[k] + dp
                if pt_new > bound:
                    pt_new = bound
                elif pt_new < -bound:
                    pt_new = -bound
                dpa = pt_new - p_t[k]
                p_t[k] = pt_new
                if dpa != 0.0:
                    u[a, 0] -= wma * txk * dpa
                    u[a, 1] -= wma * tzk * dpa
                    u[a, 2] -= wia * cta * dpa
                    u[b, 0] += wmb * txk * dpa
                    u[b, 1] += wmb * tzk * dpa
                    u[b, 2] += wib * ctb * dpa

            # --- rolling resistance row ---
            if mu_r[k] > 0.0:
                dr = wia + wib
                if dr > 1e-15:
                    w = u[b, 2] - u[a, 2]
                    dp = -w / dr
                    bound = mu_r[k] * r_roll[k] * p_n[k]
                    pr_new = p_r[k] + dp
                    if pr_new > bound:
                        pr_new = bound
                    elif pr_new < -bound:
                        pr_new = -bound
                    dpa = pr_new - p_r[k]
                    p_r[k] = pr_new
                    if dpa != 0.0:
                        u[a, 2] -= wia * dpa
                        u[b, 2] += wib * dpa
    return residual


@njit(cache=True)
def integrate_poses(q, u, h, active):
    for i in range(len(q)):
        if active[i]:
            q[i, 0] += h * u[i, 0]
            q[i, 1] += h * u[i, 1]
            q[i, 2] += h * u[i, 2]
