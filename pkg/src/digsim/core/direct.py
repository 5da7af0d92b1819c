"""Dense bounded solve for the direct (vehicle) block of the stepped MCP.

The block collects joint, motor, and vehicle contact rows into a dense Schur
complement H = J W J^T + Sigma and solves it with an active-set loop on the
box bounds.  Friction bounds couple to the normal solution through a few
fixed-point passes; in 2D the friction cone is an interval, so the final
projection is exact.
"""
from __future__ import annotations

import numpy as np


class DirectSolveError(RuntimeError):
    """Singular or non-finite direct block."""


def solve_direct(rows, inv_m, inv_I, u, h, friction_passes=3, warm=None):
    """Solve the bounded system for a list of ConstraintRow.

    Velocities u (n,3) are updated in place for every body with nonzero
    inverse mass.  Returns (impulses per row, residual).
    """
    nr = len(rows)
    if nr == 0:
        return np.zeros(0), 0.0

    body_ids = sorted({r.body_a for r in rows} | {r.body_b for r in rows})
    body_ids = [b for b in body_ids if b >= 0 and (inv_m[b] > 0 or inv_I[b] > 0)]
    slot = {b: k for k, b in enumerate(body_ids)}
    nd = 3 * len(body_ids)

    J = np.zeros((nr, nd))
    W = np.zeros(nd)
    for k, b in enumerate(body_ids):
        W[3 * k] = inv_m[b]
        W[3 * k + 1] = inv_m[b]
        W[3 * k + 2] = inv_I[b]

    sigma = np.zeros(nr)
    rhs = np.zeros(nr)
    lo = np.zeros(nr)
    hi = np.zeros(nr)
    for i, r in enumerate(rows):
        if r.body_a in slot:
            J[i, 3 * slot[r.body_a]:3 * slot[r.body_a] + 3] = r.ja
        if r.body_b in slot:
            J[i, 3 * slot[r.body_b]:3 * slot[r.body_b] + 3] = r.jb
        if r.positional and r.compliance == 0.0 and r.damping == 0.0:
            # ideal joint: aim the end-of-step position at the constraint
            # manifold (g + h G v = 0); the post-integration projection mops
            # up the quadratic remainder.  Energy-neutral to second order.
            rhs[i] = (r.target - r.g) / h
        elif r.positional:
            tau = r.damping if r.damping > 0.0 else 2.0 * h
            denom = h + tau
            rhs[i] = (r.target - r.g) / denom
            sigma[i] = r.compliance / (h * denom)
        else:
            tau = r.damping if r.damping > 0.0 else 1.0
            rhs[i] = r.target / tau
            sigma[i] = r.compliance / (h * tau)
        lo[i] = r.lo * h
        hi[i] = r.hi * h

    v = np.concatenate([u[b] for b in body_ids]) if body_ids else np.zeros(0)
    H = (J * W) @ J.T
    H[np.diag_indices_from(H)] += sigma
    reg = 1e-10 * max(1.0, np.trace(H) / max(nr, 1))
    H[np.diag_indices_from(H)] += reg
    q = rhs - J @ v

    lam = np.zeros(nr) if warm is None else warm.copy()
    lam = np.clip(lam, lo, hi)

    for _ in range(max(1, friction_passes)):
        _update_friction_bounds(rows, lam, lo, hi, h)
        lam = _active_set(H, q, lo, hi, lam)
    _update_friction_bounds(rows, lam, lo, hi, h)
    np.clip(lam, lo, hi, out=lam)

    if not np.all(np.isfinite(lam)):
        raise DirectSolveError("non-finite multipliers in direct block")

    dv = W * (J.T @ lam)
    for k, b in enumerate(body_ids):
        u[b] += dv[3 * k:3 * k + 3]

    w = H @ lam - q
    residual = _complementarity_residual(lam, w, lo, hi)
    return lam, residual


def _min_norm_solve(A, b, rcond=1e-10):
    """Minimum-norm solution of the symmetric system A x = b.

    Singular directions (relative to the largest eigenvalue) are discarded,
    which projects any inconsistent part of b out of the solution.
    """
    evals, evecs = np.linalg.eigh(A)
    cut = rcond * max(abs(evals[0]), abs(evals[-1]), 1e-300)
    keep = np.abs(evals) > cut
    if not keep.any():
        return np.zeros(len(b))
    coef = (evecs[:, keep].T @ b) / evals[keep]
    return evecs[:, keep] @ coef


def _update_friction_bounds(rows, lam, lo, hi, h):
    for i, r in enumerate(rows):
        if r.normal_row >= 0:
            bound = r.friction_scale * max(lam[r.normal_row], 0.0)
            lo[i] = -bound
            hi[i] = bound


def _active_set(H, q, lo, hi, lam, max_passes=25):
    nr = len(q)
    state = np.zeros(nr, dtype=np.int8)     # 0 free, -1 at lo, +1 at hi
    state[lam <= lo] = -1
    state[lam >= hi] = 1
    for _ in range(max_passes):
        free = state == 0
        lam = lam.copy()
        lam[state == -1] = lo[state == -1]
        lam[state == 1] = hi[state == 1]
        if free.any():
            A = H[np.ix_(free, free)]
            b = q[free] - H[np.ix_(free, ~free)] @ lam[~free]
            # the vehicle block is hyperstatic (wheel tangent/rolling rows
            # overlap the hinge and motor rows), so A is rank-deficient by
            # construction; a truncated-SVD solve picks the minimum-norm
            # impulse instead of an exploding compensating pair
            lam[free] = _min_norm_solve(A, b)
        w = H @ lam - q
        changed = False
        for i in range(nr):
            if state[i] == 0:
                if lam[i] < lo[i] - 1e-12:
                    state[i] = -1
                    changed = True
                elif lam[i] > hi[i] + 1e-12:
                    state[i] = 1
                    changed = True
            elif state[i] == -1 and w[i] < -1e-10 and hi[i] > lo[i]:
                state[i] = 0
                changed = True
            elif state[i] == 1 and w[i] > 1e-10 and hi[i] > lo[i]:
                state[i] = 0
                changed = True
        if not changed:
            break
    np.clip(lam, lo, hi, out=lam)
    return lam


def _complementarity_residual(lam, w, lo, hi):
    res = 0.0
    for i in range(len(lam)):
        if lam[i] - lo[i] > 1e-12 and hi[i] - lam[i] > 1e-12:
            res = max(res, abs(w[i]))
        elif lam[i] - lo[i] <= 1e-12:
            res = max(res, max(0.0, -w[i]))
        else:
            res = max(res, max(0.0, w[i]))
    return res
