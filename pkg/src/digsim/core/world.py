"""The World: body store, fixed-timestep stepping, and the split MCP solve.

Step order: collision detection, impact stage (Newton law at impacting
contacts, all other constraints held), the regularized velocity solve split
into a dense direct block (vehicle and its external contacts) and a PGS block
(particle contacts), then semi-implicit pose integration.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .body import Body, DIRECT, ITERATIVE
from .constraints import (CONTACT_NORMAL, CONTACT_TANGENT, ROLLING,
                          ConstraintRow)
from .contacts import ContactSet, detect_contacts
from .direct import DirectSolveError, _min_norm_solve, solve_direct
from .materials import Material, MaterialTable
from .pgs import integrate_poses, pgs_sweeps
from .shapes import Disc


class StepError(RuntimeError):
    """Aborted step: NaN state or singular direct block."""


@dataclass
class SolverConfig:
    dt: float = 0.01
    iterations: int = 50
    tolerance: float = 1e-6
    warm_start: bool = True
    seed: int = 0
    impact_threshold: float = 0.05   # m/s normal approach speed
    friction_passes: int = 3
    contact_margin: float = 0.005
    shake_iterations: int = 4       # end-pose re-linearisations for ideal joints

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("timestep must be positive")
        if self.iterations < 1:
            raise ValueError("need at least one PGS iteration")


@dataclass
class StepDiagnostics:
    pgs_residual: float = 0.0
    direct_residual: float = 0.0
    pgs_iterations: int = 0
    n_contacts: int = 0
    impact_stage: bool = False


_GROW = 256


class World:
    def __init__(self, gravity: float = 9.81):
        self.gravity = gravity
        self.t = 0.0
        n = _GROW
        self.q = np.zeros((n, 3))
        self.u = np.zeros((n, 3))
        self.m = np.zeros(n)
        self.I = np.zeros(n)
        self.inv_m = np.zeros(n)
        self.inv_I = np.zeros(n)
        self.disc_radius = np.zeros(n)
        self.active = np.zeros(n, dtype=bool)
        self.ext_f = np.zeros((n, 3))
        self.n_bodies = 0
        self.bodies: list[Body] = []
        self.materials = MaterialTable()
        self.materials.add(Material("default"))
        self.constraints: list = []
        self.no_collide: set[frozenset] = set()
        self.kinematic_for_particles: set[int] = set()
        self._warm: dict = {}
        self.diagnostics = StepDiagnostics()
        self.last_contacts: ContactSet | None = None
        self.last_pn = np.zeros(0)
        self.last_pt = np.zeros(0)
        self.last_pr = np.zeros(0)
        self.last_row_forces: dict[str, float] = {}
        self.last_direct = []       # (row, impulse) pairs for feasibility checks
        # contact rows contributed by terrain models each step
        self.row_providers: list = []

    # ------------------------------------------------------------------ setup
    def add_material(self, mat: Material) -> Material:
        return self.materials.add(mat)

    def add_body(self, name, shape, mass=1.0, inertia=None, pose=(0, 0, 0),
                 velocity=(0, 0, 0), material="default", kinematic=False,
                 group=DIRECT) -> Body:
        if not kinematic and (mass <= 0 or (inertia is not None and inertia <= 0)):
            raise ValueError(f"body {name}: dynamic bodies need positive mass/inertia")
        i = self.n_bodies
        if i >= len(self.q):
            self._grow()
        if inertia is None:
            if isinstance(shape, Disc):
                inertia = 0.5 * mass * shape.radius ** 2
            else:
                inertia = mass * 0.1
        self.q[i] = pose
        self.u[i] = velocity
        self.m[i] = mass
        self.I[i] = inertia
        self.inv_m[i] = 0.0 if kinematic else 1.0 / mass
        self.inv_I[i] = 0.0 if kinematic else 1.0 / inertia
        self.disc_radius[i] = shape.radius if isinstance(shape, Disc) else 0.0
        self.active[i] = True
        self.ext_f[i] = 0.0
        body = Body(i, name, shape, material, kinematic, group, self)
        self.bodies.append(body)
        self.n_bodies += 1
        return body

    def _grow(self):
        for name in ("q", "u", "ext_f"):
            arr = getattr(self, name)
            setattr(self, name, np.vstack([arr, np.zeros((_GROW, 3))]))
        for name in ("m", "I", "inv_m", "inv_I", "disc_radius"):
            arr = getattr(self, name)
            setattr(self, name, np.concatenate([arr, np.zeros(_GROW)]))
        self.active = np.concatenate([self.active, np.zeros(_GROW, dtype=bool)])

    def remove_bodies(self, indices):
        """Remove bodies and compact the arrays.  Invalidate the warm cache."""
        drop = set(int(i) for i in indices)
        if not drop:
            return {b.index: b.index for b in self.bodies}
        keep = [b for b in self.bodies if b.index not in drop]
        old_idx = [b.index for b in keep]
        nk = len(keep)
        for name in ("q", "u", "ext_f"):
            arr = getattr(self, name)
            arr[:nk] = arr[old_idx]
        for name in ("m", "I", "inv_m", "inv_I", "disc_radius"):
            arr = getattr(self, name)
            arr[:nk] = arr[old_idx]
        self.active[:nk] = True
        self.active[nk:] = False
        remap = {}
        for new_i, b in enumerate(keep):
            remap[b.index] = new_i
            b.index = new_i
        self.bodies = keep
        self.n_bodies = nk
        self.no_collide = {p for p in self.no_collide if not (p & drop)}
        self.no_collide = {frozenset(remap[i] for i in p) for p in self.no_collide}
        self.kinematic_for_particles = {remap[i] for i in self.kinematic_for_particles
                                        if i not in drop}
        self._warm.clear()
        return remap

    def add_constraint(self, c):
        self.constraints.append(c)
        return c

    def disable_collision(self, a: Body, b: Body):
        self.no_collide.add(frozenset((a.index, b.index)))

    def collides(self, i: int, j: int) -> bool:
        return frozenset((i, j)) not in self.no_collide

    def disc_indices(self):
        idx = np.nonzero(self.disc_radius[:self.n_bodies] > 0.0)[0]
        return idx[self.active[idx]]

    # ------------------------------------------------------------------ step
    def step(self, cfg: SolverConfig):
        h = cfg.dt
        n = self.n_bodies
        if not np.all(np.isfinite(self.q[:n])) or not np.all(np.isfinite(self.u[:n])):
            raise StepError("non-finite state before step")

        contacts = detect_contacts(self, cfg.contact_margin)
        diag = StepDiagnostics(n_contacts=len(contacts))

        # partition contacts: any particle body -> iterative block
        group = np.array([b.group for b in self.bodies], dtype=np.int8)
        if len(contacts):
            it_mask = (group[contacts.ia] == ITERATIVE) | (group[contacts.ib] == ITERATIVE)
        else:
            it_mask = np.zeros(0, dtype=bool)

        approach = self._approach_speeds(contacts)
        impacting = (contacts.gap < 0.0) & (approach > cfg.impact_threshold) \
            if len(contacts) else np.zeros(0, dtype=bool)
        if impacting.any():
            diag.impact_stage = True
            self._impact_solve(contacts, it_mask, impacting, approach, cfg)

        # predictor: external forces (gravity + applied)
        f = self.ext_f[:n].copy()
        f[:, 1] -= self.m[:n] * self.gravity
        dyn = self.inv_m[:n] > 0
        self.u[:n, 0] += h * f[:, 0] * self.inv_m[:n]
        self.u[:n, 1] += h * f[:, 1] * self.inv_m[:n]
        self.u[:n, 2] += h * f[:, 2] * self.inv_I[:n]

        # direct block: persistent constraints + non-particle contacts.
        # Ideal joint rows are stepped SHAKE-style: the impulse direction is
        # the jacobian at the current pose, but its magnitude is re-linearised
        # so the *end-of-step* pose satisfies the constraint.  A single linear
        # shot (rhs = -g/h) leaks energy every step; iterating the violation
        # at the predicted pose keeps the pendulum test conservative.
        rows = []
        for c in self.constraints:
            rows.extend(c.rows())
        n_pers = len(rows)
        for p in self.row_providers:
            rows.extend(p(self, h))
        base = len(rows)
        crows = self._contact_rows(contacts, ~it_mask, h)
        for r in crows:
            if r.normal_row >= 0:
                r.normal_row += base
        rows.extend(crows)
        ideal = [i for i in range(n_pers)
                 if rows[i].positional and rows[i].compliance == 0.0
                 and rows[i].damping == 0.0]
        targ0 = [rows[i].target for i in ideal]
        try:
            lam, dres = solve_direct(rows, self.inv_m, self.inv_I, self.u, h,
                                     friction_passes=cfg.friction_passes)
            if ideal:
                self._shake_refine([rows[i] for i in ideal], targ0, h, n,
                                   cfg.shake_iterations)
        except DirectSolveError as e:
            raise StepError(str(e)) from e
        diag.direct_residual = dres
        self.last_row_forces = {}
        self.last_direct = []
        for r, p in zip(rows, lam):
            if r.tag:
                self.last_row_forces[r.tag] = p / h
            self.last_direct.append((r, p))

        # iterative block: particle contacts via PGS
        diag.pgs_residual = self._pgs_solve(contacts, it_mask, cfg, h)
        diag.pgs_iterations = cfg.iterations

        if not np.all(np.isfinite(self.u[:n])):
            raise StepError("non-finite velocities after solve")

        integrate_poses(self.q[:n], self.u[:n], h, self.active[:n])
        self._project_positions()
        self.ext_f[:n] = 0.0
        self.t += h
        self.diagnostics = diag
        return diag

    def _shake_refine(self, rows, targ0, h, n, n_iter):
        """Drive the end-of-step violation of the ideal joint rows to zero.

        Correction impulses act along the start-of-step jacobians (SHAKE),
        with the violation re-measured at the predicted end pose each pass.
        Only the ideal rows take part; contacts and motors keep the
        impulses of the main solve.
        """
        body_ids = sorted({r.body_a for r in rows} | {r.body_b for r in rows})
        body_ids = [b for b in body_ids
                    if b >= 0 and (self.inv_m[b] > 0 or self.inv_I[b] > 0)]
        if not body_ids:
            return
        slot = {b: k for k, b in enumerate(body_ids)}
        nr, nd = len(rows), 3 * len(body_ids)
        J = np.zeros((nr, nd))
        W = np.zeros(nd)
        for k, b in enumerate(body_ids):
            W[3 * k:3 * k + 2] = self.inv_m[b]
            W[3 * k + 2] = self.inv_I[b]
        for i, r in enumerate(rows):
            if r.body_a in slot:
                J[i, 3 * slot[r.body_a]:3 * slot[r.body_a] + 3] = r.ja
            if r.body_b in slot:
                J[i, 3 * slot[r.body_b]:3 * slot[r.body_b] + 3] = r.jb
        A = (J * W) @ J.T
        A[np.diag_indices_from(A)] += 1e-12 * max(1.0, np.trace(A) / nr)
        ideal_idx = list(range(nr))
        for _ in range(n_iter):
            ge = self._ideal_violation(h, n)
            res = np.array([ge[i] - targ0[i] for i in ideal_idx])
            if np.max(np.abs(res)) < 1e-10:
                return
            lam = _min_norm_solve(A, -res / h)
            dv = W * (J.T @ lam)
            for k, b in enumerate(body_ids):
                self.u[b] += dv[3 * k:3 * k + 3]

    def _ideal_violation(self, h, n):
        """Re-measure ideal joint row g at the end-of-step predicted pose."""
        q_save = self.q[:n].copy()
        integrate_poses(self.q[:n], self.u[:n], h, self.active[:n])
        try:
            out = []
            for c in self.constraints:
                for r in c.rows():
                    if r.positional and r.compliance == 0.0 and r.damping == 0.0:
                        out.append(r.g)
            return out
        finally:
            self.q[:n] = q_save

    def _project_positions(self, n_iter=2):
        """Mass-weighted projection of poses onto the ideal-joint manifold.

        Velocities are untouched, so the projection does not pump energy; it
        removes the first-order drift of the velocity-level joint rows.
        """
        for _ in range(n_iter):
            rows = []
            for c in self.constraints:
                for r in c.rows():
                    if r.positional and r.compliance == 0.0 and r.damping == 0.0:
                        rows.append(r)
            if not rows:
                return
            body_ids = sorted({r.body_a for r in rows} | {r.body_b for r in rows})
            body_ids = [b for b in body_ids
                        if b >= 0 and (self.inv_m[b] > 0 or self.inv_I[b] > 0)]
            if not body_ids:
                return
            slot = {b: k for k, b in enumerate(body_ids)}
            nr, nd = len(rows), 3 * len(body_ids)
            J = np.zeros((nr, nd))
            W = np.zeros(nd)
            for k, b in enumerate(body_ids):
                W[3 * k:3 * k + 2] = self.inv_m[b]
                W[3 * k + 2] = self.inv_I[b]
            g = np.zeros(nr)
            for i, r in enumerate(rows):
                g[i] = r.g
                if r.body_a in slot:
                    J[i, 3 * slot[r.body_a]:3 * slot[r.body_a] + 3] = r.ja
                if r.body_b in slot:
                    J[i, 3 * slot[r.body_b]:3 * slot[r.body_b] + 3] = r.jb
            if np.max(np.abs(g)) < 1e-12:
                return
            A = (J * W) @ J.T
            A[np.diag_indices_from(A)] += 1e-12 * max(1.0, np.trace(A) / nr)
            x = _min_norm_solve(A, g)
            dq = W * (J.T @ x)
            for k, b in enumerate(body_ids):
                self.q[b] -= dq[3 * k:3 * k + 3]

    # ------------------------------------------------------------ sub-solves
    def _approach_speeds(self, contacts: ContactSet):
        if len(contacts) == 0:
            return np.zeros(0)
        ia, ib = contacts.ia, contacts.ib
        rax = contacts.px - self.q[ia, 0]
        raz = contacts.pz - self.q[ia, 1]
        rbx = contacts.px - self.q[ib, 0]
        rbz = contacts.pz - self.q[ib, 1]
        va = self.u[ia]
        vb = self.u[ib]
        sep = (contacts.nx * (vb[:, 0] - va[:, 0]) + contacts.nz * (vb[:, 1] - va[:, 1])
               + (rbx * contacts.nz - rbz * contacts.nx) * vb[:, 2]
               - (rax * contacts.nz - raz * contacts.nx) * va[:, 2])
        return -sep

    def _pgs_inv(self):
        n = self.n_bodies
        inv_m = self.inv_m[:n].copy()
        inv_I = self.inv_I[:n].copy()
        for i in self.kinematic_for_particles:
            inv_m[i] = 0.0
            inv_I[i] = 0.0
        return inv_m, inv_I

    def _pgs_arrays(self, contacts: ContactSet, mask, h, restitution_rhs=None):
        idx = np.nonzero(mask)[0]
        cs = contacts
        ia = cs.ia[idx]
        ib = cs.ib[idx]
        rax = cs.px[idx] - self.q[ia, 0]
        raz = cs.pz[idx] - self.q[ia, 1]
        rbx = cs.px[idx] - self.q[ib, 0]
        rbz = cs.pz[idx] - self.q[ib, 1]
        if restitution_rhs is not None:
            rhs = restitution_rhs[idx]
            sigma = np.zeros(len(idx))
        else:
            tau = np.maximum(cs.gamma[idx], 2.0 * h)
            denom = h + tau
            # cap the positional correction so a deeply penetrated contact
            # relaxes over a few steps instead of firing the body out
            corr = np.minimum(-cs.gap[idx], 0.5 * cs.r_roll[idx])
            rhs = np.where(cs.gap[idx] < 0.0, corr / denom, 0.0)
            sigma = cs.eps[idx] / (h * denom)
        return idx, ia, ib, rax, raz, rbx, rbz, rhs, sigma

    def _pgs_solve(self, contacts, it_mask, cfg, h):
        if len(contacts) == 0 or not it_mask.any():
            return 0.0
        idx, ia, ib, rax, raz, rbx, rbz, rhs, sigma = self._pgs_arrays(contacts, it_mask, h)
        keys = contacts.keys()
        p_n = np.zeros(len(idx))
        p_t = np.zeros(len(idx))
        p_r = np.zeros(len(idx))
        if cfg.warm_start and self._warm:
            for k, ci in enumerate(idx):
                w = self._warm.get(keys[ci])
                if w is not None:
                    p_n[k], p_t[k], p_r[k] = w
        inv_m, inv_I = self._pgs_inv()
        res = pgs_sweeps(self.u[:self.n_bodies], inv_m, inv_I,
                         ia, ib, contacts.nx[idx], contacts.nz[idx],
                         rax, raz, rbx, rbz, rhs, sigma,
                         contacts.mu[idx], contacts.mu_r[idx], contacts.r_roll[idx],
                         p_n, p_t, p_r, cfg.iterations)
        warm = {}
        for k, ci in enumerate(idx):
            warm[keys[ci]] = (p_n[k], p_t[k], p_r[k])
        self._warm = warm
        self.last_contacts = contacts
        self._store_pgs_impulses(idx, len(contacts), p_n, p_t, p_r)
        return res

    def _store_pgs_impulses(self, idx, n_total, p_n, p_t, p_r):
        self.last_pn = np.zeros(n_total)
        self.last_pt = np.zeros(n_total)
        self.last_pr = np.zeros(n_total)
        self.last_pn[idx] = p_n
        self.last_pt[idx] = p_t
        self.last_pr[idx] = p_r

    def _contact_rows(self, contacts, mask, h):
        """ConstraintRows for direct-block contacts (normal + friction + rolling)."""
        rows = []
        idx = np.nonzero(mask)[0] if len(contacts) else []
        for k in idx:
            a, b = int(contacts.ia[k]), int(contacts.ib[k])
            n = np.array([contacts.nx[k], contacts.nz[k]])
            p = np.array([contacts.px[k], contacts.pz[k]])
            ra = p - self.q[a, :2]
            rb = p - self.q[b, :2]
            cna = ra[0] * n[1] - ra[1] * n[0]
            cnb = rb[0] * n[1] - rb[1] * n[0]
            gamma = max(contacts.gamma[k], 2.0 * h)
            nrow = ConstraintRow(a, b,
                                 ja=np.array([-n[0], -n[1], -cna]),
                                 jb=np.array([n[0], n[1], cnb]),
                                 g=min(contacts.gap[k], 0.0),
                                 compliance=contacts.eps[k], damping=gamma,
                                 lo=0.0, hi=np.inf, kind=CONTACT_NORMAL,
                                 tag=f"contact:{a}-{b}:{int(contacts.feat[k])}")
            rows.append(nrow)
            ni = len(rows) - 1
            t = np.array([-n[1], n[0]])
            cta = ra[0] * t[1] - ra[1] * t[0]
            ctb = rb[0] * t[1] - rb[1] * t[0]
            trow = ConstraintRow(a, b,
                                 ja=np.array([-t[0], -t[1], -cta]),
                                 jb=np.array([t[0], t[1], ctb]),
                                 damping=1.0, kind=CONTACT_TANGENT,
                                 normal_row=ni, friction_scale=contacts.mu[k])
            rows.append(trow)
            if contacts.mu_r[k] > 0.0:
                rrow = ConstraintRow(a, b,
                                     ja=np.array([0.0, 0.0, -1.0]),
                                     jb=np.array([0.0, 0.0, 1.0]),
                                     damping=1.0, kind=ROLLING,
                                     normal_row=ni,
                                     friction_scale=contacts.mu_r[k] * contacts.r_roll[k])
                rows.append(rrow)
        return rows

    def _impact_solve(self, contacts, it_mask, impacting, approach, cfg):
        """Newton impact law at impacting contacts; other constraints held."""
        h = cfg.dt
        # restitution targets: post separation rate = e * approach (>=0)
        rhs_all = np.where(impacting, contacts.rest * approach, 0.0)

        # direct side: joints/motors at their targets, contact rows velocity-level.
        # Compliant positional rows (limit stops and the like) are one-sided
        # springs; zeroing their g would turn an inactive stop into a rigid
        # rate=0 clamp, so they sit the impulse exchange out entirely.
        rows = []
        for c in self.constraints:
            for r in c.rows():
                if r.positional:
                    if r.compliance > 0.0:
                        continue
                    r.g = 0.0          # hold, no position correction during impact
                rows.append(r)
        d_idx = np.nonzero(~it_mask)[0] if len(contacts) else []
        for k in d_idx:
            crows = self._contact_rows_single(contacts, k, rhs_all[k])
            base = len(rows)
            rows.extend(crows)
            rows[base + 1].normal_row = base
        if rows:
            try:
                solve_direct(rows, self.inv_m, self.inv_I, self.u, h,
                             friction_passes=cfg.friction_passes)
            except DirectSolveError as e:
                raise StepError(f"impact stage: {e}") from e

        if it_mask.any():
            idx, ia, ib, rax, raz, rbx, rbz, _, _ = self._pgs_arrays(
                contacts, it_mask, h, restitution_rhs=rhs_all)
            rhs = rhs_all[idx]
            sigma = np.zeros(len(idx))
            p_n = np.zeros(len(idx))
            p_t = np.zeros(len(idx))
            p_r = np.zeros(len(idx))
            inv_m, inv_I = self._pgs_inv()
            pgs_sweeps(self.u[:self.n_bodies], inv_m, inv_I,
                       ia, ib, contacts.nx[idx], contacts.nz[idx],
                       rax, raz, rbx, rbz, rhs, sigma,
                       contacts.mu[idx], contacts.mu_r[idx], contacts.r_roll[idx],
                       p_n, p_t, p_r, cfg.iterations)

    def _contact_rows_single(self, contacts, k, rhs_target):
        """Velocity-level contact rows for the impact stage."""
        a, b = int(contacts.ia[k]), int(contacts.ib[k])
        n = np.array([contacts.nx[k], contacts.nz[k]])
        p = np.array([contacts.px[k], contacts.pz[k]])
        ra = p - self.q[a, :2]
        rb = p - self.q[b, :2]
        cna = ra[0] * n[1] - ra[1] * n[0]
        cnb = rb[0] * n[1] - rb[1] * n[0]
        # velocity-level rows: impacts carry no position correction
        nrow = ConstraintRow(a, b,
                             ja=np.array([-n[0], -n[1], -cna]),
                             jb=np.array([n[0], n[1], cnb]),
                             damping=1.0, target=rhs_target,
                             lo=0.0, hi=np.inf, kind="motor")
        t = np.array([-n[1], n[0]])
        cta = ra[0] * t[1] - ra[1] * t[0]
        ctb = rb[0] * t[1] - rb[1] * t[0]
        trow = ConstraintRow(a, b,
                             ja=np.array([-t[0], -t[1], -cta]),
                             jb=np.array([t[0], t[1], ctb]),
                             damping=1.0, kind=CONTACT_TANGENT,
                             friction_scale=contacts.mu[k])
        return [nrow, trow]


def apply_impacts(world: World, contacts: ContactSet, cfg: SolverConfig):
    """Standalone impact resolution (spec operation); used by step() internally."""
    group = np.array([b.group for b in world.bodies], dtype=np.int8)
    if len(contacts):
        it_mask = (group[contacts.ia] == ITERATIVE) | (group[contacts.ib] == ITERATIVE)
    else:
        it_mask = np.zeros(0, dtype=bool)
    approach = world._approach_speeds(contacts)
    impacting = (contacts.gap < 0.0) & (approach > cfg.impact_threshold) \
        if len(contacts) else np.zeros(0, dtype=bool)
    if impacting.any():
        world._impact_solve(contacts, it_mask, impacting, approach, cfg)
    return world.u


def solve_pgs(world: World, contacts: ContactSet, cfg: SolverConfig):
    """Standalone PGS solve over a contact block (spec operation)."""
    mask = np.ones(len(contacts), dtype=bool)
    res = world._pgs_solve(contacts, mask, cfg, cfg.dt)
    return world.last_pn, world.last_pt, res
