"""Heightfield soil with an actively resolved dig zone.

The terrain at rest is a uniform height curve carrying per-cell mass.  While
the bucket's cutting edge is engaged, a passive-failure wedge ahead of the
edge is predicted, its cell mass is converted into particles, and the
particle cloud is additionally substituted by a single rigid "aggregate"
body that couples the soil to the vehicle: interface A presses against the
bucket with the bucket-soil friction, interface B rests on the surrounding
terrain with tan(phi_eff).  A unilateral penetration row resists edge
advance until the driving force exceeds a critical overburden force.

Everything is bookkept in kg; the global ledger (cells + active particles +
bucket load) is conserved through resolve/deposit transitions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull

from .core import (ConstraintRow, ContactMaterial, Disc, ITERATIVE, Material,
                   Polygon, Polyline, World)
from .dem import particle_mass


class TerrainError(Exception):
    pass


# ----------------------------------------------------------------- parameters
@dataclass(frozen=True)
class SoilParams:
    bulk_density: float = 1727.0     # kg/m^3
    phi: float = 32.0                # deg, internal friction angle
    psi: float = 8.0                 # deg, dilatancy angle
    young: float = 4.6e6             # Pa
    bucket_friction: float = 0.2     # bucket-soil surface friction
    stiffness_multiplier: float = 0.01  # interface-B compliance scale

    def __post_init__(self):
        if self.phi < 0 or self.psi < 0:
            raise TerrainError("friction/dilatancy angles must be non-negative")
        if self.phi + self.psi >= 90.0:
            raise TerrainError("phi + psi must stay below 90 deg")
        if self.stiffness_multiplier <= 0:
            raise TerrainError("stiffness multiplier must be positive")
        if self.bulk_density <= 0 or self.young <= 0:
            raise TerrainError("density and stiffness must be positive")


@dataclass(frozen=True)
class CuttingEdge:
    """Cutting edge geometry and pose, planar reduction of the tooth row."""
    position: np.ndarray             # (2,) world, m
    direction: np.ndarray            # (2,) unit vector, cutting (advance) dir
    r_max: float = 0.010             # m
    r_min: float = 0.0025            # m
    tooth: float = 0.010             # m, equivalent tooth length

    def __post_init__(self):
        if not (0 < self.r_min <= self.r_max) or self.tooth <= 0:
            raise TerrainError("edge radii/tooth must be positive, r_min <= r_max")
        d = np.asarray(self.direction, dtype=float)
        n = np.hypot(*d)
        if n < 1e-12:
            raise TerrainError("degenerate cutting direction")
        object.__setattr__(self, "direction", d / n)
        object.__setattr__(self, "position",
                           np.asarray(self.position, dtype=float))

    @property
    def c_geo(self) -> float:
        """Geometry factor of the penetration model, in meters."""
        return 0.5 * (self.r_max + self.r_min) + self.tooth


def effective_friction(phi: float, psi: float) -> float:
    """Effective internal friction angle: phi + psi (both deg)."""
    return phi + psi


# -------------------------------------------------------------- height field
class MultiscaleTerrain:
    """Uniform height grid with per-cell mass occupancy.

    Heights are derived from cell mass (mass is the primary state so the
    ledger stays exact); ``x0`` is the left edge, cells are ``cell`` wide.
    """

    def __init__(self, x0, cell, heights, soil: SoilParams = None,
                 slab_depth: float = 2.685):
        self.x0 = float(x0)
        self.cell = float(cell)
        self.soil = soil or SoilParams()
        self.slab_depth = float(slab_depth)
        h = np.asarray(heights, dtype=float)
        if h.ndim != 1 or len(h) < 2:
            raise TerrainError("need a 1-D height array with >= 2 cells")
        if not np.all(np.isfinite(h)) or np.any(h < 0):
            raise TerrainError("heights must be finite and non-negative")
        area = self.cell * self.slab_depth
        self.cell_mass = self.soil.bulk_density * area * h
        self.state = "idle"          # idle | engaged | breakout

    # -- geometry ----------------------------------------------------------
    @property
    def n_cells(self):
        return len(self.cell_mass)

    @property
    def heights(self):
        return self.cell_mass / (self.soil.bulk_density * self.cell * self.slab_depth)

    @property
    def x_centers(self):
        return self.x0 + self.cell * (np.arange(self.n_cells) + 0.5)

    def height_at(self, x):
        return np.interp(x, self.x_centers, self.heights)

    def surface_tangent(self, x):
        """Angle (rad) of the free surface at x, from central differences."""
        h = self.heights
        xc = self.x_centers
        i = int(np.clip((x - xc[0]) / self.cell, 1, self.n_cells - 2))
        slope = (h[i + 1] - h[i - 1]) / (2.0 * self.cell)
        return math.atan(slope)

    def cell_index(self, x):
        return int(np.clip((x - self.x0) / self.cell, 0, self.n_cells - 1))

    def surface_points(self):
        """Polyline of the free surface, oriented so soil is below (+x order)."""
        xc = self.x_centers
        h = self.heights
        pts = np.column_stack([np.concatenate([[self.x0], xc, [self.x0 + self.cell * self.n_cells]]),
                               np.concatenate([[h[0]], h, [h[-1]]])])
        return pts

    @property
    def total_cell_mass(self):
        return float(np.sum(self.cell_mass))

    # -- CSV I/O -----------------------------------------------------------
    def to_csv(self, path):
        np.savetxt(path, np.column_stack([self.x_centers, self.heights]),
                   delimiter=",", header="x,z", comments="")

    @classmethod
    def from_csv(cls, path, soil=None, slab_depth=2.685):
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        x = data[:, 0]
        dx = np.diff(x)
        if len(x) < 2 or np.any(dx <= 0) or np.ptp(dx) > 1e-6 * dx[0]:
            raise TerrainError("height curve must have a uniform increasing x grid")
        cell = float(dx[0])
        return cls(x[0] - 0.5 * cell, cell, data[:, 1], soil=soil,
                   slab_depth=slab_depth)


def heights_from_profile(profile, x0, x1, cell, **kw):
    """Sample a (n,2) surface profile onto a uniform grid terrain."""
    prof = np.atleast_2d(np.asarray(profile, dtype=float))
    n = int(round((x1 - x0) / cell))
    xc = x0 + cell * (np.arange(n) + 0.5)
    h = np.interp(xc, prof[:, 0], prof[:, 1])
    return MultiscaleTerrain(x0, cell, np.maximum(h, 0.0), **kw)


# ------------------------------------------------------------- active zone
@dataclass
class ActiveZone:
    polygon: np.ndarray              # (n,2) wedge vertices, CCW; empty -> (0,2)
    failure_angle: float             # deg, from horizontal

    @property
    def area(self) -> float:
        p = self.polygon
        if len(p) < 3:
            return 0.0
        x, z = p[:, 0], p[:, 1]
        return 0.5 * abs(np.dot(x, np.roll(z, -1)) - np.dot(z, np.roll(x, -1)))

    @property
    def empty(self) -> bool:
        return len(self.polygon) < 3

    def x_range(self):
        if self.empty:
            return (0.0, 0.0)
        return float(np.min(self.polygon[:, 0])), float(np.max(self.polygon[:, 0]))

    def lower_z(self, x):
        """Lower boundary of the wedge at x (failure plane / edge level)."""
        if self.empty:
            return np.inf
        # the wedge lower boundary is the edge->exit failure segment
        e, xp = self._edge, self._exit
        if xp[0] == e[0]:
            return e[1]
        t = np.clip((np.asarray(x) - e[0]) / (xp[0] - e[0]), 0.0, 1.0)
        return e[1] + t * (xp[1] - e[1])


def predict_active_zone(edge: CuttingEdge, terrain: MultiscaleTerrain,
                        soil: SoilParams = None) -> ActiveZone:
    """Passive-failure wedge ahead of the cutting edge.

    The failure plane leaves the edge at beta = 45 - phi_eff/2 from the
    local free-surface tangent, tilted by half the cutting-plane angle, and
    runs to the free surface in the advance direction.  An edge above the
    surface yields an empty zone.
    """
    soil = soil or terrain.soil
    ex, ez = float(edge.position[0]), float(edge.position[1])
    surf = float(terrain.height_at(ex))
    if ez >= surf - 1e-9:
        return ActiveZone(np.zeros((0, 2)), 0.0)

    fwd = 1.0 if edge.direction[0] >= 0 else -1.0
    phi_eff = effective_friction(soil.phi, soil.psi)
    beta = math.radians(45.0 - 0.5 * phi_eff)
    theta_s = terrain.surface_tangent(ex) * fwd
    # cutting-plane inclination relative to the surface tangent
    alpha = math.atan2(float(edge.direction[1]) * fwd, float(edge.direction[0]) * fwd) - theta_s
    ang = theta_s + beta + 0.5 * alpha
    ang = min(max(ang, math.radians(5.0)), math.radians(85.0))

    # march the failure ray to the surface
    dx = fwd * math.cos(ang)
    dz = math.sin(ang)
    t_hi = (np.max(terrain.heights) - ez + terrain.cell) / max(dz, 1e-6)
    t = _ray_surface_intersection(terrain, ex, ez, dx, dz, t_hi)
    if t is None:
        return ActiveZone(np.zeros((0, 2)), math.degrees(ang))
    exit_pt = np.array([ex + t * dx, ez + t * dz])

    # wedge: edge -> exit point -> back along the surface -> down to the edge
    xs = [exit_pt[0]]
    n_arc = max(2, int(abs(exit_pt[0] - ex) / terrain.cell) + 1)
    arc_x = np.linspace(exit_pt[0], ex, n_arc + 1)[1:]
    poly = [np.array([ex, ez]), exit_pt]
    for x in arc_x:
        poly.append(np.array([x, float(terrain.height_at(x))]))
    poly = np.asarray(poly)
    if fwd < 0:
        poly = poly[::-1]
    zone = ActiveZone(poly, math.degrees(ang))
    zone._edge = np.array([ex, ez])
    zone._exit = exit_pt
    return zone


def _ray_surface_intersection(terrain, x0, z0, dx, dz, t_max):
    n = 200
    ts = np.linspace(0.0, t_max, n)
    zs = z0 + ts * dz
    hs = terrain.height_at(x0 + ts * dx)
    below = zs < hs
    if below[-1]:
        return None
    k = int(np.argmax(~below))
    if k == 0:
        return 0.0
    # bisect the bracketing interval
    a, b = ts[k - 1], ts[k]
    for _ in range(40):
        m = 0.5 * (a + b)
        if z0 + m * dz < terrain.height_at(x0 + m * dx):
            a = m
        else:
            b = m
    return 0.5 * (a + b)


def resolve_zone_to_particles(terrain: MultiscaleTerrain, zone: ActiveZone,
                              particle_size: float, seed: int = 0):
    """Convert cell mass inside the wedge to a particle description.

    Cell columns covered by the wedge give up the mass above the failure
    plane, in whole-particle quanta (the remainder stays in the cell), so
    the ledger balances exactly.  Returns (positions (n,2), radii (n,),
    masses (n,)).
    """
    if zone.empty:
        return np.zeros((0, 2)), np.zeros(0), np.zeros(0)
    rng = np.random.default_rng(seed)
    r = 0.5 * particle_size
    m_p = terrain.soil.bulk_density * particle_size ** 2 * terrain.slab_depth
    x_lo, x_hi = zone.x_range()
    pos, rad, mas = [], [], []
    for i in range(terrain.cell_index(x_lo), terrain.cell_index(x_hi) + 1):
        xc = terrain.x_centers[i]
        h = terrain.heights[i]
        z_lo = float(zone.lower_z(xc))
        if z_lo >= h or h <= 0:
            continue
        frac = min(1.0, max(0.0, (h - z_lo) / h))
        avail = terrain.cell_mass[i] * frac
        n = int(avail / m_p)
        if n == 0:
            continue
        take = n * m_p
        terrain.cell_mass[i] -= take
        # stack the new particles in the vacated band, jittered
        for k in range(n):
            x = xc + 0.35 * terrain.cell * rng.uniform(-1, 1)
            z = min(z_lo + r + 0.95 * particle_size * k, h - r) + \
                0.1 * r * rng.uniform(-1, 1)
            pos.append((x, max(z, z_lo + 0.5 * r)))
            rad.append(r)
            mas.append(m_p)
    if not pos:
        return np.zeros((0, 2)), np.zeros(0), np.zeros(0)
    return np.asarray(pos), np.asarray(rad), np.asarray(mas)


# --------------------------------------------------------------- aggregate
@dataclass
class AggregateBody:
    mass: float
    com: np.ndarray                  # (2,)
    inertia: float                   # about com
    velocity: np.ndarray             # (2,) com velocity
    omega: float                     # angular velocity about com
    hull: np.ndarray                 # (n,2) convex hull vertices, CCW

    @property
    def momentum(self):
        return self.mass * self.velocity

    @property
    def angular_momentum(self):
        return self.inertia * self.omega


def refresh_aggregate(x, z, vx, vz, omega, mass, radius=None) -> AggregateBody:
    """Aggregate rigid body inheriting mass/inertia/momentum of the particles."""
    x = np.asarray(x, float)
    z = np.asarray(z, float)
    mass = np.asarray(mass, float)
    if len(x) == 0:
        raise TerrainError("aggregate needs at least one particle")
    vx = np.asarray(vx, float)
    vz = np.asarray(vz, float)
    omega = np.asarray(omega, float)
    M = float(np.sum(mass))
    com = np.array([np.sum(mass * x), np.sum(mass * z)]) / M
    vel = np.array([np.sum(mass * vx), np.sum(mass * vz)]) / M
    rx = x - com[0]
    rz = z - com[1]
    if radius is None:
        radius = np.zeros_like(x)
    radius = np.asarray(radius, float)
    i_own = 0.5 * mass * radius ** 2
    inertia = float(np.sum(i_own + mass * (rx ** 2 + rz ** 2)))
    # angular momentum about the com: spin + orbital
    L = float(np.sum(i_own * omega + mass * (rx * (vz - vel[1]) - rz * (vx - vel[0]))))
    w = L / inertia if inertia > 0 else 0.0
    hull = _hull_points(x, z, radius)
    return AggregateBody(M, com, inertia, vel, w, hull)


def _hull_points(x, z, radius):
    pts = np.column_stack([x, z])
    if len(pts) < 3:
        # degenerate: inflate to a small quad around the points
        r = float(np.max(radius)) if len(radius) else 0.01
        c = pts.mean(axis=0)
        span = max(np.ptp(pts[:, 0]), np.ptp(pts[:, 1]), r)
        d = 0.5 * span + r
        return c + np.array([[-d, -d], [d, -d], [d, d], [-d, d]])
    try:
        hull = ConvexHull(pts)
        return pts[hull.vertices]
    except Exception:
        c = pts.mean(axis=0)
        d = max(np.ptp(pts[:, 0]), np.ptp(pts[:, 1]), 0.02)
        return c + np.array([[-d, -d], [d, -d], [d, d], [-d, d]])


# ----------------------------------------------------- penetration constraint
def critical_penetration_force(edge: CuttingEdge, soil: SoilParams,
                               depth: float, slab_depth: float = 2.685) -> float:
    """Overburden penetration threshold F_crit = c_geo * rho * g * d * L.

    Zero at the surface and linear in depth; grows with blunter edges.
    """
    d = max(0.0, float(depth))
    return edge.c_geo * soil.bulk_density * 9.81 * d * slab_depth


def penetration_constraint(edge: CuttingEdge, soil: SoilParams, depth: float,
                           body_index: int, body_com, slab_depth: float = 2.685,
                           h: float = 0.01) -> ConstraintRow:
    """Unilateral row resisting edge advance until F_crit is exceeded.

    The row measures the edge velocity along the cutting direction on the
    given body; its force stays in [0, F_crit], so the bucket only moves
    forward once the drivetrain pushes harder than the soil resists.
    """
    f_crit = critical_penetration_force(edge, soil, depth, slab_depth)
    dx, dz = float(edge.direction[0]), float(edge.direction[1])
    r = edge.position - np.asarray(body_com, float)
    # positive impulse must oppose advance: jacobian is minus the direction
    ja = np.array([-dx, -dz, -(r[0] * dz - r[1] * dx)])
    return ConstraintRow(body_index, -1, ja=ja, jb=np.zeros(3),
                         damping=1.0, kind="penetration",
                         lo=0.0, hi=f_crit, tag="penetration")


# ------------------------------------------------------------------ breakout
def points_in_bucket(points, shell_world):
    """Containment test against the bucket shell closed across its mouth."""
    from matplotlib.path import Path
    pts = np.atleast_2d(np.asarray(points, float))
    if len(pts) == 0:
        return np.zeros(0, dtype=bool)
    return Path(np.vstack([shell_world, shell_world[0]])).contains_points(pts)


def deposit_on_breakout(terrain: MultiscaleTerrain, positions, masses,
                        bucket_shell_world):
    """Merge particles outside the bucket back into the height curve.

    Returns a boolean mask of the particles kept as bucket load.  Mass of
    the remaining particles is added to the cell column under each particle,
    so the ledger balances exactly.
    """
    positions = np.atleast_2d(np.asarray(positions, float))
    masses = np.asarray(masses, float)
    inside = points_in_bucket(positions, bucket_shell_world)
    for (x, _z), m in zip(positions[~inside], masses[~inside]):
        i = min(max(terrain.cell_index(x), 0), terrain.n_cells - 1)
        terrain.cell_mass[i] += m
    return inside


# ----------------------------------------------------------------- coupling
class MultiscaleDig:
    """Couples a height-curve terrain to a digging bucket inside a world.

    The terrain surface lives in the world as a kinematic polyline that is
    rebuilt whenever cell mass changes.  While the cutting edge is engaged,
    the predicted failure wedge is resolved into particles that collide with
    the bucket (interface A: bucket-soil friction) and with the surface
    (interface B: tan(phi_eff) friction, compliance scaled by the stiffness
    multiplier), and a reduced aggregate body is refreshed from the particle
    cloud each tick.  A unilateral penetration row on the bucket resists
    advance until the drive force exceeds the overburden threshold.

    Call :meth:`update` once per solver step, before ``world.step``.
    """

    def __init__(self, world: World, terrain: MultiscaleTerrain, bucket,
                 edge_local, cut_dir_local=(1.0, 0.0), particle_size=None,
                 engage_depth: float = 0.001, breakout_hold: float = 0.2):
        self.world = world
        self.terrain = terrain
        self.bucket = bucket
        self.edge_local = np.asarray(edge_local, float)
        self.cut_local = np.asarray(cut_dir_local, float)
        self.particle_size = float(particle_size or terrain.cell)
        self.engage_depth = float(engage_depth)
        self.breakout_hold = float(breakout_hold)

        self.active = []                 # particle Body handles in the zone
        self.load_bodies = []            # particles carried in the bucket
        self.mass_in_bucket = 0.0
        self.aggregate: AggregateBody | None = None
        self.zone = ActiveZone(np.zeros((0, 2)), 0.0)
        self._above_time = 0.0
        self._resolve_seed = 0
        self._setup_materials()
        self.surface = world.add_body(
            "terrain_surface", Polyline(terrain.surface_points()),
            kinematic=True, material="terrain")
        self.initial_mass = self.total_mass
        world.row_providers.append(self._penetration_rows)

    # -- materials ---------------------------------------------------------
    def _setup_materials(self):
        w, soil = self.world, self.terrain.soil
        phi_eff = effective_friction(soil.phi, soil.psi)
        from .dem import GRAVEL_MU, GRAVEL_MU_R
        if "soil" not in w.materials:
            w.add_material(Material("soil", friction=GRAVEL_MU,
                                    restitution=0.0, rolling=GRAVEL_MU_R,
                                    young=soil.young))
        if "terrain" not in w.materials:
            w.add_material(Material("terrain", friction=GRAVEL_MU,
                                    restitution=0.0, rolling=GRAVEL_MU_R,
                                    young=soil.young))
        # interface B: particle/aggregate against the surrounding terrain
        w.materials.set_pair("soil", "terrain", ContactMaterial(
            friction=math.tan(math.radians(phi_eff)), restitution=0.0,
            rolling=GRAVEL_MU_R,
            young=soil.young / soil.stiffness_multiplier))
        # interface A: soil against the bucket shell
        if "bucket" in w.materials:
            bm = w.materials.get("bucket")
            w.materials.set_pair("soil", "bucket", ContactMaterial(
                friction=soil.bucket_friction, restitution=0.0, rolling=0.0,
                young=2.0 / (1.0 / soil.young + 1.0 / bm.young)))
        if "tire" in w.materials:
            tm = w.materials.get("tire")
            for other in ("soil", "terrain"):
                w.materials.set_pair("tire", other, ContactMaterial(
                    friction=tm.friction, restitution=0.0,
                    rolling=tm.rolling,
                    young=2.0 / (1.0 / soil.young + 1.0 / tm.young)))

    # -- kinematics --------------------------------------------------------
    def edge(self) -> CuttingEdge:
        x, z, th = self.world.q[self.bucket.index]
        c, s = math.cos(th), math.sin(th)
        ex = x + c * self.edge_local[0] - s * self.edge_local[1]
        ez = z + s * self.edge_local[0] + c * self.edge_local[1]
        dx = c * self.cut_local[0] - s * self.cut_local[1]
        dz = s * self.cut_local[0] + c * self.cut_local[1]
        return CuttingEdge(position=(ex, ez), direction=(dx, dz))

    def bucket_shell_world(self):
        from .core.shapes import to_world
        return to_world(self.bucket.shape.points,
                        self.world.q[self.bucket.index])

    # -- bookkeeping -------------------------------------------------------
    @property
    def active_mass(self) -> float:
        return float(sum(self.world.m[b.index] for b in self.active))

    @property
    def total_mass(self) -> float:
        return self.terrain.total_cell_mass + self.active_mass + self.mass_in_bucket

    @property
    def mass_error(self) -> float:
        return abs(self.total_mass - self.initial_mass) / self.initial_mass

    # -- per-step update ---------------------------------------------------
    def update(self, dt: float):
        terr, world = self.terrain, self.world
        edge = self.edge()
        depth = float(terr.height_at(edge.position[0])) - float(edge.position[1])

        if terr.state == "idle":
            if depth >= self.engage_depth:
                terr.state = "engaged"
                self._above_time = 0.0
        if terr.state == "engaged":
            if depth >= self.engage_depth:
                self._above_time = 0.0
                self._resolve_step(edge)
            else:
                self._above_time += dt
                if self._above_time >= self.breakout_hold:
                    self._breakout()
        self._refresh_aggregate()

    def _resolve_step(self, edge):
        terr = self.terrain
        self.zone = predict_active_zone(edge, terr)
        if self.zone.empty:
            return
        pos, rad, mas = resolve_zone_to_particles(
            terr, self.zone, self.particle_size, seed=self._resolve_seed)
        self._resolve_seed += 1
        if len(rad):
            base = len(self.active)
            for k in range(len(rad)):
                b = self.world.add_body(
                    f"soil_{self._resolve_seed}_{base + k}", Disc(rad[k]),
                    mass=mas[k], pose=(pos[k, 0], pos[k, 1], 0.0),
                    material="soil", group=ITERATIVE)
                self.active.append(b)
            self._refresh_surface()

    def _breakout(self):
        terr, world = self.terrain, self.world
        terr.state = "breakout"
        if self.active:
            idx = [b.index for b in self.active]
            pos = world.q[idx, :2]
            mas = world.m[idx]
            inside = deposit_on_breakout(terr, pos, mas,
                                         self.bucket_shell_world())
            kept = [b for b, keep in zip(self.active, inside) if keep]
            dropped = [b.index for b, keep in zip(self.active, inside)
                       if not keep]
            self.mass_in_bucket += float(np.sum(mas[inside]))
            self.load_bodies.extend(kept)
            self.active = []
            if dropped:
                world.remove_bodies(dropped)
            self._refresh_surface()
        self.aggregate = None
        self.zone = ActiveZone(np.zeros((0, 2)), 0.0)
        terr.state = "idle"

    def _refresh_surface(self):
        self.surface.shape = Polyline(self.terrain.surface_points())

    def _refresh_aggregate(self):
        if not self.active:
            self.aggregate = None
            return
        w = self.world
        idx = [b.index for b in self.active]
        q = w.q[idx]
        u = w.u[idx]
        self.aggregate = refresh_aggregate(
            q[:, 0], q[:, 1], u[:, 0], u[:, 1], u[:, 2], w.m[idx],
            w.disc_radius[idx])

    # -- penetration row ---------------------------------------------------
    def _penetration_rows(self, world, h):
        if self.terrain.state != "engaged":
            return []
        edge = self.edge()
        depth = float(self.terrain.height_at(edge.position[0])) \
            - float(edge.position[1])
        if depth <= 0:
            return []
        com = world.q[self.bucket.index, :2]
        return [penetration_constraint(edge, self.terrain.soil, depth,
                                       self.bucket.index, com,
                                       slab_depth=self.terrain.slab_depth,
                                       h=h)]
