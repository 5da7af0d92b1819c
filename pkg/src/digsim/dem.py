"""Full-particle granular terrain for the planar dig simulator.

The whole pile is resolved as disc particles (spherical-analog in the x-z
plane) stepped by the nonsmooth solver in :mod:`digsim.core`.  This module
owns pile construction, the resolution-scaling rules that pick iteration
count and timestep from particle size, and the calibration probes (angle of
repose, bulk density).

Mass bookkeeping: every disc carries mass = density * area * slab_depth,
so loaded mass and work come out in real kg and J and are directly
comparable with the heightfield terrain family.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .core import (Disc, ITERATIVE, Material, Polyline, SolverConfig, World)


class DemError(Exception):
    pass


# ----------------------------------------------------------------- parameters
@dataclass(frozen=True)
class DemParams:
    """Granular material description for the particle terrain.

    ``diameter`` is the nominal particle size D; actual diameters are drawn
    uniformly from [D - span*D, D + span*D] to break up regular packings.
    """
    diameter: float
    span: float = 0.1
    density: float = 2590.0          # kg/m^3, grain (specific) density
    friction: float = 0.3
    rolling: float = 0.02
    restitution: float = 0.0
    young: float = 4.6e6             # Pa, sets contact compliance

    def __post_init__(self):
        if self.diameter <= 0:
            raise DemError("particle diameter must be positive")
        if not 0.0 <= self.span < 0.5:
            raise DemError("size span fraction must be in [0, 0.5)")
        if self.density <= 0:
            raise DemError("density must be positive")
        if not 0.0 <= self.restitution <= 1.0:
            raise DemError("restitution must be in [0, 1]")

    def material(self) -> Material:
        return Material("gravel", friction=self.friction,
                        restitution=self.restitution, rolling=self.rolling,
                        young=self.young)


# Planar re-calibration of the 3D gravel parameters: disc packings shear
# easier than sphere packings, so friction/rolling are bumped until the
# repose probe lands on 32 deg (see tests).  Everything else is as measured.
GRAVEL_MU = 0.63
GRAVEL_MU_R = 0.24


def gravel(diameter: float, span: float = 0.1) -> DemParams:
    """Default calibrated planar gravel at the given particle size."""
    return DemParams(diameter=diameter, span=span,
                     friction=GRAVEL_MU, rolling=GRAVEL_MU_R)


@dataclass(frozen=True)
class PileSpec:
    """Initial pile described by its free-surface profile.

    ``profile`` is an (n,2) array of (x,z) with strictly increasing x;
    ``container`` is the (x_min, x_max) extent of the floor and side walls.
    """
    profile: np.ndarray
    container: tuple = (-3.0, 3.0)
    bulk_density: float = 1727.0     # kg/m^3, diagnostic target
    slab_depth: float = 2.685        # m, out-of-plane bookkeeping width

    def __post_init__(self):
        prof = np.atleast_2d(np.asarray(self.profile, dtype=float))
        if prof.shape[1] != 2 or prof.shape[0] < 2:
            raise DemError("profile needs at least two (x, z) points")
        if np.any(np.diff(prof[:, 0]) <= 0):
            raise DemError("profile x must be strictly increasing")
        if self.slab_depth <= 0:
            raise DemError("slab depth must be positive")
        object.__setattr__(self, "profile", prof)
        x0, x1 = self.container
        if prof[0, 0] < x0 - 1e-9 or prof[-1, 0] > x1 + 1e-9:
            raise DemError("profile does not fit inside the container")

    def height(self, x):
        """Surface height at x (linear interpolation, clamped ends)."""
        return np.interp(x, self.profile[:, 0], self.profile[:, 1])


@dataclass(frozen=True)
class FidelityPreset:
    level: str
    size: float                       # m, particle diameter or grid cell
    dt: float                         # s
    n_iterations: int


# Key settings for the eight resolution levels (size in mm in the names).
_PRESETS = {
    "D50":  FidelityPreset("D50",  0.050, 0.002, 200),
    "D100": FidelityPreset("D100", 0.100, 0.005, 100),
    "D200": FidelityPreset("D200", 0.200, 0.010, 500),
    "D400": FidelityPreset("D400", 0.400, 0.020, 15),
    "G50":  FidelityPreset("G50",  0.050, 0.005, 50),
    "G100": FidelityPreset("G100", 0.100, 0.010, 25),
    "G200": FidelityPreset("G200", 0.200, 0.020, 15),
    "G400": FidelityPreset("G400", 0.400, 0.050, 10),
}

LEVELS = tuple(_PRESETS)


def fidelity_preset(level: str) -> FidelityPreset:
    try:
        return _PRESETS[level]
    except KeyError:
        raise DemError(f"unknown fidelity level {level!r}; "
                       f"valid levels: {', '.join(_PRESETS)}") from None


def recommended_iterations(length: float, diameter: float, eps_tol: float) -> int:
    """Solver iterations for error tolerance eps over a system of size L.

    N_it = ceil(0.1 * (L/D) / eps): error propagates roughly one particle
    per sweep, so deeper piles (more particles across) need more sweeps.
    """
    if length <= 0 or diameter <= 0 or eps_tol <= 0:
        raise DemError("length, diameter and tolerance must be positive")
    return int(math.ceil(0.1 * (length / diameter) / eps_tol))


def max_timestep(diameter: float, eps_tol: float, g: float = 9.81) -> float:
    """Largest stable-ish timestep: dt = sqrt(2 * eps * D / g).

    A particle should not free-fall further than eps*D in one step.
    """
    if diameter <= 0 or eps_tol <= 0 or g <= 0:
        raise DemError("diameter, tolerance and g must be positive")
    return math.sqrt(2.0 * eps_tol * diameter / g)


# -------------------------------------------------------------- particle sets
CSV_FIELDS = ("id", "x", "z", "radius", "vx", "vz", "omega")


@dataclass
class ParticleSet:
    """Snapshot of a particle assembly (positions, radii, velocities, masses)."""
    x: np.ndarray
    z: np.ndarray
    radius: np.ndarray
    vx: np.ndarray
    vz: np.ndarray
    omega: np.ndarray
    mass: np.ndarray

    def __len__(self):
        return len(self.x)

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.mass))

    @property
    def max_speed(self) -> float:
        if len(self) == 0:
            return 0.0
        return float(np.max(np.hypot(self.vx, self.vz)))

    def to_csv(self, path):
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(CSV_FIELDS)
            for i in range(len(self)):
                w.writerow([i, self.x[i], self.z[i], self.radius[i],
                            self.vx[i], self.vz[i], self.omega[i]])

    @classmethod
    def from_csv(cls, path, params: DemParams, slab_depth: float):
        rows = np.genfromtxt(path, delimiter=",", names=True)
        rows = np.atleast_1d(rows)
        r = np.asarray(rows["radius"], dtype=float)
        mass = params.density * math.pi * r ** 2 * slab_depth
        return cls(np.asarray(rows["x"], float), np.asarray(rows["z"], float),
                   r, np.asarray(rows["vx"], float), np.asarray(rows["vz"], float),
                   np.asarray(rows["omega"], float), mass)

    @classmethod
    def from_world(cls, world: World, indices) -> "ParticleSet":
        idx = np.asarray(indices, dtype=int)
        q = world.q[idx]
        u = world.u[idx]
        return cls(q[:, 0].copy(), q[:, 1].copy(),
                   world.disc_radius[idx].copy(),
                   u[:, 0].copy(), u[:, 1].copy(), u[:, 2].copy(),
                   world.m[idx].copy())


def particle_mass(radius, density, slab_depth):
    return density * math.pi * np.asarray(radius) ** 2 * slab_depth


def add_particles(world: World, pset: ParticleSet, params: DemParams,
                  name_prefix="p") -> list:
    """Instantiate a particle set as iterative-group bodies in a world."""
    mat = params.material()
    world.materials.add(mat)
    out = []
    for i in range(len(pset)):
        b = world.add_body(f"{name_prefix}{i}", shape=Disc(float(pset.radius[i])),
                           mass=float(pset.mass[i]),
                           pose=(float(pset.x[i]), float(pset.z[i]), 0.0),
                           material=mat.name, group=ITERATIVE)
        world.u[b.index] = (pset.vx[i], pset.vz[i], pset.omega[i])
        out.append(b.index)
    return out


def ground_body(world: World, container, extra_height=5.0):
    """Floor plus side walls as one static polyline."""
    x0, x1 = container
    pts = [(x0, extra_height), (x0, 0.0), (x1, 0.0), (x1, extra_height)]
    return world.add_body("ground", shape=Polyline(pts), mass=0.0,
                          kinematic=True)


def _settle(world, cfg, idx, rest_speed, max_time, label):
    """Step until every particle is slower than rest_speed."""
    t0 = world.t
    idx = np.asarray(idx, dtype=int)
    while world.t - t0 < max_time:
        world.step(cfg)
        sp = np.hypot(world.u[idx, 0], world.u[idx, 1])
        if len(idx) == 0 or np.max(sp) < rest_speed:
            return
    raise DemError(
        f"{label}: settling did not reach rest speed {rest_speed} m/s within "
        f"{max_time} s (max particle speed {np.max(sp):.3f} m/s, "
        f"{len(idx)} particles)")


def solver_config(params: DemParams, length: float = 4.0, eps_tol: float = 0.1,
                  dt: float = None, n_it: int = None, seed: int = 0) -> SolverConfig:
    """SolverConfig from the resolution scaling rules (overridable)."""
    if dt is None:
        dt = min(0.5 * max_timestep(params.diameter, eps_tol), 0.01)
    if n_it is None:
        n_it = recommended_iterations(length, params.diameter, eps_tol)
    return SolverConfig(dt=dt, iterations=int(n_it), seed=seed)


def emit_pile(pile: PileSpec, params: DemParams, seed: int = 0,
              rest_speed: float = 0.01, max_time: float = 120.0,
              cfg: SolverConfig = None, world: World = None):
    """Build a settled pile under the given free-surface profile.

    Particles spawn on a jittered grid in the region below the profile
    (in batches, settling in between, so lower layers bear load early),
    then everything settles and particles poking above the profile are
    removed.  Returns (world, particle_indices); the same world can be
    reused for the dig by adding the vehicle afterwards.
    """
    rng = np.random.default_rng(seed)
    if world is None:
        world = World()
    ground_body(world, pile.container)
    if cfg is None:
        span_z = float(np.max(pile.profile[:, 1]))
        cfg = solver_config(params, length=max(span_z, 1.0), seed=seed)

    D = params.diameter
    x0, x1 = pile.container
    pitch = 1.05 * D * (1.0 + params.span)
    xs = np.arange(x0 + pitch, x1 - 0.5 * pitch, pitch)
    # fill columns up to the local profile height, one grid layer per batch
    zmax = float(np.max(pile.profile[:, 1]))
    n_layers = max(1, int(math.ceil(zmax / pitch)))
    indices = []
    for layer in range(n_layers):
        z = (layer + 0.5) * pitch
        keep = z < pile.height(xs) + 0.5 * D
        if not np.any(keep):
            continue
        radii = 0.5 * D * (1.0 + params.span * rng.uniform(-1, 1, int(np.sum(keep))))
        jitter = 0.25 * pitch * rng.uniform(-1, 1, int(np.sum(keep)))
        pset = ParticleSet(
            x=xs[keep] + jitter, z=np.full(np.sum(keep), z),
            radius=radii, vx=np.zeros(np.sum(keep)), vz=np.zeros(np.sum(keep)),
            omega=np.zeros(np.sum(keep)),
            mass=particle_mass(radii, params.density, pile.slab_depth))
        indices.extend(add_particles(world, pset, params,
                                     name_prefix=f"p{layer}_"))
        # brief inter-batch settling; full rest criterion applied at the end
        for _ in range(int(0.15 / cfg.dt) + 1):
            world.step(cfg)
    _settle(world, cfg, indices, rest_speed, max_time, "emit_pile")

    # trim anything that came to rest above the target profile
    idx = np.asarray(indices, dtype=int)
    above = world.q[idx, 1] - world.disc_radius[idx] > pile.height(world.q[idx, 0])
    if np.any(above):
        remap = world.remove_bodies(idx[above])
        idx = np.asarray([remap[i] for i in idx[~above]], dtype=int)
        _settle(world, cfg, idx, rest_speed, max_time, "emit_pile trim")
    return world, idx


def measure_bulk_density(pset: ParticleSet, probe, slab_depth: float,
                         density: float = None) -> float:
    """Mass per volume inside an axis-aligned probe box (x0, z0, x1, z1).

    Counts particles by centre; the probe must sit fully inside the pile
    for the estimate to mean anything.
    """
    x0, z0, x1, z1 = probe
    if x1 <= x0 or z1 <= z0:
        raise DemError("degenerate probe region")
    inside = ((pset.x >= x0) & (pset.x <= x1)
              & (pset.z >= z0) & (pset.z <= z1))
    if not np.any(inside):
        raise DemError("probe region contains no particles")
    vol = (x1 - x0) * (z1 - z0) * slab_depth
    return float(np.sum(pset.mass[inside]) / vol)


def measure_angle_of_repose(params: DemParams, seed: int = 0,
                            n_particles: int = 260, drop_height: float = 0.35,
                            floor_half_width: float = 3.0,
                            slab_depth: float = 2.685,
                            n_repeats: int = 3) -> float:
    """Pour heaps from a point source and report the mean flank slope in deg.

    Individual heaps scatter by a few degrees (avalanche timing), so the
    probe averages ``n_repeats`` independent pours seeded from ``seed``.
    A sub-5 degree result means the material collapsed to a monolayer; that
    is reported as-is, not raised.
    """
    vals = [_one_repose_heap(params, seed + 1000 * r, n_particles, drop_height,
                             floor_half_width, slab_depth)
            for r in range(n_repeats)]
    return float(np.mean(vals))


def _one_repose_heap(params, seed, n_particles, drop_height,
                     floor_half_width, slab_depth):
    rng = np.random.default_rng(seed)
    world = World()
    world.add_body("floor", shape=Polyline([(-floor_half_width, 0.0),
                                            (floor_half_width, 0.0)]),
                   mass=0.0, kinematic=True)
    cfg = solver_config(params, length=1.5, seed=seed)
    D = params.diameter
    mat = params.material()
    world.materials.add(mat)
    indices = []
    batch = max(4, int(0.35 / D))
    emitted = 0
    k = 0
    while emitted < n_particles:
        m = min(batch, n_particles - emitted)
        idx0 = np.asarray(indices, dtype=int)
        top = float(np.max(world.q[idx0, 1])) if len(idx0) else 0.0
        z0 = top + drop_height
        for j in range(m):
            r = 0.5 * D * (1.0 + params.span * rng.uniform(-1, 1))
            # narrow source with slight scatter, like pouring from a chute
            x = 0.35 * D * rng.uniform(-1, 1) * batch / 4
            b = world.add_body(f"r{k}", shape=Disc(r),
                               mass=float(particle_mass(r, params.density, slab_depth)),
                               pose=(x, z0 + 1.1 * D * j, 0.0),
                               material=mat.name, group=ITERATIVE)
            indices.append(b.index)
            k += 1
        emitted += m
        for _ in range(int(0.45 / cfg.dt)):
            world.step(cfg)
        # particles that rolled off the floor edge free-fall forever; drop them
        indices = _cull_fallen(world, indices)
    t0 = world.t
    while world.t - t0 < 90.0:
        world.step(cfg)
        indices = _cull_fallen(world, indices)
        idxs = np.asarray(indices, dtype=int)
        if len(idxs) == 0:
            return 0.0     # everything rolled off: no sustainable slope
        if np.max(np.hypot(world.u[idxs, 0], world.u[idxs, 1])) < 0.01:
            break
    else:
        raise DemError("repose heap: settling did not converge")

    idx = np.asarray(indices, dtype=int)
    x = world.q[idx, 0]
    z = world.q[idx, 1] + world.disc_radius[idx]
    return _flank_angle(x, z, D)


def _cull_fallen(world, indices, floor_z=-0.25):
    """Remove particles that escaped past the floor edge and are in free fall."""
    idxs = np.asarray(indices, dtype=int)
    gone = world.q[idxs, 1] < floor_z
    if not np.any(gone):
        return list(indices)
    remap = world.remove_bodies(idxs[gone])
    return [remap[i] for i in idxs[~gone]]


def _flank_angle(x, z, D):
    """Fit a line to each flank of the free surface, return mean |slope| in deg."""
    angles = []
    for sgn in (-1.0, 1.0):
        side = x * sgn > 0.5 * D
        if np.sum(side) < 4:
            continue
        xs, zs = np.abs(x[side]), z[side]
        # free surface: max height per radial bin
        nb = max(4, int(np.ptp(xs) / D))
        edges = np.linspace(np.min(xs), np.max(xs) + 1e-9, nb + 1)
        which = np.digitize(xs, edges) - 1
        cx, cz = [], []
        for b in range(nb):
            m = which == b
            if np.any(m):
                cx.append(0.5 * (edges[b] + edges[b + 1]))
                cz.append(np.max(zs[m]))
        if len(cx) < 3:
            continue
        cx, cz = np.asarray(cx), np.asarray(cz)
        # fit only the mid-height band: apex rounding and the toe tail
        # both bias the slope
        top = np.max(cz)
        keep = (cz > 0.2 * top) & (cz < 0.85 * top)
        if np.sum(keep) >= 3:
            cx, cz = cx[keep], cz[keep]
        slope = np.polyfit(cx, cz, 1)[0]
        angles.append(math.degrees(math.atan(abs(slope))))
    if not angles:
        return 0.0
    return float(np.mean(angles))


def triangular_pile(height: float, angle_deg: float, toe_x: float = -2.0,
                    container=(-3.0, 3.0), **kw) -> PileSpec:
    """Convenience pile: flat ground, straight 'angle_deg' face, flat top."""
    x0, x1 = container
    run = height / math.tan(math.radians(angle_deg))
    prof = [(x0, 0.0), (toe_x, 0.0), (toe_x + run, height), (x1, height)]
    return PileSpec(profile=np.asarray(prof), container=container, **kw)
