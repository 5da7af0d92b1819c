"""Planar wheel loader: chassis, two wheels, boom, bucket.

The machine is reduced to the x-z plane: two in-plane wheels stand in for
the four real ones, and the Z-bar linkage collapses to a boom link and a
bucket with direct-acting lift/tilt linear actuators.  The drive is a pair
of torque-limited hinge motors with a three-knot torque curve; actuator and
drive constraint forces double as the "cylinder pressure" sensor channels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .core import (AngleLimit, AngleMotor, ContactMaterial, Disc, Hinge,
                   LinearActuator, Marker, Material, Polyline, World)
from .core.shapes import rot


class LoaderError(Exception):
    pass


@dataclass(frozen=True)
class LoaderConfig:
    total_mass: float = 15175.0          # kg
    wheelbase: float = 3.03              # m
    wheel_diameter: float = 1.39         # m
    bucket_width: float = 2.685          # m (out-of-plane, mass bookkeeping)
    bucket_capacity: float = 3.0         # m^3
    # mass split; wheels are carved out of the chassis share
    chassis_fraction: float = 0.72
    boom_fraction: float = 0.18
    bucket_fraction: float = 0.10
    wheel_mass: float = 450.0            # kg each
    # linkage geometry, chassis frame (origin mid-wheelbase at axle height)
    boom_pivot: tuple = (1.7, 0.8)       # boom hinge on chassis
    boom_tip: tuple = (3.15, -0.15)      # bucket hinge, lowered build pose
    lift_anchor: tuple = (0.9, 0.05)     # lift cylinder root on chassis
    lift_boom_anchor_t: float = 0.62     # along the boom link (0=pivot, 1=tip)
    # tilt root high on the chassis, anchor behind/below the bucket hinge:
    # keeps the cylinder line well away from the hinge (moment arm > 0.5 m)
    # over the full -30..+60 deg bucket travel, with monotone length
    tilt_anchor: tuple = (1.1, 2.0)      # tilt cylinder root on chassis
    tilt_bucket_anchor: tuple = (-0.7, -0.2)  # on the bucket, bucket frame
    # actuator limits
    lift_speed_max: float = 0.25         # m/s
    tilt_speed_max: float = 0.35         # m/s
    lift_force_max: float = 2.5e5        # N (also the force constant)
    tilt_force_max: float = 1.8e5        # N
    lift_stroke: float = 0.9             # m, symmetric about build length
    tilt_stroke: float = 1.2             # m, symmetric about build length
    # drive
    rated_power: float = 127e3           # W
    torque_knots: tuple = ((0.0, 60e3), (3.2, 39.7e3), (10.0, 8e3))
    drive_speed_max: float = 11.0        # km/h
    # tires
    tire_modulus: float = 1.0e6          # Pa
    tire_friction: float = 2.0
    tire_rolling: float = 0.02

    def __post_init__(self):
        frac = self.chassis_fraction + self.boom_fraction + self.bucket_fraction
        if abs(frac - 1.0) > 1e-9:
            raise LoaderError("mass fractions must sum to 1")
        if self.lift_force_max <= 0 or self.tilt_force_max <= 0:
            raise LoaderError("actuator force limits must be positive")
        if self.lift_speed_max <= 0 or self.tilt_speed_max <= 0:
            raise LoaderError("actuator speed limits must be positive")
        bp = np.asarray(self.boom_pivot, float)
        bt = np.asarray(self.boom_tip, float)
        if np.hypot(*(bt - bp)) < 0.2:
            raise LoaderError("boom pivot and tip nearly coincide")

    @property
    def wheel_radius(self):
        return 0.5 * self.wheel_diameter

    @property
    def force_constant(self):
        """Normalization divisor for all force channels."""
        return self.lift_force_max


# Bucket shell in the bucket body frame (origin at the boom-bucket hinge).
# Order matters: material sits on the left of the winding, so particles that
# momentarily cross the shell get pushed back inside.
BUCKET_SHELL = np.array([
    (-0.35, 0.95),                       # back wall top
    (-0.55, 0.10),                       # back wall bottom
    (-0.25, -0.30),                      # heel
    (1.05, -0.30),                       # cutting edge tip
])
BUCKET_TIP = BUCKET_SHELL[-1]
# cutting direction in the bucket frame: straight out of the bottom plate
BUCKET_CUT_DIR = np.array([1.0, 0.0])


@dataclass
class SensorFrame:
    """One sample of the drive/actuator observables."""
    t: float
    f_l: float      # lift actuator force, normalized
    f_t: float      # tilt actuator force, normalized
    f_tr: float     # tractive force, normalized
    v: float        # drive speed, km/h
    d_l: float      # lift extension, normalized 0..1
    d_t: float      # tilt extension, normalized 0..1
    theta_l: float  # boom angle rel. chassis, deg
    theta_t: float  # bucket angle rel. chassis, deg
    theta_p: float  # chassis pitch, deg
    x_tip: float
    z_tip: float

    FIELDS = ("t", "f_l", "f_t", "f_tr", "v", "d_l", "d_t",
              "theta_l", "theta_t", "theta_p", "x_tip", "z_tip")

    def as_row(self):
        return [getattr(self, f) for f in self.FIELDS]


def torque_limit(knots, omega):
    """Piecewise-linear torque bound at wheel speed |omega| (rad/s)."""
    w = abs(float(omega))
    ws = [k[0] for k in knots]
    ts = [k[1] for k in knots]
    return float(np.interp(w, ws, ts))


class Loader:
    """Handle bundling the loader bodies, joints and motors in a world."""

    def __init__(self, world, config, bodies, joints, motors, build_state):
        self.world = world
        self.config = config
        self.chassis = bodies["chassis"]
        self.wheel_front = bodies["wheel_front"]
        self.wheel_rear = bodies["wheel_rear"]
        self.boom = bodies["boom"]
        self.bucket = bodies["bucket"]
        self.lift = motors["lift"]
        self.tilt = motors["tilt"]
        self.lift_geom = motors["lift_geom"]
        self.tilt_geom = motors["tilt_geom"]
        self.drive_front = motors["drive_front"]
        self.drive_rear = motors["drive_rear"]
        self.joints = joints
        self._build = build_state
        self.v_target_kmh = 0.0
        self._cmd_lift = 0.0
        self._cmd_tilt = 0.0
        self._arm = {"lift": 1.0, "tilt": 1.0}

    # -- geometry ----------------------------------------------------------
    @property
    def tip_position(self):
        x, z, th = self.bucket.pose
        return rot(th) @ BUCKET_TIP + np.array([x, z])

    @property
    def cutting_direction(self):
        return rot(self.bucket.pose[2]) @ BUCKET_CUT_DIR

    @property
    def pitch_deg(self):
        return math.degrees(self.chassis.pose[2] - self._build["pitch0"])

    def boom_angle(self):
        """Boom link angle relative to the chassis, deg."""
        pv = self._anchor_world(self.chassis, self._build["boom_pivot_local"])
        tip = self._anchor_world(self.boom, self._build["boom_tip_local"])
        d = tip - pv
        return math.degrees(math.atan2(d[1], d[0]) - self.chassis.pose[2]
                            - self._build["boom_angle0"])

    def bucket_angle(self):
        """Bucket angle relative to the chassis, deg."""
        return math.degrees(self.bucket.pose[2] - self.chassis.pose[2]
                            - self._build["bucket_angle0"])

    @staticmethod
    def _anchor_world(body, local):
        x, z, th = body.pose
        return rot(th) @ np.asarray(local, float) + np.array([x, z])

    def tip_from_angles(self, chassis_pose, theta_l_deg, theta_t_deg):
        """Forward kinematics: tip from chassis pose and the two angles."""
        cx, cz, cth = chassis_pose
        pv = rot(cth) @ np.asarray(self.config.boom_pivot, float) + np.array([cx, cz])
        link = self._build["boom_length"]
        a_l = math.radians(theta_l_deg) + self._build["boom_angle0"] + cth
        hinge = pv + link * np.array([math.cos(a_l), math.sin(a_l)])
        a_t = math.radians(theta_t_deg) + self._build["bucket_angle0"] + cth
        return rot(a_t) @ BUCKET_TIP + hinge

    # -- drive -------------------------------------------------------------
    def set_drive_target(self, v_kmh):
        """Drive target in km/h; sign is forward (+x at build heading)."""
        self.v_target_kmh = float(v_kmh)
        omega = -(v_kmh / 3.6) / self.config.wheel_radius
        self.drive_front.target_speed = omega
        self.drive_rear.target_speed = omega

    def update_drive_limits(self):
        """Re-map motor targets and bounds from current pose; call every step."""
        for m, wheel in ((self.drive_front, self.wheel_front),
                         (self.drive_rear, self.wheel_rear)):
            w = wheel.velocity[2] - self.chassis.velocity[2]
            tau = 0.5 * torque_limit(self.config.torque_knots, w)
            m.lo, m.hi = -tau, tau
        pivot = self._anchor_world(self.chassis, self._build["boom_pivot_local"])
        self._update_actuator(self.lift, self.lift_geom, self.boom, pivot,
                              self.config.lift_force_max, self._cmd_lift,
                              "lift")
        hinge = self.bucket.pose[:2]
        self._update_actuator(self.tilt, self.tilt_geom, self.bucket, hinge,
                              self.config.tilt_force_max, self._cmd_tilt,
                              "tilt")

    def set_lift_target(self, speed):
        """Positive raises the boom, in m/s of cylinder travel."""
        self._cmd_lift = float(np.clip(
            speed, -self.config.lift_speed_max, self.config.lift_speed_max))

    def set_tilt_target(self, speed):
        """Positive rolls the bucket back (curl/fill), in m/s of travel."""
        self._cmd_tilt = float(np.clip(
            speed, -self.config.tilt_speed_max, self.config.tilt_speed_max))

    def _update_actuator(self, motor, geom, body, pivot_pt, f_max, cmd, key):
        """Map the cylinder command onto the joint motor.

        The joint motor's rate target and torque bound follow from the
        virtual cylinder through its moment arm dL/dtheta about the joint,
        so the realized joint behaves exactly like a speed- and
        force-limited cylinder without the linkage entering the solve.
        """
        dld = _dL_dtheta(self.world, geom, body, pivot_pt)
        if abs(dld) < 0.05:
            dld = math.copysign(0.05, dld if dld != 0 else 1.0)
        self._arm[key] = dld
        motor.target_speed = float(np.clip(cmd / dld, -2.5, 2.5))
        tau = f_max * abs(dld)
        motor.lo, motor.hi = -tau, tau

    # -- sensors -----------------------------------------------------------
    def read_sensors(self) -> SensorFrame:
        w = self.world
        fc = self.config.force_constant
        forces = w.last_row_forces
        # joint torques mapped back to equivalent cylinder forces
        f_l = forces.get("lift", 0.0) / self._arm["lift"] / fc
        f_t = forces.get("tilt", 0.0) / self._arm["tilt"] / fc
        # tractive force = wheel torques at the rim
        tau = forces.get("drive_front", 0.0) + forces.get("drive_rear", 0.0)
        f_tr = -tau / self.config.wheel_radius / fc
        r = self.config.wheel_radius
        v = -0.5 * (self.wheel_front.velocity[2] + self.wheel_rear.velocity[2]) \
            * r * 3.6
        d_l = self._norm_extension(self.lift_geom, "lift")
        d_t = self._norm_extension(self.tilt_geom, "tilt")
        tip = self.tip_position
        return SensorFrame(t=w.t, f_l=f_l, f_t=f_t, f_tr=f_tr, v=v,
                           d_l=d_l, d_t=d_t,
                           theta_l=self.boom_angle(),
                           theta_t=self.bucket_angle(),
                           theta_p=self.pitch_deg,
                           x_tip=float(tip[0]), z_tip=float(tip[1]))

    def _norm_extension(self, act, which):
        L0 = self._build[f"{which}_length0"]
        stroke = getattr(self.config, f"{which}_stroke")
        return float(np.clip((act.length() - (L0 - 0.5 * stroke)) / stroke, 0.0, 1.0))


def _dL_dtheta(world, act, body, pivot_pt, eps=1e-6):
    """Cylinder length change per radian of CCW rotation of body about
    pivot_pt: the signed moment arm of the virtual cylinder."""
    q = world.q[body.index].copy()
    r = q[:2] - np.asarray(pivot_pt, float)
    samples = []
    for e in (eps, -eps):
        c, s = math.cos(e), math.sin(e)
        world.q[body.index, 0] = pivot_pt[0] + c * r[0] - s * r[1]
        world.q[body.index, 1] = pivot_pt[1] + s * r[0] + c * r[1]
        world.q[body.index, 2] = q[2] + e
        samples.append(act.length())
        world.q[body.index] = q
    return (samples[0] - samples[1]) / (2.0 * eps)


def build_loader(world: World, config: LoaderConfig = None, x0: float = 0.0,
                 ground_z: float = 0.0, settle: bool = True) -> Loader:
    """Assemble the loader at x0 on flat ground and settle it for 1 s.

    The machine faces +x; the bucket starts in the lowered dig pose with
    the cutting edge on the ground.
    """
    cfg = config or LoaderConfig()
    r = cfg.wheel_radius
    m_wheels = 2.0 * cfg.wheel_mass
    m_chassis = cfg.total_mass * cfg.chassis_fraction - m_wheels
    m_boom = cfg.total_mass * cfg.boom_fraction
    m_bucket = cfg.total_mass * cfg.bucket_fraction
    if m_chassis <= 0:
        raise LoaderError("wheel mass exceeds the chassis share")

    # chassis frame origin: mid-wheelbase at axle height
    org = np.array([x0, ground_z + r])
    tire = world.add_material(Material("tire", friction=cfg.tire_friction,
                                       restitution=0.0, rolling=cfg.tire_rolling,
                                       young=cfg.tire_modulus))
    # the stated tire friction/modulus are the pair values against any soil
    for other in ("default", "gravel", "soil", "terrain"):
        if other == "tire":
            continue
        try:
            om = world.materials.get(other)
        except KeyError:
            continue
        young = 2.0 / (1.0 / cfg.tire_modulus + 1.0 / om.young)
        world.materials.set_pair("tire", other, ContactMaterial(
            friction=cfg.tire_friction, restitution=0.0,
            rolling=cfg.tire_rolling, young=young))

    chassis = world.add_body("chassis", shape=Marker(), mass=m_chassis,
                             inertia=m_chassis * 1.2 ** 2,
                             pose=(org[0], org[1] + 0.7, 0.0))
    wf = world.add_body("wheel_front", shape=Disc(r), mass=cfg.wheel_mass,
                        pose=(org[0] + 0.5 * cfg.wheelbase, org[1], 0.0),
                        material="tire")
    wr = world.add_body("wheel_rear", shape=Disc(r), mass=cfg.wheel_mass,
                        pose=(org[0] - 0.5 * cfg.wheelbase, org[1], 0.0),
                        material="tire")

    pivot = org + np.asarray(cfg.boom_pivot, float)
    tip_hinge = org + np.asarray(cfg.boom_tip, float)
    boom_com = 0.5 * (pivot + tip_hinge)
    boom_len = float(np.hypot(*(tip_hinge - pivot)))
    boom = world.add_body("boom", shape=Marker(), mass=m_boom,
                          inertia=m_boom * (boom_len / 3.0) ** 2,
                          pose=(boom_com[0], boom_com[1], 0.0))
    # bucket body frame sits at the boom-bucket hinge, level build pitch;
    # lowered build pose puts the cutting edge on the ground
    bz = ground_z - BUCKET_TIP[1]
    if "bucket" not in world.materials:
        world.add_material(Material("bucket", friction=0.4, restitution=0.0,
                                    rolling=0.0, young=2.0e8))
    bucket = world.add_body("bucket", shape=Polyline(BUCKET_SHELL),
                            mass=m_bucket, inertia=m_bucket * 0.55 ** 2,
                            pose=(tip_hinge[0], bz, 0.0), material="bucket")
    # re-pin the boom tip hinge to the actual bucket origin height
    tip_hinge = np.array([tip_hinge[0], bz])

    for a, b in ((chassis, wf), (chassis, wr), (chassis, boom),
                 (chassis, bucket), (boom, bucket), (boom, wf), (wf, bucket)):
        world.disable_collision(a, b)

    joints = {
        "axle_front": Hinge(chassis, wf, org + [0.5 * cfg.wheelbase, 0.0]),
        "axle_rear": Hinge(chassis, wr, org + [-0.5 * cfg.wheelbase, 0.0]),
        "boom_pivot": Hinge(chassis, boom, pivot),
        "bucket_hinge": Hinge(boom, bucket, tip_hinge),
    }
    for j in joints.values():
        world.add_constraint(j)

    # the cylinders are virtual: they define the geometry map (length,
    # moment arm) while the joints themselves are driven by angle motors
    # whose rate targets and torque bounds are re-derived from that map
    # every step.  This keeps linkage singularities out of the solver.
    lift_root = org + np.asarray(cfg.lift_anchor, float)
    lift_tip = pivot + cfg.lift_boom_anchor_t * (tip_hinge - pivot)
    lift_geom = LinearActuator(chassis, boom, lift_root, lift_tip)
    tilt_root = org + np.asarray(cfg.tilt_anchor, float)
    tilt_tip = np.array([tip_hinge[0], bz]) + np.asarray(cfg.tilt_bucket_anchor, float)
    tilt_geom = LinearActuator(chassis, bucket, tilt_root, tilt_tip)

    lift_m = AngleMotor(chassis, boom, 0.0, force_range=(0.0, 0.0), tag="lift")
    tilt_m = AngleMotor(boom, bucket, 0.0, force_range=(0.0, 0.0), tag="tilt")
    drive_f = AngleMotor(chassis, wf, 0.0, force_range=(0.0, 0.0), tag="drive_front")
    drive_r = AngleMotor(chassis, wr, 0.0, force_range=(0.0, 0.0), tag="drive_rear")
    boom_stop = AngleLimit(chassis, boom, math.radians(-12.0),
                           math.radians(48.0), tag="boom_stop")
    bucket_stop = AngleLimit(chassis, bucket, math.radians(-55.0),
                             math.radians(60.0), tag="bucket_stop")
    for m in (lift_m, tilt_m, drive_f, drive_r, boom_stop, bucket_stop):
        world.add_constraint(m)

    d = tip_hinge - pivot
    build = {
        "pitch0": 0.0,
        "boom_pivot_local": np.asarray(cfg.boom_pivot, float) + [0.0, -0.7],
        "boom_tip_local": tip_hinge - boom_com,
        "boom_length": float(np.hypot(*d)),
        "boom_angle0": math.atan2(d[1], d[0]),
        "bucket_angle0": 0.0,
        "lift_length0": lift_geom.length(),
        "tilt_length0": tilt_geom.length(),
    }
    # chassis local anchor bookkeeping: chassis origin is 0.7 above org
    ldr = Loader(world, cfg, {"chassis": chassis, "wheel_front": wf,
                              "wheel_rear": wr, "boom": boom, "bucket": bucket},
                 joints, {"lift": lift_m, "tilt": tilt_m,
                          "lift_geom": lift_geom, "tilt_geom": tilt_geom,
                          "drive_front": drive_f, "drive_rear": drive_r},
                 build)
    if settle:
        from .core import SolverConfig
        scfg = SolverConfig(dt=0.005)
        for _ in range(200):
            ldr.update_drive_limits()
            world.step(scfg)
        build["pitch0"] = float(chassis.pose[2])
        if abs(math.degrees(build["pitch0"])) > 1.0:
            raise LoaderError(
                f"loader did not settle level (pitch {math.degrees(build['pitch0']):.2f} deg)")
    return ldr


def flat_ground(world: World, x0=-30.0, x1=30.0, z=0.0):
    return world.add_body("flat_ground",
                          shape=Polyline([(x0, z), (x1, z)]),
                          mass=0.0, kinematic=True)
