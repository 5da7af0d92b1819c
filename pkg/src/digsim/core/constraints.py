"""Constraint rows and the persistent joint/motor objects that emit them.

A ConstraintRow is one scalar equation

    eps * lam + eta * g + tau * G v = u,    lam in [lo, hi]

with eta = 1 for positional rows (holonomic, contact normal) and eta = 0 for
velocity-level rows (motors, friction, rolling, penetration).  Joints and
actuators are persistent objects that recompute their rows from the current
poses each step.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

INF = float("inf")

# row kinds
HOLONOMIC = "holonomic"
MOTOR = "motor"
CONTACT_NORMAL = "contact-normal"
CONTACT_TANGENT = "contact-tangent"
ROLLING = "rolling"
PENETRATION = "penetration"

_POSITIONAL = frozenset({HOLONOMIC, CONTACT_NORMAL})


@dataclass
class ConstraintRow:
    body_a: int                      # body index, -1 for world/ground anchor
    body_b: int
    ja: np.ndarray                   # (3,) jacobian block on body a
    jb: np.ndarray                   # (3,) jacobian block on body b
    g: float = 0.0                   # constraint violation (positional rows)
    compliance: float = 0.0          # eps
    damping: float = 0.0             # tau (time constant)
    target: float = 0.0              # u
    lo: float = -INF                 # force bounds (N or N m)
    hi: float = INF
    kind: str = HOLONOMIC
    # optional couplings used by the solvers
    normal_row: int = -1             # index of the paired normal row (friction)
    friction_scale: float = 0.0      # bound = friction_scale * lam_normal
    tag: str = ""                    # stable identifier for force readout

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"row bounds reversed: [{self.lo}, {self.hi}]")
        self.ja = np.asarray(self.ja, dtype=float)
        self.jb = np.asarray(self.jb, dtype=float)

    @property
    def positional(self) -> bool:
        return self.kind in _POSITIONAL


def _cross_z(r, v):
    return r[0] * v[1] - r[1] * v[0]


class Hinge:
    """Ideal pin joint: two positional rows locking the anchor points together."""

    def __init__(self, body_a, body_b, anchor_world):
        self.a = body_a
        self.b = body_b
        self.la = self._to_local(body_a, anchor_world)
        self.lb = self._to_local(body_b, anchor_world)
        self.tag = f"hinge:{body_a.name}-{body_b.name}"

    @staticmethod
    def _to_local(body, p_world):
        from .shapes import rot
        x, z, th = body.pose
        return rot(th).T @ (np.asarray(p_world, dtype=float) - np.array([x, z]))

    def anchor_world(self, body, local):
        from .shapes import rot
        x, z, th = body.pose
        return rot(th) @ local + np.array([x, z])

    def rows(self):
        pa = self.anchor_world(self.a, self.la)
        pb = self.anchor_world(self.b, self.lb)
        ra = pa - self.a.pose[:2]
        rb = pb - self.b.pose[:2]
        out = []
        for k, axis in enumerate((np.array([1.0, 0.0]), np.array([0.0, 1.0]))):
            ja = np.array([-axis[0], -axis[1], -_cross_z(ra, axis)])
            jb = np.array([axis[0], axis[1], _cross_z(rb, axis)])
            g = float(axis @ (pb - pa))
            out.append(ConstraintRow(self.a.index, self.b.index, ja, jb, g=g,
                                     kind=HOLONOMIC, tag=f"{self.tag}:{k}"))
        return out

    def violation(self) -> float:
        pa = self.anchor_world(self.a, self.la)
        pb = self.anchor_world(self.b, self.lb)
        return float(np.hypot(*(pb - pa)))


class AngleMotor:
    """Angular velocity motor on the relative rotation of two bodies."""

    def __init__(self, body_a, body_b, target_speed=0.0, force_range=(-INF, INF), tag=""):
        lo, hi = force_range
        if lo > hi:
            raise ValueError("motor force range reversed")
        self.a = body_a
        self.b = body_b
        self.target_speed = float(target_speed)
        self.lo, self.hi = float(lo), float(hi)
        self.tag = tag or f"motor:{body_a.name}-{body_b.name}"

    def rows(self):
        return [ConstraintRow(self.a.index, self.b.index,
                              ja=np.array([0.0, 0.0, -1.0]),
                              jb=np.array([0.0, 0.0, 1.0]),
                              compliance=0.0, damping=1.0,
                              target=self.target_speed,
                              lo=self.lo, hi=self.hi, kind=MOTOR, tag=self.tag)]

    def speed(self) -> float:
        return float(self.b.velocity[2] - self.a.velocity[2])


class AngleLimit:
    """One-sided stops bounding the relative rotation of two bodies.

    Bounds are radians relative to the relative angle at construction.
    """

    def __init__(self, body_a, body_b, lo, hi, tag=""):
        if lo >= hi:
            raise ValueError("angle limits reversed")
        self.a = body_a
        self.b = body_b
        self.ref = float(body_b.pose[2] - body_a.pose[2])
        self.lo, self.hi = float(lo), float(hi)
        self.tag = tag or f"anglelimit:{body_a.name}-{body_b.name}"

    def angle(self) -> float:
        return float(self.b.pose[2] - self.a.pose[2] - self.ref)

    #: stops only enter the solve within this distance of the limit; a row
    #: deep inside the admissible range shares its jacobian with the joint
    #: motor and only degrades the direct block's conditioning
    band = 0.05

    def rows(self):
        th = self.angle()
        ja = np.array([0.0, 0.0, -1.0])
        jb = np.array([0.0, 0.0, 1.0])
        out = []
        if th - self.hi > -self.band:
            out.append(ConstraintRow(self.a.index, self.b.index, ja, jb,
                                     g=th - self.hi, compliance=1e-8,
                                     damping=0.05, lo=-INF, hi=0.0,
                                     kind=HOLONOMIC, tag=f"{self.tag}:hi"))
        if th - self.lo < self.band:
            out.append(ConstraintRow(self.a.index, self.b.index, ja, jb,
                                     g=th - self.lo, compliance=1e-8,
                                     damping=0.05, lo=0.0, hi=INF,
                                     kind=HOLONOMIC, tag=f"{self.tag}:lo"))
        return out


class LinearActuator:
    """Velocity-constraint linear motor acting along the line between two anchors.

    Positive target speed extends the actuator.  Realized speed deviates from
    the target exactly when the constraint force is clamped at a bound.
    """

    def __init__(self, body_a, body_b, anchor_a_world, anchor_b_world,
                 target_speed=0.0, force_range=(-INF, INF), limits=None,
                 tag=""):
        lo, hi = force_range
        if lo > hi:
            raise ValueError("actuator force range reversed")
        if limits is not None and limits[0] >= limits[1]:
            raise ValueError("actuator stroke limits reversed")
        self.a = body_a
        self.b = body_b
        self.la = Hinge._to_local(body_a, anchor_a_world)
        self.lb = Hinge._to_local(body_b, anchor_b_world)
        self.target_speed = float(target_speed)
        self.lo, self.hi = float(lo), float(hi)
        self.limits = limits
        self.tag = tag or f"actuator:{body_a.name}-{body_b.name}"

    def _anchors(self):
        h = Hinge.__new__(Hinge)
        pa = Hinge.anchor_world(h, self.a, self.la)
        pb = Hinge.anchor_world(h, self.b, self.lb)
        return pa, pb

    def length(self) -> float:
        pa, pb = self._anchors()
        return float(np.hypot(*(pb - pa)))

    def rows(self):
        pa, pb = self._anchors()
        d = pb - pa
        L = np.hypot(*d)
        if L < 1e-9:
            raise ValueError(f"actuator {self.tag}: coincident anchors")
        n = d / L
        ra = pa - self.a.pose[:2]
        rb = pb - self.b.pose[:2]
        # extension rate = d/dt |pb - pa| = n . (vb_pt - va_pt)
        ja = np.array([-n[0], -n[1], -_cross_z(ra, n)])
        jb = np.array([n[0], n[1], _cross_z(rb, n)])
        rows = [ConstraintRow(self.a.index, self.b.index, ja, jb,
                              compliance=0.0, damping=1.0,
                              target=self.target_speed,
                              lo=self.lo, hi=self.hi, kind=MOTOR,
                              tag=self.tag)]
        if self.limits is not None:
            # hard stroke stops: one-sided compliant positional rows that can
            # only push the length back inside [lmin, lmax].  Like AngleLimit,
            # a stop only enters the solve near its limit so it never sits in
            # the system as a duplicate of the motor row's jacobian.
            lmin, lmax = self.limits
            band = 0.02
            if L - lmax > -band:
                rows.append(ConstraintRow(self.a.index, self.b.index, ja, jb,
                                          g=L - lmax, compliance=1e-8,
                                          damping=0.05, lo=-INF, hi=0.0,
                                          kind=HOLONOMIC,
                                          tag=f"{self.tag}:stop_hi"))
            if L - lmin < band:
                rows.append(ConstraintRow(self.a.index, self.b.index, ja, jb,
                                          g=L - lmin, compliance=1e-8,
                                          damping=0.05, lo=0.0, hi=INF,
                                          kind=HOLONOMIC,
                                          tag=f"{self.tag}:stop_lo"))
        return rows

    def speed(self) -> float:
        pa, pb = self._anchors()
        d = pb - pa
        n = d / np.hypot(*d)
        return float(n @ (self.b.point_velocity(pb) - self.a.point_velocity(pa)))


def make_motor(body_a, body_b, axis, target_speed, force_range):
    """Motor constraint row factory.

    axis "angular" gives a relative-rotation motor; a 2-vector axis gives a
    translational motor along that world direction.
    """
    lo, hi = force_range
    if lo > hi:
        raise ValueError("motor force range reversed")
    if isinstance(axis, str) and axis == "angular":
        return AngleMotor(body_a, body_b, target_speed, force_range)
    n = np.asarray(axis, dtype=float)
    n = n / np.hypot(*n)

    class _DirMotor:
        def __init__(self, a, b):
            self.a, self.b = a, b
            self.target_speed = float(target_speed)
            self.lo, self.hi = float(lo), float(hi)
            self.tag = f"motor:{a.name}-{b.name}"

        def rows(self):
            return [ConstraintRow(self.a.index, self.b.index,
                                  ja=np.array([-n[0], -n[1], 0.0]),
                                  jb=np.array([n[0], n[1], 0.0]),
                                  damping=1.0, target=self.target_speed,
                                  lo=self.lo, hi=self.hi, kind=MOTOR, tag=self.tag)]

        def speed(self):
            return float(n @ (self.b.velocity[:2] - self.a.velocity[:2]))

    return _DirMotor(body_a, body_b)
