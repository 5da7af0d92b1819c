"""Rigid bodies.

State (pose and velocity) is stored in flat arrays owned by the World so the
particle kernels can run vectorized; a Body is a light handle carrying index,
shape, material, and solver-partition membership.
"""
from __future__ import annotations

import numpy as np

from .shapes import Disc, Polygon, Polyline

# solver partitions
DIRECT = 0      # vehicle-side bodies: dense direct block
ITERATIVE = 1   # particles: projected Gauss-Seidel block


class Body:
    __slots__ = ("index", "name", "shape", "material", "kinematic", "group", "world")

    def __init__(self, index, name, shape, material, kinematic, group, world):
        self.index = index
        self.name = name
        self.shape = shape
        self.material = material
        self.kinematic = kinematic
        self.group = group
        self.world = world

    # -- state accessors ---------------------------------------------------
    @property
    def pose(self) -> np.ndarray:
        return self.world.q[self.index]

    @pose.setter
    def pose(self, value):
        self.world.q[self.index] = value

    @property
    def velocity(self) -> np.ndarray:
        return self.world.u[self.index]

    @velocity.setter
    def velocity(self, value):
        self.world.u[self.index] = value

    @property
    def mass(self) -> float:
        return float(self.world.m[self.index])

    @property
    def inertia(self) -> float:
        return float(self.world.I[self.index])

    @property
    def is_disc(self) -> bool:
        return isinstance(self.shape, Disc)

    @property
    def is_polygon(self) -> bool:
        return isinstance(self.shape, Polygon)

    @property
    def is_polyline(self) -> bool:
        return isinstance(self.shape, Polyline)

    def point_velocity(self, point_world) -> np.ndarray:
        """Velocity of a world-space point rigidly attached to this body."""
        vx, vz, om = self.world.u[self.index]
        x, z, _ = self.world.q[self.index]
        rx, rz = point_world[0] - x, point_world[1] - z
        return np.array([vx - om * rz, vz + om * rx])

    def __repr__(self):
        return f"Body({self.name!r}, i={self.index})"
