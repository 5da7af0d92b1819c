"""Collision shapes for the planar engine.

All shapes live in a body-local frame; the body pose (x, z, pitch) maps them
to the world.  Terrain boundaries are open polylines, everything else is a
disc or a convex polygon.
"""
from __future__ import annotations

import numpy as np


class ShapeError(ValueError):
    """Raised for degenerate shape definitions."""


class Disc:
    __slots__ = ("radius",)

    def __init__(self, radius: float):
        if radius <= 0.0:
            raise ShapeError(f"disc radius must be positive, got {radius}")
        self.radius = float(radius)

    def __repr__(self):
        return f"Disc(r={self.radius:g})"


class Polygon:
    """Convex polygon, CCW vertex order, in the body frame."""

    __slots__ = ("vertices",)

    def __init__(self, vertices):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[0] < 3 or v.shape[1] != 2:
            raise ShapeError("polygon needs >= 3 planar vertices")
        area2 = _signed_area2(v)
        if abs(area2) < 1e-12:
            raise ShapeError("degenerate polygon (zero area)")
        if area2 < 0.0:
            v = v[::-1].copy()
        self.vertices = v

    @property
    def area(self) -> float:
        return 0.5 * _signed_area2(self.vertices)

    def __repr__(self):
        return f"Polygon(n={len(self.vertices)})"


class Polyline:
    """Open chain of segments; used for static terrain boundaries."""

    __slots__ = ("points",)

    def __init__(self, points):
        p = np.asarray(points, dtype=float)
        if p.ndim != 2 or p.shape[0] < 2 or p.shape[1] != 2:
            raise ShapeError("polyline needs >= 2 planar points")
        seg = np.diff(p, axis=0)
        if np.any(np.hypot(seg[:, 0], seg[:, 1]) < 1e-12):
            raise ShapeError("polyline has a zero-length segment")
        self.points = p

    def __repr__(self):
        return f"Polyline(n={len(self.points)})"


def _signed_area2(v: np.ndarray) -> float:
    x, z = v[:, 0], v[:, 1]
    return float(np.dot(x, np.roll(z, -1)) - np.dot(z, np.roll(x, -1)))


def rot(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def to_world(points: np.ndarray, pose) -> np.ndarray:
    """Map body-local points (n,2) to world coordinates for pose (x, z, th)."""
    x, z, th = pose
    return points @ rot(th).T + np.array([x, z])


class Marker:
    """Massless-geometry shape: the body takes part in dynamics and joints
    but never generates contacts (used for linkage bodies like the boom)."""

    __slots__ = ()

    def __repr__(self):
        return "Marker()"
