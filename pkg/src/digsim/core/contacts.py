"""Collision detection: disc-disc, disc-segment, and polygon-segment contacts.

Produces a flat ContactSet (structure-of-arrays) so the iterative solver can
run as a compiled kernel.  Normals point from body a to body b; gap < 0 means
overlap.  Polygons collide through their edges (disc side) and vertices
(terrain side).
"""
from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .body import ITERATIVE
from .shapes import to_world


class ContactSet:
    """Flat arrays, one entry per contact."""

    FIELDS = ("ia", "ib", "px", "pz", "nx", "nz", "gap", "mu", "rest",
              "eps", "gamma", "mu_r", "r_roll", "feat")

    def __init__(self, **arrays):
        n = len(arrays["ia"]) if arrays else 0
        self.ia = np.asarray(arrays.get("ia", []), dtype=np.int64)
        self.ib = np.asarray(arrays.get("ib", []), dtype=np.int64)
        for f in self.FIELDS[2:-1]:
            setattr(self, f, np.asarray(arrays.get(f, np.zeros(n)), dtype=float))
        self.feat = np.asarray(arrays.get("feat", np.zeros(n)), dtype=np.int64)

    def __len__(self):
        return len(self.ia)

    @staticmethod
    def concatenate(sets):
        sets = [s for s in sets if len(s) > 0]
        if not sets:
            return ContactSet(ia=[])
        out = ContactSet.__new__(ContactSet)
        for f in ContactSet.FIELDS:
            setattr(out, f, np.concatenate([getattr(s, f) for s in sets]))
        return out

    def keys(self):
        """Persistent contact ids for warm starting."""
        return [(int(a), int(b), int(f)) for a, b, f in zip(self.ia, self.ib, self.feat)]


def _pair_params(world, i, j, r_char):
    a, b = world.bodies[i], world.bodies[j]
    cm = world.materials.pair(a.material, b.material)
    eps = 1.0 / (cm.young * max(r_char, 1e-6))
    m_eff = _reduced_mass(world, i, j)
    gamma = 2.0 * np.sqrt(max(m_eff, 1e-12) * eps)
    return cm, eps, gamma


def _reduced_mass(world, i, j):
    wa = world.inv_m[i]
    wb = world.inv_m[j]
    w = wa + wb
    return 1.0 / w if w > 1e-15 else 1e12


def detect_contacts(world, margin: float = 0.005) -> ContactSet:
    """All contacts with gap below the activation margin."""
    sets = []
    discs = world.disc_indices()
    if len(discs) >= 2:
        sets.append(_disc_disc(world, discs, margin))
    if len(discs) >= 1:
        sets.append(_disc_segments(world, discs, margin))
    sets.append(_polygon_segments(world, margin))
    return ContactSet.concatenate(sets)


def _disc_disc(world, discs, margin):
    pos = world.q[discs, :2]
    rad = world.disc_radius[discs]
    rmax = rad.max()
    tree = cKDTree(pos)
    pairs = tree.query_pairs(2.0 * rmax + margin, output_type="ndarray")
    if len(pairs) == 0:
        return ContactSet(ia=[])
    i_loc, j_loc = pairs[:, 0], pairs[:, 1]
    d = pos[j_loc] - pos[i_loc]
    dist = np.hypot(d[:, 0], d[:, 1])
    gap = dist - (rad[i_loc] + rad[j_loc])
    keep = (gap < margin) & (dist > 1e-12)
    if not keep.any():
        return ContactSet(ia=[])
    i_loc, j_loc, d, dist, gap = i_loc[keep], j_loc[keep], d[keep], dist[keep], gap[keep]
    ia = discs[i_loc]
    ib = discs[j_loc]
    # skip excluded pairs (rare for discs; vectorized check only if any exist)
    if world.no_collide:
        mask = np.array([not world.collides(int(a), int(b)) for a, b in zip(ia, ib)])
        if mask.any():
            ia, ib = ia[~mask], ib[~mask]
            d, dist, gap = d[~mask], dist[~mask], gap[~mask]
            i_loc, j_loc = i_loc[~mask], j_loc[~mask]
    n = d / dist[:, None]
    ri, rj = rad[i_loc], rad[j_loc]
    p = pos[i_loc] + n * (ri + 0.5 * gap)[:, None]
    r_char = np.minimum(ri, rj)
    mu = np.empty(len(ia))
    rest = np.empty(len(ia))
    mu_r = np.empty(len(ia))
    eps = np.empty(len(ia))
    gamma = np.empty(len(ia))
    # particle-particle pairs are usually a single material pair; memoized below
    cache = {}
    for k, (a, b) in enumerate(zip(ia, ib)):
        key = (world.bodies[a].material, world.bodies[b].material, round(float(r_char[k]), 6))
        if key not in cache:
            cache[key] = _pair_params(world, int(a), int(b), float(r_char[k]))
        cm, e, g_ = cache[key]
        mu[k], rest[k], mu_r[k], eps[k], gamma[k] = cm.friction, cm.restitution, cm.rolling, e, g_
    return ContactSet(ia=ia, ib=ib, px=p[:, 0], pz=p[:, 1], nx=n[:, 0], nz=n[:, 1],
                      gap=gap, mu=mu, rest=rest, eps=eps, gamma=gamma, mu_r=mu_r,
                      r_roll=r_char, feat=np.zeros(len(ia), dtype=np.int64))


def _world_segments(world):
    """All boundary segments: polylines and polygon edges, with owner body index."""
    segs = []
    for b in world.bodies:
        if b.is_polyline:
            pts = to_world(b.shape.points, b.pose)
            for k in range(len(pts) - 1):
                segs.append((b.index, k, pts[k], pts[k + 1]))
        elif b.is_polygon:
            pts = to_world(b.shape.vertices, b.pose)
            nv = len(pts)
            for k in range(nv):
                segs.append((b.index, k, pts[k], pts[(k + 1) % nv]))
    return segs


def _disc_segments(world, discs, margin):
    segs = _world_segments(world)
    if not segs:
        return ContactSet(ia=[])
    pos = world.q[discs, :2]
    rad = world.disc_radius[discs]
    rows = {f: [] for f in ContactSet.FIELDS}
    for owner, featk, s0, s1 in segs:
        d = s1 - s0
        L2 = d @ d
        t = np.clip(((pos - s0) @ d) / L2, 0.0, 1.0)
        c = s0 + t[:, None] * d
        dv = pos - c
        dist = np.hypot(dv[:, 0], dv[:, 1])
        # the left normal (along winding) marks the side material lives on;
        # a centre that crossed the segment keeps being pushed back out
        # instead of flipping the contact normal (anti-tunnelling)
        n_left = np.array([-d[1], d[0]]) / np.sqrt(L2)
        signed = dv @ n_left
        # only centres within one radius of the segment count as tunnelled;
        # farther away on the material side is just a separate body passing
        # behind an open shell (e.g. a wheel behind the bucket plates)
        behind = (signed < 0.0) & (t > 1e-9) & (t < 1.0 - 1e-9) & (dist < rad)
        gap = np.where(behind, -(dist + rad), dist - rad)
        keep = (gap < margin) & (dist > 1e-12)
        for k in np.nonzero(keep)[0]:
            i = int(discs[k])
            if i == owner or not world.collides(i, owner):
                continue
            if behind[k]:
                n = -n_left
            else:
                n = -dv[k] / dist[k]    # from disc (a) towards the segment owner (b)
            cm, eps, gamma = _pair_params(world, i, owner, float(rad[k]))
            rows["ia"].append(i)
            rows["ib"].append(owner)
            rows["px"].append(c[k, 0])
            rows["pz"].append(c[k, 1])
            rows["nx"].append(n[0])
            rows["nz"].append(n[1])
            rows["gap"].append(gap[k])
            rows["mu"].append(cm.friction)
            rows["rest"].append(cm.restitution)
            rows["eps"].append(eps)
            rows["gamma"].append(gamma)
            rows["mu_r"].append(cm.rolling)
            rows["r_roll"].append(rad[k])
            rows["feat"].append(featk + 1)
    out = ContactSet(**rows)
    return _dedupe_disc_contacts(out)


def _dedupe_disc_contacts(cs: ContactSet) -> ContactSet:
    """Keep only the deepest contact per (disc, owner) pair.

    A disc near a polyline knee otherwise gets one contact per adjacent
    segment, double-counting the support.
    """
    if len(cs) == 0:
        return cs
    best = {}
    for k in range(len(cs)):
        key = (int(cs.ia[k]), int(cs.ib[k]))
        if key not in best or cs.gap[k] < cs.gap[best[key]]:
            best[key] = k
    idx = np.array(sorted(best.values()), dtype=int)
    out = ContactSet.__new__(ContactSet)
    for f in ContactSet.FIELDS:
        setattr(out, f, getattr(cs, f)[idx])
    return out


def _polygon_segments(world, margin, char_len=0.1):
    """Polygon vertices against the segments of other bodies."""
    segs = _world_segments(world)
    rows = {f: [] for f in ContactSet.FIELDS}
    for b in world.bodies:
        if b.kinematic or not (b.is_polygon or b.is_polyline):
            continue
        if b.is_polygon:
            verts = to_world(b.shape.vertices, b.pose)
        else:
            verts = to_world(b.shape.points, b.pose)
        for owner, featk, s0, s1 in segs:
            if owner == b.index or not world.collides(b.index, owner):
                continue
            d = s1 - s0
            L = np.hypot(*d)
            td = d / L
            n_seg = np.array([-td[1], td[0]])   # left normal of the segment
            rel = verts - s0
            t = (rel @ td) / L
            sd = rel @ n_seg                    # signed distance, + on the left side
            keep = (t >= 0.0) & (t <= 1.0) & (sd < margin) & (sd > -0.5)
            for k in np.nonzero(keep)[0]:
                cm, eps, gamma = _pair_params(world, b.index, owner, char_len)
                c = s0 + t[k] * d
                rows["ia"].append(b.index)
                rows["ib"].append(owner)
                rows["px"].append(c[0])
                rows["pz"].append(c[1])
                rows["nx"].append(-n_seg[0])    # from polygon towards the surface
                rows["nz"].append(-n_seg[1])
                rows["gap"].append(sd[k])
                rows["mu"].append(cm.friction)
                rows["rest"].append(cm.restitution)
                rows["eps"].append(eps)
                rows["gamma"].append(gamma)
                rows["mu_r"].append(0.0)
                rows["r_roll"].append(char_len)
                rows["feat"].append(1000 * (k + 1) + featk)
    return ContactSet(**rows)
