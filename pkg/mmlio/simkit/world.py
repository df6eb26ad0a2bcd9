# mmlio/simkit/world.py
"""Planar-patch worlds and vectorized ray casting."""

from dataclasses import dataclass, field

import numpy as np

from mmlio.errors import RangeError

# Depth ties closer than this resolve to the lowest patch index.
TIE_EPS = 1e-9


@dataclass(frozen=True, eq=False)
class Patch:
    """Parallelogram corner + a·edge1 + b·edge2, a, b in [0, 1] (meters)."""

    corner: np.ndarray
    edge1: np.ndarray
    edge2: np.ndarray

    def __post_init__(self):
        for name in ("corner", "edge1", "edge2"):
            arr = np.array(getattr(self, name), dtype=np.float64).reshape(3)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if np.linalg.norm(np.cross(self.edge1, self.edge2)) <= 1e-9:
            raise RangeError("patch edge vectors are parallel")

    @property
    def normal(self):
        n = np.cross(self.edge1, self.edge2)
        return n / np.linalg.norm(n)

    def contains(self, pts, tol=1e-6):
        """Membership test for points already known to be near the patch plane."""
        rel = np.atleast_2d(pts) - self.corner
        a, b = _patch_coords(rel, self.edge1, self.edge2)
        dist = np.abs(rel @ self.normal)
        return (a >= -tol) & (a <= 1 + tol) & (b >= -tol) & (b <= 1 + tol) & (dist <= tol)


def _patch_coords(rel, e1, e2):
    g11, g12, g22 = e1 @ e1, e1 @ e2, e2 @ e2
    det = g11 * g22 - g12 * g12
    r1 = rel @ e1
    r2 = rel @ e2
    a = (g22 * r1 - g12 * r2) / det
    b = (g11 * r2 - g12 * r1) / det
    return a, b


@dataclass(frozen=True, eq=False)
class World:
    planes: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "planes", tuple(self.planes))

    def __len__(self):
        return len(self.planes)

    def extended(self, patches):
        return World(self.planes + tuple(patches))

    def cast(self, origins, directions, range_min=0.0):
        """
        First hit along each ray o + λd (d unit). Returns (depth, patch index);
        misses have depth inf and index -1.
        """
        origins = np.atleast_2d(np.asarray(origins, dtype=np.float64))
        directions = np.atleast_2d(np.asarray(directions, dtype=np.float64))
        n_rays = len(directions)
        if origins.shape[0] == 1 and n_rays > 1:
            origins = np.broadcast_to(origins, directions.shape)
        if not self.planes or n_rays == 0:
            return np.full(n_rays, np.inf), np.full(n_rays, -1, dtype=np.int64)

        depth = np.full((n_rays, len(self.planes)), np.inf)
        for k, patch in enumerate(self.planes):
            n = np.cross(patch.edge1, patch.edge2)
            denom = directions @ n
            with np.errstate(divide="ignore", invalid="ignore"):
                lam = ((patch.corner - origins) @ n) / denom
            ok = (np.abs(denom) > 1e-12) & (lam > range_min)
            if not np.any(ok):
                continue
            hit = origins[ok] + lam[ok, None] * directions[ok]
            a, b = _patch_coords(hit - patch.corner, patch.edge1, patch.edge2)
            inside = (a >= 0.0) & (a <= 1.0) & (b >= 0.0) & (b <= 1.0)
            col = depth[:, k]
            idx = np.flatnonzero(ok)[inside]
            col[idx] = lam[idx]

        best = depth.min(axis=1)
        first = np.argmax(depth <= best[:, None] + TIE_EPS, axis=1)
        first = np.where(np.isfinite(best), first, -1)
        return best, first


def box(lo, hi, bottom=True, top=True):
    """Axis-aligned box surfaces as patches (walls, and optionally floor/top)."""
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    dx, dy, dz = hi - lo
    ex, ey, ez = np.array([dx, 0, 0]), np.array([0, dy, 0]), np.array([0, 0, dz])
    patches = [
        Patch(lo, ex, ez),
        Patch(lo + ey, ex, ez),
        Patch(lo, ey, ez),
        Patch(lo + ex, ey, ez),
    ]
    if bottom:
        patches.append(Patch(lo, ex, ey))
    if top:
        patches.append(Patch(lo + ez, ex, ey))
    return patches


def room(width, depth, height, center=(0.0, 0.0), floor_z=0.0):
    """Closed room: floor, ceiling and four walls, centered in x/y."""
    cx, cy = center
    lo = (cx - width / 2.0, cy - depth / 2.0, floor_z)
    hi = (cx + width / 2.0, cy + depth / 2.0, floor_z + height)
    return box(lo, hi)


def wall(p0, p1, z0, z1):
    """Vertical wall between two floor points."""
    p0 = np.array([p0[0], p0[1], z0], dtype=np.float64)
    d = np.array([p1[0] - p0[0], p1[1] - p0[1], 0.0])
    return Patch(p0, d, np.array([0.0, 0.0, z1 - z0]))
