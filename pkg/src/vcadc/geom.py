"""Small geometric value types: 3-vectors, axis-aligned boxes, affine matrices.

All lengths are millimeters throughout the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DesignError


@dataclass(frozen=True)
class Vec3:
    x: float
    y: float
    z: float

    def __post_init__(self):
        for c in (self.x, self.y, self.z):
            if not math.isfinite(c):
                raise DesignError(f"Vec3 components must be finite, got {self}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=np.float64)

    def __iter__(self):
        yield self.x
        yield self.y
        yield self.z


def as_vec3(v) -> np.ndarray:
    """Coerce Vec3 / sequence / ndarray to a float64 array of shape (3,)."""
    if isinstance(v, Vec3):
        return v.as_array()
    a = np.asarray(v, dtype=np.float64)
    if a.shape != (3,):
        raise DesignError(f"expected a 3-vector, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DesignError("vector components must be finite")
    return a


def as_points(pts) -> np.ndarray:
    """Coerce input to an (N, 3) float64 array of query points."""
    a = np.asarray(pts, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(1, 3)
    if a.ndim != 2 or a.shape[1] != 3:
        raise ValueError(f"expected points of shape (N, 3), got {a.shape}")
    return a


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box, min <= max componentwise."""

    min: np.ndarray
    max: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "min", as_vec3(self.min))
        object.__setattr__(self, "max", as_vec3(self.max))
        if np.any(self.min > self.max):
            raise DesignError(f"BBox min {self.min} exceeds max {self.max}")

    @property
    def size(self) -> np.ndarray:
        return self.max - self.min

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.min + self.max)

    def corners(self) -> np.ndarray:
        """All 8 corners, shape (8, 3)."""
        lo, hi = self.min, self.max
        return np.array(
            [[x, y, z] for x in (lo[0], hi[0]) for y in (lo[1], hi[1]) for z in (lo[2], hi[2])]
        )

    def union(self, other: "BBox") -> "BBox":
        return BBox(np.minimum(self.min, other.min), np.maximum(self.max, other.max))

    def intersection(self, other: "BBox") -> "BBox":
        lo = np.maximum(self.min, other.min)
        hi = np.minimum(self.max, other.max)
        # Empty overlap collapses to a degenerate box at the midpoint seam.
        return BBox(lo, np.maximum(lo, hi))

    def expanded(self, margin: float) -> "BBox":
        return BBox(self.min - margin, self.max + margin)

    def contains(self, p) -> bool:
        p = as_vec3(p)
        return bool(np.all(p >= self.min) and np.all(p <= self.max))


def translation(v) -> np.ndarray:
    m = np.eye(4)
    m[:3, 3] = as_vec3(v)
    return m


def scaling(v) -> np.ndarray:
    """Scale matrix; accepts a scalar or a per-axis 3-vector."""
    if np.isscalar(v):
        v = (float(v),) * 3
    m = np.eye(4)
    m[0, 0], m[1, 1], m[2, 2] = as_vec3(v)
    return m


def rotation(axis, angle_rad: float) -> np.ndarray:
    """Rotation about an axis through the origin (Rodrigues)."""
    a = as_vec3(axis)
    n = np.linalg.norm(a)
    if n == 0:
        raise DesignError("rotation axis must be nonzero")
    a = a / n
    c, s = math.cos(angle_rad), math.sin(angle_rad)
    k = np.array([[0, -a[2], a[1]], [a[2], 0, -a[0]], [-a[1], a[0], 0]])
    r = np.eye(3) * c + s * k + (1 - c) * np.outer(a, a)
    m = np.eye(4)
    m[:3, :3] = r
    return m
