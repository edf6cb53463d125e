"""Points, boxes and (dyadic) cubes: the spatial substrate.

All cubes are axis-aligned. Dyadic cubes are anchored at the origin: a cube
at level k with base scale s has side s * 2**-k and corner equal to
corner_index * side per axis. Membership is half-closed everywhere (lower
faces in, upper faces out), which makes same-level dyadic cubes exactly
disjoint in integer arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SUPPORTED_DIMS = (1, 2, 3)


def as_point(x, dim: int | None = None) -> np.ndarray:
    """Validate and return a point as a float array."""
    p = np.asarray(x, dtype=float)
    if p.ndim != 1:
        raise ValueError(f"point must be a flat coordinate vector, got shape {p.shape}")
    if dim is not None and p.size != dim:
        raise ValueError(f"dimension mismatch: expected {dim}, got {p.size}")
    if p.size not in SUPPORTED_DIMS:
        raise ValueError(f"unsupported dimension {p.size}; supported: {SUPPORTED_DIMS}")
    if not np.all(np.isfinite(p)):
        raise ValueError("point coordinates must be finite")
    return p


def dist_euclid(x, y) -> float:
    x = as_point(x)
    y = as_point(y, dim=x.size)
    return float(np.linalg.norm(x - y))


def dist_max(x, y) -> float:
    """Max-norm distance |x - y|_inf."""
    x = as_point(x)
    y = as_point(y, dim=x.size)
    return float(np.max(np.abs(x - y)))


@dataclass(frozen=True)
class Cube:
    """Axis-aligned cube given by center and side length."""

    center: tuple
    side: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        as_point(self.center)
        if not (self.side > 0 and math.isfinite(self.side)):
            raise ValueError(f"cube side must be positive and finite, got {self.side}")

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def volume(self) -> float:
        return self.side ** self.dim

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.center) - self.side / 2.0

    @property
    def hi(self) -> np.ndarray:
        return np.asarray(self.center) + self.side / 2.0

    def rescale(self, theta: float) -> "Cube":
        """The cube theta*Q: same center, side multiplied by theta."""
        if not (theta > 0 and math.isfinite(theta)):
            raise ValueError(f"rescale factor must be positive, got {theta}")
        return Cube(self.center, self.side * theta)

    def contains(self, x) -> bool:
        """Half-closed membership: lower faces in, upper faces out."""
        p = as_point(x, dim=self.dim)
        return bool(np.all(p >= self.lo) and np.all(p < self.hi))


def cube_rescale(cube: Cube, theta: float) -> Cube:
    return cube.rescale(theta)


@dataclass(frozen=True)
class DyadicCube:
    """Half-closed dyadic cube: side = base_scale * 2**-level, corner = corner_index * side."""

    level: int
    corner_index: tuple
    base_scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "corner_index", tuple(int(i) for i in self.corner_index))
        if len(self.corner_index) not in SUPPORTED_DIMS:
            raise ValueError(f"unsupported dimension {len(self.corner_index)}")
        if self.level < 0:
            raise ValueError("dyadic level must be >= 0")
        if not (self.base_scale > 0 and math.isfinite(self.base_scale)):
            raise ValueError("base_scale must be positive and finite")

    @property
    def dim(self) -> int:
        return len(self.corner_index)

    @property
    def side(self) -> float:
        return self.base_scale / (1 << self.level)

    @property
    def volume(self) -> float:
        return self.side ** self.dim

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.corner_index, dtype=float) * self.side

    @property
    def hi(self) -> np.ndarray:
        return (np.asarray(self.corner_index, dtype=float) + 1.0) * self.side

    @property
    def center(self) -> np.ndarray:
        return (np.asarray(self.corner_index, dtype=float) + 0.5) * self.side

    def contains(self, x) -> bool:
        p = as_point(x, dim=self.dim)
        return bool(np.all(p >= self.lo) and np.all(p < self.hi))

    def children(self) -> list["DyadicCube"]:
        """The 2**N half-closed children, whose disjoint union is this cube."""
        kids = []
        base = np.asarray(self.corner_index) * 2
        for off in np.ndindex(*(2,) * self.dim):
            kids.append(DyadicCube(self.level + 1, tuple(base + np.asarray(off)), self.base_scale))
        return kids

    def parent(self) -> "DyadicCube":
        if self.level == 0:
            raise ValueError("level-0 cube has no parent")
        return DyadicCube(self.level - 1, tuple(i >> 1 for i in self.corner_index), self.base_scale)

    def ancestor_index(self, level: int) -> tuple:
        """Corner index of the ancestor at a coarser level."""
        if level > self.level:
            raise ValueError("ancestor level must be <= own level")
        shift = self.level - level
        return tuple(i >> shift for i in self.corner_index)

    def as_cube(self) -> Cube:
        return Cube(tuple(self.center), self.side)


@dataclass(frozen=True)
class Box:
    """Half-closed axis-aligned box [lo, hi); the computational domain."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(v) for v in self.lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in self.hi))
        lo = as_point(self.lo)
        hi = as_point(self.hi, dim=lo.size)
        if not np.all(lo < hi):
            raise ValueError(f"box needs lo < hi componentwise, got lo={self.lo} hi={self.hi}")

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def extent(self) -> np.ndarray:
        return np.asarray(self.hi) - np.asarray(self.lo)

    @property
    def volume(self) -> float:
        return float(np.prod(self.extent))

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.extent))

    def contains(self, x) -> bool:
        p = as_point(x, dim=self.dim)
        return bool(np.all(p >= np.asarray(self.lo)) and np.all(p < np.asarray(self.hi)))

    def to_json(self) -> dict:
        return {"lo": list(self.lo), "hi": list(self.hi)}

    @classmethod
    def from_json(cls, data: dict) -> "Box":
        return cls(tuple(data["lo"]), tuple(data["hi"]))


def _gap_to_interval(x, lo, hi):
    # componentwise distance from coordinates to [lo, hi]
    return np.maximum(0.0, np.maximum(lo - x, x - hi))


def dist_point_to_cube(x, cube) -> float:
    """Euclidean distance from a point to the CLOSED cube (0 iff x in closure)."""
    if isinstance(cube, DyadicCube):
        lo, hi = cube.lo, cube.hi
        p = as_point(x, dim=cube.dim)
    elif isinstance(cube, Cube):
        lo, hi = cube.lo, cube.hi
        p = as_point(x, dim=cube.dim)
    elif isinstance(cube, Box):
        lo, hi = np.asarray(cube.lo), np.asarray(cube.hi)
        p = as_point(x, dim=cube.dim)
    else:
        raise TypeError(f"unsupported region type {type(cube)!r}")
    return float(np.linalg.norm(_gap_to_interval(p, lo, hi)))


def dist_points_to_cube(points: np.ndarray, lo, hi) -> np.ndarray:
    """Vectorized euclidean distance from an (M, N) array of points to the closed box [lo, hi]."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    gaps = _gap_to_interval(pts, np.asarray(lo), np.asarray(hi))
    return np.sqrt(np.sum(gaps * gaps, axis=1))
