"""Convex collision primitives: box, sphere, cylinder, capsule.

Every shape provides a local-frame support function (used by GJK/EPA), point
containment and volume sampling (used by the sampling oracle in tests), and a
bounding radius for broad-phase culling. Dimensions must be strictly positive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .transforms import Pose


class InvalidShape(ValueError):
    """Shape dimensions are not strictly positive."""


def _check_positive(name: str, *values: float):
    for v in values:
        if not v > 0.0:
            raise InvalidShape(f"{name} dimensions must be strictly positive, got {v}")


@dataclass(frozen=True)
class Box:
    half_extents: tuple[float, float, float]
    kind = "box"

    def __post_init__(self):
        he = tuple(float(v) for v in self.half_extents)
        _check_positive("box", *he)
        object.__setattr__(self, "half_extents", he)

    def support(self, direction: np.ndarray) -> np.ndarray:
        he = np.asarray(self.half_extents)
        return np.where(direction >= 0.0, he, -he)

    def contains(self, points: np.ndarray) -> np.ndarray:
        he = np.asarray(self.half_extents)
        return np.all(np.abs(points) <= he, axis=-1)

    def sample_volume(self, rng: np.random.Generator, n: int) -> np.ndarray:
        he = np.asarray(self.half_extents)
        return rng.uniform(-he, he, size=(n, 3))

    def bounding_radius(self) -> float:
        return float(np.linalg.norm(self.half_extents))

    def volume(self) -> float:
        hx, hy, hz = self.half_extents
        return 8.0 * hx * hy * hz


@dataclass(frozen=True)
class Sphere:
    radius: float
    kind = "sphere"

    def __post_init__(self):
        object.__setattr__(self, "radius", float(self.radius))
        _check_positive("sphere", self.radius)

    def support(self, direction: np.ndarray) -> np.ndarray:
        n = np.linalg.norm(direction)
        if n < 1e-12:
            return np.array([self.radius, 0.0, 0.0])
        return (self.radius / n) * direction

    def contains(self, points: np.ndarray) -> np.ndarray:
        return np.linalg.norm(points, axis=-1) <= self.radius

    def sample_volume(self, rng: np.random.Generator, n: int) -> np.ndarray:
        dirs = rng.normal(size=(n, 3))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        radii = self.radius * rng.uniform(size=(n, 1)) ** (1.0 / 3.0)
        return dirs * radii

    def bounding_radius(self) -> float:
        return self.radius

    def volume(self) -> float:
        return 4.0 / 3.0 * np.pi * self.radius**3


@dataclass(frozen=True)
class Cylinder:
    """Solid cylinder along local z, from -half_length to +half_length."""

    radius: float
    half_length: float
    kind = "cylinder"

    def __post_init__(self):
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "half_length", float(self.half_length))
        _check_positive("cylinder", self.radius, self.half_length)

    def support(self, direction: np.ndarray) -> np.ndarray:
        dxy = direction[:2]
        n = np.linalg.norm(dxy)
        out = np.zeros(3)
        if n > 1e-12:
            out[:2] = (self.radius / n) * dxy
        out[2] = self.half_length if direction[2] >= 0.0 else -self.half_length
        return out

    def contains(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        radial = np.linalg.norm(points[:, :2], axis=1) <= self.radius
        axial = np.abs(points[:, 2]) <= self.half_length
        return radial & axial

    def sample_volume(self, rng: np.random.Generator, n: int) -> np.ndarray:
        theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
        r = self.radius * np.sqrt(rng.uniform(size=n))
        z = rng.uniform(-self.half_length, self.half_length, size=n)
        return np.column_stack([r * np.cos(theta), r * np.sin(theta), z])

    def bounding_radius(self) -> float:
        return float(np.hypot(self.radius, self.half_length))

    def volume(self) -> float:
        return np.pi * self.radius**2 * 2.0 * self.half_length


@dataclass(frozen=True)
class Capsule:
    """Sphere-swept segment along local z: segment endpoints (0,0,+-half_length)."""

    radius: float
    half_length: float
    kind = "capsule"

    def __post_init__(self):
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "half_length", float(self.half_length))
        _check_positive("capsule", self.radius, self.half_length)

    def support(self, direction: np.ndarray) -> np.ndarray:
        n = np.linalg.norm(direction)
        if n < 1e-12:
            return np.array([self.radius, 0.0, self.half_length])
        out = (self.radius / n) * direction
        out = out.copy()
        out[2] += self.half_length if direction[2] >= 0.0 else -self.half_length
        return out

    def contains(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        z = np.clip(points[:, 2], -self.half_length, self.half_length)
        closest = np.column_stack([np.zeros(len(points)), np.zeros(len(points)), z])
        return np.linalg.norm(points - closest, axis=1) <= self.radius

    def sample_volume(self, rng: np.random.Generator, n: int) -> np.ndarray:
        v_cyl = np.pi * self.radius**2 * 2.0 * self.half_length
        v_caps = 4.0 / 3.0 * np.pi * self.radius**3
        in_caps = rng.uniform(size=n) < v_caps / (v_cyl + v_caps)
        pts = Cylinder(self.radius, self.half_length).sample_volume(rng, n)
        # map a uniform ball point into the two end caps, preserving volume
        ball = Sphere(self.radius).sample_volume(rng, n)
        ball[:, 2] += np.where(ball[:, 2] >= 0.0, self.half_length, -self.half_length)
        pts[in_caps] = ball[in_caps]
        return pts

    def bounding_radius(self) -> float:
        return self.half_length + self.radius

    def volume(self) -> float:
        return np.pi * self.radius**2 * 2.0 * self.half_length + 4.0 / 3.0 * np.pi * self.radius**3

    def world_segment(self, pose: Pose) -> tuple[np.ndarray, np.ndarray]:
        axis = pose.rotate(np.array([0.0, 0.0, self.half_length]))
        return pose.position - axis, pose.position + axis


Shape = Box | Sphere | Cylinder | Capsule

_KINDS = {"box": Box, "sphere": Sphere, "cylinder": Cylinder, "capsule": Capsule}


def shape_to_dict(shape: Shape) -> dict:
    if isinstance(shape, Box):
        return {"kind": "box", "half_extents": [float(v) for v in shape.half_extents]}
    if isinstance(shape, Sphere):
        return {"kind": "sphere", "radius": shape.radius}
    return {"kind": shape.kind, "radius": shape.radius, "half_length": shape.half_length}


def shape_from_dict(d: dict) -> Shape:
    kind = d.get("kind")
    if kind not in _KINDS:
        raise InvalidShape(f"unknown shape kind {kind!r}")
    if kind == "box":
        return Box(half_extents=tuple(d["half_extents"]))
    if kind == "sphere":
        return Sphere(radius=d["radius"])
    return _KINDS[kind](radius=d["radius"], half_length=d["half_length"])


def world_support(shape: Shape, pose: Pose, direction: np.ndarray) -> np.ndarray:
    """Farthest point of the posed shape along a world-frame direction."""
    local_dir = pose.rotation_matrix().T @ direction
    return pose.apply(shape.support(local_dir))


def shape_aabb(shape: Shape, pose: Pose) -> tuple[np.ndarray, np.ndarray]:
    """Axis-aligned bounds of the posed shape (exact for these convex shapes)."""
    rot = pose.rotation_matrix()
    lo = np.empty(3)
    hi = np.empty(3)
    for i in range(3):
        # row i of R is the world axis e_i expressed in the local frame
        hi[i] = pose.position[i] + rot[i] @ shape.support(rot[i])
        lo[i] = pose.position[i] + rot[i] @ shape.support(-rot[i])
    return lo, hi


def contains_world(shape: Shape, pose: Pose, points: np.ndarray) -> np.ndarray:
    """Containment test for world-frame points (vectorized)."""
    local = (np.atleast_2d(points) - pose.position) @ pose.rotation_matrix()
    return shape.contains(local)
