"""Rigid-body poses as position + unit quaternion, plus the quaternion helpers
used by kinematics and collision checking.

Quaternions are stored (w, x, y, z). Angles are radians, lengths meters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

QUAT_NORM_TOL = 1e-9


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_normalize(q) -> np.ndarray:
    q = np.asarray(q, dtype=float).reshape(4)
    n = np.linalg.norm(q)
    if n == 0.0:
        raise ValueError("zero-norm quaternion")
    return q / n


def quat_from_axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    half = 0.5 * angle
    s = np.sin(half)
    return np.array([np.cos(half), s * axis[0], s * axis[1], s * axis[2]])


def quat_from_rpy(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Fixed-axis roll-pitch-yaw (URDF convention: Rz(yaw) Ry(pitch) Rx(roll))."""
    qz = quat_from_axis_angle(np.array([0.0, 0.0, 1.0]), yaw)
    qy = quat_from_axis_angle(np.array([0.0, 1.0, 0.0]), pitch)
    qx = quat_from_axis_angle(np.array([1.0, 0.0, 0.0]), roll)
    return quat_multiply(quat_multiply(qz, qy), qx)


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    # q v q* expanded with unrolled cross products (np.cross is slow for
    # single 3-vectors and this sits in the FK hot loop)
    w, x, y, z = q
    vx, vy, vz = v
    tx = 2.0 * (y * vz - z * vy)
    ty = 2.0 * (z * vx - x * vz)
    tz = 2.0 * (x * vy - y * vx)
    return np.array(
        [
            vx + w * tx + (y * tz - z * ty),
            vy + w * ty + (z * tx - x * tz),
            vz + w * tz + (x * ty - y * tx),
        ]
    )


def rotation_vector(q: np.ndarray) -> np.ndarray:
    """Rotation vector (axis * angle) of q, picking the representation with
    nonnegative scalar part so the result is the minimal rotation."""
    if q[0] < 0.0:
        q = -q
    v = q[1:]
    s = np.linalg.norm(v)
    if s < 1e-12:
        return 2.0 * v
    angle = 2.0 * np.arctan2(s, q[0])
    return (angle / s) * v


def orientation_error(target: np.ndarray, current: np.ndarray) -> np.ndarray:
    """Rotation vector taking `current` onto `target`, expressed in world frame."""
    return rotation_vector(quat_multiply(target, quat_conjugate(current)))


@dataclass(frozen=True, eq=False)
class Pose:
    """Position plus unit orientation quaternion. The quaternion is normalized on
    construction; a zero quaternion is rejected."""

    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    orientation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))

    def __post_init__(self):
        p = np.asarray(self.position, dtype=float).reshape(3)
        q = quat_normalize(self.orientation)
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "orientation", q)

    @staticmethod
    def identity() -> "Pose":
        return Pose()

    @staticmethod
    def from_xyz(x: float, y: float, z: float) -> "Pose":
        return Pose(position=np.array([x, y, z], dtype=float))

    @staticmethod
    def from_xyz_rpy(xyz, rpy) -> "Pose":
        return Pose(position=np.asarray(xyz, dtype=float), orientation=quat_from_rpy(*rpy))

    def rotation_matrix(self) -> np.ndarray:
        return quat_to_matrix(self.orientation)

    def compose(self, other: "Pose") -> "Pose":
        """self followed by other: world_T_child = world_T_parent.compose(parent_T_child)."""
        return Pose(
            position=self.position + quat_rotate(self.orientation, other.position),
            orientation=quat_multiply(self.orientation, other.orientation),
        )

    def inverse(self) -> "Pose":
        qc = quat_conjugate(self.orientation)
        return Pose(position=-quat_rotate(qc, self.position), orientation=qc)

    def apply(self, point: np.ndarray) -> np.ndarray:
        """Transform a point (3,) or an array of points (..., 3) into this frame's parent."""
        point = np.asarray(point, dtype=float)
        if point.ndim == 1:
            return self.position + quat_rotate(self.orientation, point)
        return point @ self.rotation_matrix().T + self.position

    def rotate(self, vector: np.ndarray) -> np.ndarray:
        return quat_rotate(self.orientation, np.asarray(vector, dtype=float))

    def approx_equal(self, other: "Pose", tol: float = 1e-9) -> bool:
        if not np.allclose(self.position, other.position, atol=tol):
            return False
        # q and -q encode the same rotation
        return bool(
            np.allclose(self.orientation, other.orientation, atol=tol)
            or np.allclose(self.orientation, -other.orientation, atol=tol)
        )

    def to_dict(self) -> dict:
        return {
            "position": [float(v) for v in self.position],
            "orientation": [float(v) for v in self.orientation],
        }

    @staticmethod
    def from_dict(d: dict) -> "Pose":
        return Pose(position=d["position"], orientation=d["orientation"])

    def __repr__(self):
        p = ", ".join(f"{v:.4g}" for v in self.position)
        q = ", ".join(f"{v:.4g}" for v in self.orientation)
        return f"Pose(({p}), ({q}))"
