"""Rigid-body primitives: unit quaternions, rotation matrices, camera poses.

Convention: a ``Pose`` is world-from-camera. ``rotation`` maps camera-frame
vectors into the world frame and ``translation`` is the camera centre in
world coordinates. Quaternions are stored (w, x, y, z) with w >= 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

_QUAT_NORM_TOL = 1e-9


def canonicalize_quat(q: np.ndarray) -> np.ndarray:
    """Normalise to unit length and fix the sign ambiguity (w >= 0)."""
    q = np.asarray(q, dtype=np.float64)
    n = np.linalg.norm(q)
    if not np.isfinite(n) or n == 0.0:
        raise DataError("quaternion has zero or non-finite norm")
    # Skip the divide when already unit so canonicalisation is bit-stable.
    if abs(n - 1.0) > 1e-13:
        q = q / n
    else:
        q = q.copy()
    # q and -q encode the same rotation; pick the half-space deterministically.
    if q[0] < 0.0 or (q[0] == 0.0 and q[np.nonzero(q)[0][0]] < 0.0):
        q = -q
    return q


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ],
        dtype=np.float64,
    )


def matrix_to_quat(R: np.ndarray) -> np.ndarray:
    """Rotation matrix to canonical unit quaternion (Shepperd's method)."""
    R = np.asarray(R, dtype=np.float64)
    t = np.trace(R)
    if t > 0:
        s = np.sqrt(t + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
        )
    else:
        i = int(np.argmax(np.diag(R)))
        if i == 0:
            s = np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2.0
            q = np.array(
                [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s]
            )
        elif i == 1:
            s = np.sqrt(1.0 - R[0, 0] + R[1, 1] - R[2, 2]) * 2.0
            q = np.array(
                [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s]
            )
        else:
            s = np.sqrt(1.0 - R[0, 0] - R[1, 1] + R[2, 2]) * 2.0
            q = np.array(
                [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s]
            )
    return canonicalize_quat(q)


def rotation_angle_deg(Ra: np.ndarray, Rb: np.ndarray) -> float:
    """Geodesic angle between two rotations, in degrees."""
    c = (np.trace(Ra.T @ Rb) - 1.0) / 2.0
    return float(np.degrees(np.arccos(np.clip(c, -1.0, 1.0))))


def rodrigues(omega: np.ndarray) -> np.ndarray:
    """Axis-angle vector to rotation matrix."""
    theta = np.linalg.norm(omega)
    if theta < 1e-12:
        K = skew(omega)
        return np.eye(3) + K + 0.5 * (K @ K)
    k = omega / theta
    K = skew(k)
    return np.eye(3) + np.sin(theta) * K + (1.0 - np.cos(theta)) * (K @ K)


def skew(v: np.ndarray) -> np.ndarray:
    return np.array(
        [[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]], dtype=np.float64
    )


@dataclass(frozen=True)
class Pose:
    """World-from-camera rigid transform."""

    quat: np.ndarray  # (w, x, y, z), unit, w >= 0
    trans: np.ndarray  # camera centre in world coordinates, metres

    def __post_init__(self):
        q = canonicalize_quat(self.quat)
        t = np.asarray(self.trans, dtype=np.float64).reshape(3).copy()
        if not np.all(np.isfinite(t)):
            raise DataError("pose translation is non-finite")
        object.__setattr__(self, "quat", q)
        object.__setattr__(self, "trans", t)

    @property
    def rotation(self) -> np.ndarray:
        """3x3 matrix mapping camera-frame vectors to world frame."""
        return quat_to_matrix(self.quat)

    @property
    def center(self) -> np.ndarray:
        return self.trans

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.array([1.0, 0.0, 0.0, 0.0]), np.zeros(3))

    @classmethod
    def from_world_from_camera(cls, R_wc: np.ndarray, center: np.ndarray) -> "Pose":
        return cls(matrix_to_quat(R_wc), np.asarray(center, dtype=np.float64))

    @classmethod
    def from_camera_from_world(cls, R_cw: np.ndarray, t_cw: np.ndarray) -> "Pose":
        R_cw = np.asarray(R_cw, dtype=np.float64)
        t_cw = np.asarray(t_cw, dtype=np.float64).reshape(3)
        return cls(matrix_to_quat(R_cw.T), -R_cw.T @ t_cw)

    def world_to_camera(self, points: np.ndarray) -> np.ndarray:
        """Map world points (k,3) into the camera frame."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return (pts - self.trans) @ self.rotation

    def camera_to_world(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return pts @ self.rotation.T + self.trans


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole camera: focal lengths and principal point in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise DataError("focal lengths must be positive")
        if not (0 < self.cx < self.width and 0 < self.cy < self.height):
            raise DataError("principal point must lie inside the image")

    @property
    def K(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )
