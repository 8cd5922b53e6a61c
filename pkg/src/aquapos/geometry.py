"""Rigid-body transform algebra, Z-Y-X Euler rotations, and line/plane intersection.

World convention used throughout the package: z up, water surface at z = 0,
submerged points at z < 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateLine, GimbalLockNear, ParallelToPlane

ORTHONORMAL_TOL = 1e-9
PITCH_GUARD = 1e-6


def _as_vec3(p) -> np.ndarray:
    v = np.asarray(p, dtype=float)
    if v.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector components must be finite")
    return v


@dataclass(frozen=True)
class RigidTransform:
    """Rotation plus translation; maps a point p to rotation @ p + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float)
        t = _as_vec3(self.translation)
        if R.shape != (3, 3) or not np.all(np.isfinite(R)):
            raise ValueError("rotation must be a finite 3x3 matrix")
        if np.max(np.abs(R.T @ R - np.eye(3))) > ORTHONORMAL_TOL:
            raise ValueError("rotation matrix is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > ORTHONORMAL_TOL:
            raise ValueError("rotation determinant must be +1")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_translation(cls, t) -> "RigidTransform":
        return cls(np.eye(3), t)

    def as_matrix(self) -> np.ndarray:
        """4x4 homogeneous form."""
        M = np.eye(4)
        M[:3, :3] = self.rotation
        M[:3, 3] = self.translation
        return M


def transform_point(H: RigidTransform, p) -> np.ndarray:
    """Apply H to a point: R @ p + t."""
    return H.rotation @ _as_vec3(p) + H.translation


def compose(H_a: RigidTransform, H_b: RigidTransform) -> RigidTransform:
    """Chain two transforms so compose(A, B) applied to p equals A applied to (B applied to p)."""
    return RigidTransform(
        H_a.rotation @ H_b.rotation,
        H_a.rotation @ H_b.translation + H_a.translation,
    )


def invert(H: RigidTransform) -> RigidTransform:
    """Inverse transform: (R^T, -R^T t)."""
    Rt = H.rotation.T
    return RigidTransform(Rt, -Rt @ H.translation)


def euler_zyx_to_rotation(yaw: float, pitch: float, roll: float) -> np.ndarray:
    """Rotation matrix for a yaw (z), then pitch (y), then roll (x) sequence.

    Equals Rz(yaw) @ Ry(pitch) @ Rx(roll), written out entry by entry.
    Raises GimbalLockNear when |pitch| is within PITCH_GUARD of 90 degrees.
    """
    if not (np.isfinite(yaw) and np.isfinite(pitch) and np.isfinite(roll)):
        raise ValueError("Euler angles must be finite")
    if abs(pitch) >= np.pi / 2 - PITCH_GUARD:
        raise GimbalLockNear(f"pitch {pitch:.6g} rad is too close to +/-pi/2")
    cy, sy = np.cos(yaw), np.sin(yaw)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cr, sr = np.cos(roll), np.sin(roll)
    return np.array(
        [
            [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
            [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
            [-sp, cp * sr, cp * cr],
        ]
    )


@dataclass(frozen=True)
class PluckerLine:
    """3D line held as an anchor point and a direction vector."""

    point: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        p = _as_vec3(self.point)
        d = _as_vec3(self.direction)
        if np.linalg.norm(d) <= 1e-12:
            raise DegenerateLine("line direction is (near) zero")
        object.__setattr__(self, "point", p)
        object.__setattr__(self, "direction", d)


def line_from_points(a, b) -> PluckerLine:
    """Line through a and b, anchored at b with direction a - b."""
    a = _as_vec3(a)
    b = _as_vec3(b)
    d = a - b
    if np.linalg.norm(d) <= 1e-9:
        raise DegenerateLine("points coincide; no unique line")
    return PluckerLine(point=b, direction=d)


def intersect_with_zplane(line: PluckerLine, z_plane: float) -> np.ndarray:
    """Point where the line crosses the horizontal plane z = z_plane.

    The returned z component is exactly z_plane. Raises ParallelToPlane when
    the line has (near) zero z slope.
    """
    d = line.direction
    if abs(d[2]) <= 1e-9:
        raise ParallelToPlane("line is parallel to the z plane")
    k = (z_plane - line.point[2]) / d[2]
    return np.array(
        [line.point[0] + k * d[0], line.point[1] + k * d[1], z_plane], dtype=float
    )
