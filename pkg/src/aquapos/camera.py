"""Pinhole camera model, tag observations, and planar-tag pose recovery.

Camera frame: x right, y down, z forward (out of the lens). Pixels are
(u, v) with u along image x and v along image y; sub-pixel values allowed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BehindCamera, PnPDegenerate, PnPNoConvergence
from .geometry import RigidTransform

MIN_QUAD_AREA_PX2 = 1.0

_REFINE_MAX_ITERS = 100
_REFINE_STEP_TOL = 1e-10
_REFINE_FTOL = 1e-6


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole intrinsics in pixels plus the image size."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (0 < self.cx < self.width and 0 < self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    @classmethod
    def from_dict(cls, d: dict) -> "Intrinsics":
        return cls(
            fx=float(d["fx"]),
            fy=float(d["fy"]),
            cx=float(d["cx"]),
            cy=float(d["cy"]),
            width=int(d["width"]),
            height=int(d["height"]),
        )

    def to_dict(self) -> dict:
        return {
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "width": self.width,
            "height": self.height,
        }


# bench-calibrated defaults used when no intrinsics file is configured
DEFAULT_INTRINSICS = Intrinsics(
    fx=514.177765,
    fy=513.054629,
    cx=346.861136,
    cy=220.015799,
    width=800,
    height=600,
)


def back_project(K: Intrinsics, px) -> np.ndarray:
    """Ray through a pixel, scaled to unit camera depth: ((u-cx)/fx, (v-cy)/fy, 1)."""
    u, v = float(px[0]), float(px[1])
    return np.array([(u - K.cx) / K.fx, (v - K.cy) / K.fy, 1.0])


def project_point(K: Intrinsics, p_cam) -> np.ndarray:
    """Pixel (u, v) for a camera-frame point; raises BehindCamera for z <= 1e-6."""
    p = np.asarray(p_cam, dtype=float)
    if p[2] <= 1e-6:
        raise BehindCamera(f"point depth {p[2]:.3g} m is not in front of the camera")
    return np.array([K.fx * p[0] / p[2] + K.cx, K.fy * p[1] / p[2] + K.cy])


@dataclass(frozen=True)
class TagObservation:
    """Four ordered corner pixels of a detected square tag."""

    timestamp: float
    corners: np.ndarray
    detected: bool = True

    def __post_init__(self):
        c = np.asarray(self.corners, dtype=float)
        if c.shape != (4, 2):
            raise ValueError(f"expected 4 corner pixels, got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("corner pixels must be finite")
        object.__setattr__(self, "corners", c)


def tag_center_pixel(obs: TagObservation) -> np.ndarray:
    """Arithmetic mean of the four corner pixels."""
    return obs.corners.mean(axis=0)


@dataclass(frozen=True)
class TagGeometry:
    """Square tag of known side length; corner order is fixed.

    Marker-frame corners sit at (-s/2,-s/2), (s/2,-s/2), (s/2,s/2), (-s/2,s/2)
    in the z = 0 plane, and observations list pixels in the same order.
    """

    side_length: float

    def __post_init__(self):
        if not self.side_length > 0:
            raise ValueError("tag side length must be positive")

    def corners(self) -> np.ndarray:
        h = self.side_length / 2.0
        return np.array(
            [[-h, -h, 0.0], [h, -h, 0.0], [h, h, 0.0], [-h, h, 0.0]]
        )


@dataclass(frozen=True)
class TagPose:
    """Recovered tag pose in the camera frame plus its reprojection RMS."""

    transform: RigidTransform
    reproj_rms: float

    def __post_init__(self):
        if self.reproj_rms < 0:
            raise ValueError("reprojection RMS cannot be negative")
        if self.transform.translation[2] <= 0:
            raise ValueError("tag must sit in front of the camera")


def quad_area(corners) -> float:
    """Shoelace area of a pixel quad."""
    c = np.asarray(corners, dtype=float)
    x, y = c[:, 0], c[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _skew(v):
    return np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0.0]])


def _rodrigues(w):
    angle = np.linalg.norm(w)
    S = _skew(w)
    if angle < 1e-12:
        return np.eye(3) + S
    a = np.sin(angle) / angle
    b = (1.0 - np.cos(angle)) / angle**2
    return np.eye(3) + a * S + b * (S @ S)


def _normalize_2d(pts):
    """Similarity transform sending the centroid to 0 and mean radius to sqrt(2)."""
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    mean_dist = np.mean(np.linalg.norm(centered, axis=1))
    scale = np.sqrt(2.0) / max(mean_dist, 1e-12)
    T = np.array(
        [
            [scale, 0.0, -scale * centroid[0]],
            [0.0, scale, -scale * centroid[1]],
            [0.0, 0.0, 1.0],
        ]
    )
    return centered * scale, T


def _homography(src, dst):
    """DLT homography mapping src (x, y) to dst (x, y), both normalized internally."""
    s, Ts = _normalize_2d(src)
    d, Td = _normalize_2d(dst)
    rows = []
    for (x, y), (u, v) in zip(s, d):
        rows.append([-x, -y, -1, 0, 0, 0, u * x, u * y, u])
        rows.append([0, 0, 0, -x, -y, -1, v * x, v * y, v])
    A = np.array(rows)
    _, sv, Vt = np.linalg.svd(A)
    if sv[-2] < 1e-12:
        raise PnPDegenerate("correspondences do not determine a homography")
    Hn = Vt[-1].reshape(3, 3)
    H = np.linalg.inv(Td) @ Hn @ Ts
    return H / H[2, 2]


def _pose_from_homography(H):
    """Initial (R, t) from a plane-to-normalized-image homography."""
    h1, h2, h3 = H[:, 0], H[:, 1], H[:, 2]
    s = 2.0 / (np.linalg.norm(h1) + np.linalg.norm(h2))
    t = s * h3
    if t[2] < 0:
        s, t = -s, -t
    r1, r2 = s * h1, s * h2
    R_approx = np.column_stack([r1, r2, np.cross(r1, r2)])
    U, _, Vt = np.linalg.svd(R_approx)
    R = U @ np.diag([1.0, 1.0, np.linalg.det(U @ Vt)]) @ Vt
    return R, t


def _project_corners(K: Intrinsics, R, t, obj):
    P = obj @ R.T + t
    z = P[:, 2]
    px = np.column_stack([K.fx * P[:, 0] / z + K.cx, K.fy * P[:, 1] / z + K.cy])
    return px, P


def _residual_jacobian(K: Intrinsics, R, t, obj, px_obs):
    px, P = _project_corners(K, R, t, obj)
    r = (px - px_obs).ravel()
    J = np.zeros((2 * len(obj), 6))
    for i, p in enumerate(P):
        x, y, z = p
        du = np.array([K.fx / z, 0.0, -K.fx * x / z**2])
        dv = np.array([0.0, K.fy / z, -K.fy * y / z**2])
        dP_dw = -_skew(p - t)  # left-perturbation of R acting on R @ X
        J[2 * i, :3] = du @ dP_dw
        J[2 * i, 3:] = du
        J[2 * i + 1, :3] = dv @ dP_dw
        J[2 * i + 1, 3:] = dv
    return r, J


def _refine_pose(K, obj, px_obs, R, t):
    """Damped Gauss-Newton on (rotation, translation); returns (R, t, rms, converged)."""
    lam = 1e-3
    converged = False
    for _ in range(_REFINE_MAX_ITERS):
        if np.any((obj @ R.T + t)[:, 2] <= 1e-9):
            break
        r, J = _residual_jacobian(K, R, t, obj, px_obs)
        cost = r @ r
        g = J.T @ r
        H = J.T @ J
        step = None
        new_cost = cost
        for _ in range(12):
            try:
                cand = np.linalg.solve(H + lam * np.eye(6), -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            R_new = _rodrigues(cand[:3]) @ R
            t_new = t + cand[3:]
            P_new = obj @ R_new.T + t_new
            if np.any(P_new[:, 2] <= 1e-9):
                lam *= 10.0
                continue
            cand_cost = np.sum((_project_corners(K, R_new, t_new, obj)[0] - px_obs) ** 2)
            if cand_cost < cost:
                R, t = R_new, t_new
                lam = max(lam * 0.3, 1e-12)
                step, new_cost = cand, cand_cost
                break
            lam *= 10.0
        if step is None:
            # no strictly descending step left: at the (local) minimum
            converged = True
            break
        if np.linalg.norm(step) < _REFINE_STEP_TOL:
            converged = True
            break
        if cost - new_cost < _REFINE_FTOL * (cost + 1e-20):
            # relative improvement is marginal: noisy fronto-parallel views
            # crawl along a near-flat tilt valley and would otherwise burn the
            # whole budget; exact views never trip this (they converge
            # quadratically to the step tolerance instead)
            converged = True
            break
    rms = _corner_rms(K, obj, px_obs, R, t)
    return R, t, rms, converged


def _corner_rms(K, obj, px_obs, R, t):
    px, _ = _project_corners(K, R, t, obj)
    return float(np.sqrt(np.mean(np.sum((px - px_obs) ** 2, axis=1))))


def _reflected_candidate(R, t):
    """Alternative planar pose: tag normal mirrored about the viewing ray.

    Returns None when the tag is (near) fronto-parallel and both candidates
    coincide.
    """
    t_norm = np.linalg.norm(t)
    if t_norm < 1e-9:
        return None
    v = t / t_norm
    n = R[:, 2]
    n_alt = 2.0 * np.dot(n, v) * v - n
    axis = np.cross(n, n_alt)
    s = np.linalg.norm(axis)
    if s < 1e-8:
        return None
    c = np.clip(np.dot(n, n_alt), -1.0, 1.0)
    R_flip = _rodrigues(axis / s * np.arctan2(s, c))
    return R_flip @ R, t.copy()


def solve_pnp_planar(K: Intrinsics, geom: TagGeometry, obs: TagObservation) -> TagPose:
    """Recover the tag pose in the camera frame from its four corner pixels.

    A homography between the marker plane and normalized image coordinates
    seeds the pose; damped Gauss-Newton then minimizes pixel reprojection
    error. Planar views admit a second pose with the tag normal mirrored
    about the viewing ray, so both candidates are refined and the one with
    the tag face toward the camera and the lower RMS wins.
    """
    if quad_area(obs.corners) <= MIN_QUAD_AREA_PX2:
        raise PnPDegenerate("tag corners are collinear or the quad is too small")
    obj = geom.corners()
    norm_pts = np.column_stack(
        [(obs.corners[:, 0] - K.cx) / K.fx, (obs.corners[:, 1] - K.cy) / K.fy]
    )
    H = _homography(obj[:, :2], norm_pts)
    R0, t0 = _pose_from_homography(H)

    candidates = []
    R1, t1, rms1, ok1 = _refine_pose(K, obj, obs.corners, R0, t0)
    if ok1:
        candidates.append((R1, t1, rms1))
        alt = _reflected_candidate(R1, t1)
    else:
        alt = None
    if alt is not None:
        R2, t2, rms2, ok2 = _refine_pose(K, obj, obs.corners, *alt)
        if ok2:
            candidates.append((R2, t2, rms2))

    candidates = [(R, t, rms) for R, t, rms in candidates if t[2] > 0]
    if not candidates:
        raise PnPNoConvergence("pose refinement did not produce a valid pose")
    # tag face toward the camera: marker +z anti-parallel to the viewing ray
    facing = [c for c in candidates if np.dot(c[0][:, 2], c[1]) < 0]
    pool = facing if facing else candidates
    R, t, rms = min(pool, key=lambda c: c[2])
    return TagPose(RigidTransform(R, t), rms)


def reprojection_rms(
    K: Intrinsics, geom: TagGeometry, pose: RigidTransform, obs: TagObservation
) -> float:
    """Root-mean-square corner reprojection error of a pose, in pixels."""
    return _corner_rms(K, geom.corners(), obs.corners, pose.rotation, pose.translation)
