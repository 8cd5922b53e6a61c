"""Roll/pitch estimation for the surface vehicle.

An extended Kalman filter integrates gyro rates through the Euler-angle
kinematics and corrects with the gravity direction seen by the
accelerometer. Yaw comes from elsewhere (SLAM) and is fused in only when
building the full body rotation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AccelOutOfRange, PitchSingularity
from .geometry import euler_zyx_to_rotation

GRAVITY = 9.81


def _as_vec3(v) -> np.ndarray:
    a = np.asarray(v, dtype=float)
    if a.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("components must be finite")
    return a


def _as_cov2(M, name: str, positive_definite: bool) -> np.ndarray:
    P = np.asarray(M, dtype=float)
    if P.shape != (2, 2) or not np.all(np.isfinite(P)):
        raise ValueError(f"{name} must be a finite 2x2 matrix")
    if np.max(np.abs(P - P.T)) > 1e-12:
        raise ValueError(f"{name} must be symmetric")
    P = 0.5 * (P + P.T)
    eigs = np.linalg.eigvalsh(P)
    if positive_definite:
        if eigs[0] <= 0:
            raise ValueError(f"{name} must be positive definite")
    elif eigs[0] < -1e-12:
        raise ValueError(f"{name} must be positive semi-definite")
    return P


@dataclass(frozen=True)
class ImuSample:
    """One gyro + accelerometer reading. Rejects free-fall/garbage samples."""

    timestamp: float
    gyro: np.ndarray
    accel: np.ndarray

    def __post_init__(self):
        g = _as_vec3(self.gyro)
        a = _as_vec3(self.accel)
        if np.linalg.norm(a) <= 0.1 * GRAVITY:
            raise ValueError("accelerometer magnitude below 0.1 g")
        object.__setattr__(self, "gyro", g)
        object.__setattr__(self, "accel", a)


@dataclass(frozen=True)
class TiltState:
    """Filter state: roll and pitch with their 2x2 covariance."""

    roll: float
    pitch: float
    covariance: np.ndarray

    def __post_init__(self):
        if not (np.isfinite(self.roll) and np.isfinite(self.pitch)):
            raise ValueError("angles must be finite")
        if abs(self.pitch) >= np.pi / 2:
            raise ValueError("pitch out of (-pi/2, pi/2)")
        P = _as_cov2(self.covariance, "covariance", positive_definite=False)
        object.__setattr__(self, "covariance", P)

    def mean(self) -> np.ndarray:
        return np.array([self.roll, self.pitch])


@dataclass(frozen=True)
class TiltConfig:
    """Noise settings for the tilt filter.

    r must be positive definite (it is inverted in the update); q and p0 may
    be semi-definite, which freezes the corresponding state directions.
    """

    q: np.ndarray = field(default_factory=lambda: np.diag([1e-6, 1e-6]))
    r: np.ndarray = field(default_factory=lambda: np.diag([4e-4, 4e-4]))
    p0: np.ndarray = field(default_factory=lambda: np.diag([1e-2, 1e-2]))

    def __post_init__(self):
        object.__setattr__(self, "q", _as_cov2(self.q, "q", False))
        object.__setattr__(self, "r", _as_cov2(self.r, "r", True))
        object.__setattr__(self, "p0", _as_cov2(self.p0, "p0", False))


def predict_mean(roll: float, pitch: float, gyro, dt: float) -> tuple[float, float]:
    """Euler-kinematics propagation of (roll, pitch) by body rates over dt."""
    wx, wy, wz = gyro
    sr, cr = np.sin(roll), np.cos(roll)
    tp = np.tan(pitch)
    roll_next = roll + dt * (wx + wy * sr * tp + wz * cr * tp)
    pitch_next = pitch + dt * (wy * cr - wz * sr)
    return roll_next, pitch_next


def prediction_jacobian(roll: float, pitch: float, gyro, dt: float) -> np.ndarray:
    """d(next state)/d(state) for predict_mean."""
    wx, wy, wz = gyro
    sr, cr = np.sin(roll), np.cos(roll)
    tp = np.tan(pitch)
    sec2 = 1.0 / np.cos(pitch) ** 2
    return np.array(
        [
            [1.0 + dt * tp * (wy * cr - wz * sr), dt * (wy * sr + wz * cr) * sec2],
            [-dt * (wy * sr + wz * cr), 1.0],
        ]
    )


def ekf_predict(state: TiltState, gyro, dt: float, cfg: TiltConfig) -> TiltState:
    """Propagate the state mean and covariance through the gyro kinematics."""
    if not (0 < dt <= 0.5):
        raise ValueError(f"dt {dt:.4g} s outside (0, 0.5]")
    if abs(state.pitch) >= np.pi / 2 - 1e-3:
        raise PitchSingularity("pitch too close to +/-90 deg for tan(pitch)")
    gyro = _as_vec3(gyro)
    roll, pitch = predict_mean(state.roll, state.pitch, gyro, dt)
    A = prediction_jacobian(state.roll, state.pitch, gyro, dt)
    P = A @ state.covariance @ A.T + cfg.q
    P = 0.5 * (P + P.T)
    return TiltState(roll, pitch, P)


def accel_to_tilt(accel) -> tuple[float, float]:
    """(roll, pitch) implied by a quasi-static accelerometer reading.

    With gravity the only sensed acceleration, the body-frame reading is
    g * (sin pitch, -cos pitch sin roll, -cos pitch cos roll), so pitch
    comes from the x axis and roll from the y/z pair. A reading of
    (0, 0, +g), an upside-down sensor, maps to roll = pi, pitch = 0.
    """
    a = _as_vec3(accel)
    mag = np.linalg.norm(a)
    if not (0.5 * GRAVITY <= mag <= 1.5 * GRAVITY):
        raise AccelOutOfRange(f"|accel| = {mag:.3g} m/s^2 is not near gravity")
    roll = np.arctan2(-a[1], -a[2])
    pitch = np.arctan2(a[0], np.hypot(a[1], a[2]))
    return float(roll), float(pitch)


def _wrap_pi(x: np.ndarray) -> np.ndarray:
    return (x + np.pi) % (2 * np.pi) - np.pi


def ekf_update(state: TiltState, accel, cfg: TiltConfig) -> TiltState:
    """Correct the state with the accelerometer tilt observation (H = I)."""
    z = np.array(accel_to_tilt(accel))
    x = state.mean()
    innovation = _wrap_pi(z - x)
    P = state.covariance
    S = P + cfg.r
    K = P @ np.linalg.inv(S)
    x_new = x + K @ innovation
    IK = np.eye(2) - K
    P_new = IK @ P @ IK.T + K @ cfg.r @ K.T
    P_new = 0.5 * (P_new + P_new.T)
    return TiltState(float(x_new[0]), float(x_new[1]), P_new)


def fuse_full_rotation(tilt: TiltState, yaw: float) -> np.ndarray:
    """Body-to-world rotation from filter tilt plus an external yaw."""
    return euler_zyx_to_rotation(yaw, tilt.pitch, tilt.roll)


class TiltTracker:
    """Streams IMU samples through the filter.

    The first in-range sample initializes the state straight from the
    accelerometer; later samples predict with their gyro over the elapsed
    time and then correct with their accelerometer. Out-of-range
    accelerometer readings skip the correction but keep the prediction.
    """

    def __init__(self, cfg: TiltConfig | None = None):
        self.cfg = cfg if cfg is not None else TiltConfig()
        self.state: TiltState | None = None
        self._t_last: float | None = None

    def feed(self, sample: ImuSample) -> TiltState:
        if self.state is None:
            roll, pitch = accel_to_tilt(sample.accel)
            self.state = TiltState(roll, pitch, self.cfg.p0)
        else:
            dt = sample.timestamp - self._t_last
            if dt > 0:
                self.state = ekf_predict(self.state, sample.gyro, dt, self.cfg)
            try:
                self.state = ekf_update(self.state, sample.accel, self.cfg)
            except AccelOutOfRange:
                pass
        self._t_last = sample.timestamp
        return self.state
