"""Affine depth-sensor calibration fitted by particle swarm optimization.

A pressure-derived depth reading ``raw`` is mapped to true depth through
``depth = scale * raw + offset``. The two parameters are recovered from
(raw, truth) sample pairs by minimizing the sum of squared residuals with
a small deterministic PSO. The cost is convex quadratic, so the swarm is
overkill for the model itself, but it keeps the fit robust to poor
initial bounds and needs no linear-algebra assumptions downstream.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateData, InsufficientData

# Per-step velocity clamp, as a fraction of each parameter's search range.
_VELOCITY_CLAMP_FRACTION = 0.2


@dataclass(frozen=True)
class CalibrationParams:
    """Affine depth correction: true depth = scale * raw + offset."""

    scale: float
    offset: float

    def __post_init__(self):
        if not (np.isfinite(self.scale) and np.isfinite(self.offset)):
            raise ValueError("calibration parameters must be finite")
        if self.scale == 0.0:
            raise ValueError("calibration scale must be nonzero")

    def to_dict(self) -> dict:
        return {"scale": float(self.scale), "offset": float(self.offset)}

    @classmethod
    def from_dict(cls, data: dict) -> "CalibrationParams":
        return cls(float(data["scale"]), float(data["offset"]))


IDENTITY_CALIBRATION = CalibrationParams(1.0, 0.0)


@dataclass(frozen=True)
class PsoConfig:
    """Swarm hyperparameters and search bounds for the calibration fit."""

    swarm_size: int = 30
    iterations: int = 200
    inertia: float = 0.7
    cognitive: float = 1.5
    social: float = 1.5
    scale_bounds: tuple = (0.5, 2.0)
    offset_bounds: tuple = (-1.0, 1.0)
    seed: int = 1

    def __post_init__(self):
        if self.swarm_size < 2:
            raise ValueError("swarm_size must be at least 2")
        if self.iterations < 1:
            raise ValueError("iterations must be positive")
        if not 0.0 <= self.inertia <= 1.0:
            raise ValueError("inertia must lie in [0, 1]")
        if self.cognitive < 0.0 or self.social < 0.0:
            raise ValueError("acceleration coefficients must be non-negative")
        for lo, hi in (self.scale_bounds, self.offset_bounds):
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise ValueError("bounds must be finite with lower < upper")

    def lower(self) -> np.ndarray:
        return np.array([self.scale_bounds[0], self.offset_bounds[0]])

    def upper(self) -> np.ndarray:
        return np.array([self.scale_bounds[1], self.offset_bounds[1]])


@dataclass
class Particle:
    """One swarm member: position (scale, offset), velocity, personal best."""

    position: np.ndarray
    velocity: np.ndarray
    best_position: np.ndarray
    best_cost: float


def _as_pairs(pairs) -> np.ndarray:
    arr = np.asarray(pairs, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("pairs must be an (n, 2) array of (raw, truth) rows")
    if not np.all(np.isfinite(arr)):
        raise ValueError("calibration pairs must be finite")
    return arr


def calibration_cost(theta, pairs) -> float:
    """Sum of squared residuals of the affine model over the pairs."""
    arr = _as_pairs(pairs)
    if arr.shape[0] < 2:
        raise InsufficientData("need at least 2 calibration pairs")
    t = np.asarray(theta, dtype=float)
    residual = arr[:, 0] * t[0] + t[1] - arr[:, 1]
    return float(residual @ residual)


def pso_step(swarm, g_best, pairs, cfg: PsoConfig, rng) -> list:
    """Advance every particle one step and refresh personal bests in place.

    For each particle, in swarm order, two scalar uniforms r1 then r2 are
    drawn from ``rng``; the velocity update is

        v' = w*v + c1*r1*(p_best - x) + c2*r2*(g_best - x)

    with v' clamped per component and the new position clipped to the
    search bounds. ``g_best`` is held fixed for the whole step, so the
    sweep is synchronous; the caller rescans personal bests afterwards.
    """
    lo, hi = cfg.lower(), cfg.upper()
    v_max = _VELOCITY_CLAMP_FRACTION * (hi - lo)
    g = np.asarray(g_best, dtype=float)
    for p in swarm:
        r1 = rng.uniform()
        r2 = rng.uniform()
        v = (
            cfg.inertia * p.velocity
            + cfg.cognitive * r1 * (p.best_position - p.position)
            + cfg.social * r2 * (g - p.position)
        )
        v = np.clip(v, -v_max, v_max)
        x = np.clip(p.position + v, lo, hi)
        p.velocity = v
        p.position = x
        cost = calibration_cost(x, pairs)
        if cost < p.best_cost:
            p.best_cost = cost
            p.best_position = x.copy()
    return swarm


def calibrate_with_trace(pairs, cfg: PsoConfig | None = None):
    """Run the full PSO fit; also return the g_best cost after each iteration.

    The trace has ``iterations + 1`` entries, the first being the best
    initial particle. It is bit-identical across runs for a fixed seed,
    config and data, which makes determinism cheap to assert.
    """
    if cfg is None:
        cfg = PsoConfig()
    arr = _as_pairs(pairs)
    if arr.shape[0] < 2:
        raise InsufficientData("need at least 2 calibration pairs")
    if np.ptp(arr[:, 0]) < 1e-12:
        raise DegenerateData("raw depth values are all identical")

    rng = np.random.default_rng(cfg.seed)
    lo, hi = cfg.lower(), cfg.upper()
    swarm = []
    for _ in range(cfg.swarm_size):
        pos = lo + rng.uniform(size=2) * (hi - lo)
        cost = calibration_cost(pos, arr)
        swarm.append(Particle(pos, np.zeros(2), pos.copy(), cost))

    g_cost = min(p.best_cost for p in swarm)
    g_pos = next(p.best_position.copy() for p in swarm if p.best_cost == g_cost)
    trace = [g_cost]
    for _ in range(cfg.iterations):
        pso_step(swarm, g_pos, arr, cfg, rng)
        for p in swarm:
            if p.best_cost < g_cost:
                g_cost = p.best_cost
                g_pos = p.best_position.copy()
        trace.append(g_cost)
    return CalibrationParams(float(g_pos[0]), float(g_pos[1])), trace


def calibrate(pairs, cfg: PsoConfig | None = None) -> CalibrationParams:
    """Fit (scale, offset) to the pairs; see calibrate_with_trace."""
    params, _ = calibrate_with_trace(pairs, cfg)
    return params


def apply_calibration(params: CalibrationParams, raw: float) -> float:
    """Map one raw sensor reading to calibrated depth."""
    return float(params.scale * raw + params.offset)
