"""Marker-position estimators and sensor-stream synchronization.

Two independent estimators recover the underwater marker's world
position from a single camera frame plus surface-vehicle state:

- ``cpnp`` (transform chain): a planar PnP solve yields the tag pose in
  the camera frame, which is mapped through the camera-in-body and
  body-in-world transforms.
- ``cd`` (ray/depth plane): the tag's center pixel is back-projected
  into a world-frame line and intersected with the horizontal plane at
  the calibrated marker depth. No PnP solve, so pixel noise enters only
  through the ray direction, and the z channel is the depth reading
  itself.

``SensorSynchronizer`` keeps the most recent sample per stream and
bundles them at a query time with per-source staleness; the
``EstimationPipeline`` drives everything from a time-ordered record
stream.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .attitude import ImuSample, TiltConfig, TiltTracker
from .camera import (
    Intrinsics,
    TagGeometry,
    TagObservation,
    back_project,
    solve_pnp_planar,
    tag_center_pixel,
)
from .depth_calibration import IDENTITY_CALIBRATION, CalibrationParams, apply_calibration
from .errors import AquaposError, NoSampleYet, StaleSensor
from .geometry import (
    RigidTransform,
    compose,
    euler_zyx_to_rotation,
    intersect_with_zplane,
    line_from_points,
    transform_point,
)

log = logging.getLogger(__name__)

DEFAULT_STALENESS_BOUND = 0.2  # seconds

METHODS = ("cpnp", "cd")


@dataclass(frozen=True)
class RigExtrinsics:
    """Static surface-vehicle geometry: camera mount and hull height.

    ``body_height`` is the z of the body origin above the water datum;
    it enters the chain as the fixed z component of the body-in-world
    translation.
    """

    camera_in_body: RigidTransform
    body_height: float

    def __post_init__(self):
        if not np.isfinite(self.body_height):
            raise ValueError("body_height must be finite")


@dataclass(frozen=True)
class SurfacePoseState:
    """Planar pose from SLAM fused with the tilt filter's roll/pitch."""

    timestamp: float
    x: float
    y: float
    yaw: float
    roll: float = 0.0
    pitch: float = 0.0

    def __post_init__(self):
        vals = (self.timestamp, self.x, self.y, self.yaw, self.roll, self.pitch)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError("pose fields must be finite")
        if abs(self.pitch) >= np.pi / 2:
            raise ValueError("pitch must satisfy |pitch| < pi/2")


@dataclass(frozen=True)
class DepthMeasurement:
    """Calibrated marker depth, metres, positive down."""

    timestamp: float
    depth: float

    def __post_init__(self):
        if not (np.isfinite(self.timestamp) and np.isfinite(self.depth)):
            raise ValueError("depth measurement must be finite")
        if self.depth < 0:
            raise ValueError("depth is positive-down and cannot be negative")


@dataclass(frozen=True)
class SensorFrameBundle:
    """Latest sample from each stream at a reference time."""

    timestamp: float
    pose: SurfacePoseState | None
    tag: TagObservation | None
    depth: DepthMeasurement | None
    staleness: dict

    def __post_init__(self):
        for name, value in self.staleness.items():
            if value < 0:
                raise ValueError(f"negative staleness for {name}")


@dataclass(frozen=True)
class PositionEstimate:
    """One world-frame marker position with method diagnostics."""

    timestamp: float
    position: np.ndarray
    method: str
    roll: float = 0.0
    pitch: float = 0.0
    reproj_rms: float | None = None
    ray_k: float | None = None
    staleness: dict | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        p = np.asarray(self.position, dtype=float)
        if p.shape != (3,) or not np.all(np.isfinite(p)):
            raise ValueError("position must be a finite 3-vector")
        object.__setattr__(self, "position", p)


def default_rig() -> RigExtrinsics:
    """Bench rig: camera 10 cm ahead of the body origin, 2 cm below it,
    rolled half a turn to look straight down; hull rides 5 cm above the
    water datum."""
    rotation = euler_zyx_to_rotation(0.0, 0.0, np.pi)
    camera_in_body = RigidTransform(rotation, np.array([0.10, 0.0, -0.02]))
    return RigExtrinsics(camera_in_body, body_height=0.05)


def build_body_to_world(pose: SurfacePoseState, rig: RigExtrinsics) -> RigidTransform:
    """Body-in-world transform from SLAM x/y/yaw, filter tilt, hull height."""
    rotation = euler_zyx_to_rotation(pose.yaw, pose.pitch, pose.roll)
    return RigidTransform(rotation, np.array([pose.x, pose.y, rig.body_height]))


def _check_fresh(bundle: SensorFrameBundle, sources, bound: float):
    for name in sources:
        sample = getattr(bundle, name)
        if sample is None:
            raise StaleSensor(f"no {name} sample in bundle")
        staleness = bundle.staleness.get(name, 0.0)
        if staleness > bound:
            raise StaleSensor(
                f"{name} is {staleness:.3f}s old, bound is {bound:.3f}s"
            )


def estimate_cpnp(
    bundle: SensorFrameBundle,
    rig: RigExtrinsics,
    intrinsics: Intrinsics,
    geom: TagGeometry,
    staleness_bound: float = DEFAULT_STALENESS_BOUND,
    marker_offset=None,
) -> PositionEstimate:
    """Full transform-chain estimate from the four tag corners.

    ``marker_offset`` is an optional lever arm in the marker frame,
    applied through the recovered tag orientation; by default the tag
    origin itself is reported.
    """
    _check_fresh(bundle, ("pose", "tag"), staleness_bound)
    tag_pose = solve_pnp_planar(intrinsics, geom, bundle.tag)
    camera_to_world = compose(build_body_to_world(bundle.pose, rig), rig.camera_in_body)
    if marker_offset is None:
        position = transform_point(camera_to_world, tag_pose.transform.translation)
    else:
        position = transform_point(
            compose(camera_to_world, tag_pose.transform),
            np.asarray(marker_offset, dtype=float),
        )
    return PositionEstimate(
        bundle.timestamp,
        position,
        "cpnp",
        roll=bundle.pose.roll,
        pitch=bundle.pose.pitch,
        reproj_rms=tag_pose.reproj_rms,
        staleness=dict(bundle.staleness),
    )


def estimate_cd(
    bundle: SensorFrameBundle,
    rig: RigExtrinsics,
    intrinsics: Intrinsics,
    staleness_bound: float = DEFAULT_STALENESS_BOUND,
    marker_offset=None,
) -> PositionEstimate:
    """Ray/depth-plane estimate from the tag center pixel.

    The z channel is taken from the depth sensor, so the result's z is
    exactly ``-depth``. Without a PnP solve the marker orientation is
    unknown, hence only the vertical component of ``marker_offset`` can
    be compensated (it shifts the intersection plane).
    """
    _check_fresh(bundle, ("pose", "tag", "depth"), staleness_bound)
    camera_to_world = compose(build_body_to_world(bundle.pose, rig), rig.camera_in_body)
    camera_origin = camera_to_world.translation
    center_world = transform_point(
        camera_to_world, back_project(intrinsics, tag_center_pixel(bundle.tag))
    )
    line = line_from_points(camera_origin, center_world)
    plane_z = -bundle.depth.depth
    if marker_offset is not None:
        plane_z = plane_z + float(np.asarray(marker_offset, dtype=float)[2])
    position = intersect_with_zplane(line, plane_z)
    k = (plane_z - line.point[2]) / line.direction[2]
    return PositionEstimate(
        bundle.timestamp,
        position,
        "cd",
        roll=bundle.pose.roll,
        pitch=bundle.pose.pitch,
        ray_k=float(k),
        staleness=dict(bundle.staleness),
    )


class SensorSynchronizer:
    """Latest-sample-per-stream buffer with staleness bookkeeping.

    Streams must be pushed in non-decreasing time order, and queries must
    not precede already-pushed samples; both hold by construction when
    replaying a time-ordered dataset.
    """

    _STREAMS = ("pose", "tag", "depth")

    def __init__(self):
        self._latest = {name: None for name in self._STREAMS}

    def _push(self, stream: str, sample):
        prev = self._latest[stream]
        if prev is not None and sample.timestamp < prev.timestamp:
            raise ValueError(f"{stream} timestamps must be non-decreasing")
        self._latest[stream] = sample

    def push_pose(self, pose: SurfacePoseState):
        self._push("pose", pose)

    def push_tag(self, tag: TagObservation):
        self._push("tag", tag)

    def push_depth(self, depth: DepthMeasurement):
        self._push("depth", depth)

    def synchronize(self, t: float, require=_STREAMS) -> SensorFrameBundle:
        """Bundle the latest sample of each stream as of time t."""
        found = {}
        staleness = {}
        for name in self._STREAMS:
            sample = self._latest[name]
            if sample is None:
                if name in require:
                    raise NoSampleYet(f"no {name} sample yet")
                continue
            if sample.timestamp > t:
                raise ValueError("query time precedes a pushed sample")
            found[name] = sample
            staleness[name] = t - sample.timestamp
        return SensorFrameBundle(
            t, found.get("pose"), found.get("tag"), found.get("depth"), staleness
        )


class EstimationPipeline:
    """Turns a time-ordered record stream into position estimates.

    IMU records drive the tilt filter; SLAM records become poses stamped
    with the filter's current tilt (zero until the first IMU sample);
    depth records pass through the affine calibration; tag records
    trigger one estimate per configured method. Records that fail
    validation or estimators that fail on a frame are counted, not
    raised, so one bad frame cannot abort a replay.
    """

    def __init__(
        self,
        rig: RigExtrinsics,
        intrinsics: Intrinsics,
        tag_geometry: TagGeometry,
        calibration: CalibrationParams = IDENTITY_CALIBRATION,
        tilt_config: TiltConfig | None = None,
        methods=METHODS,
        staleness_bound: float = DEFAULT_STALENESS_BOUND,
        marker_offset=None,
    ):
        for m in methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}")
        self.rig = rig
        self.intrinsics = intrinsics
        self.tag_geometry = tag_geometry
        self.calibration = calibration
        self.methods = tuple(methods)
        self.staleness_bound = staleness_bound
        self.marker_offset = marker_offset
        self.tracker = TiltTracker(tilt_config)
        self.sync = SensorSynchronizer()
        self.counters = {
            "imu_rejected": 0,
            "depth_rejected": 0,
            "cpnp_skipped": 0,
            "cd_skipped": 0,
        }

    def _current_tilt(self):
        state = self.tracker.state
        if state is None:
            return 0.0, 0.0
        return state.roll, state.pitch

    def process(self, record: dict) -> list:
        """Consume one dataset record; returns estimates it produced."""
        t = float(record["t"])
        kind = record["kind"]
        if kind == "imu":
            try:
                self.tracker.feed(ImuSample(t, record["gyro"], record["accel"]))
            except (ValueError, AquaposError):
                self.counters["imu_rejected"] += 1
            return []
        if kind == "slam":
            roll, pitch = self._current_tilt()
            self.sync.push_pose(
                SurfacePoseState(
                    t, record["x"], record["y"], record["yaw"], roll, pitch
                )
            )
            return []
        if kind == "depth":
            depth = apply_calibration(self.calibration, record["raw"])
            try:
                self.sync.push_depth(DepthMeasurement(t, depth))
            except ValueError:
                self.counters["depth_rejected"] += 1
            return []
        if kind == "truth":
            return []
        if kind == "tag":
            self.sync.push_tag(TagObservation(t, record["corners"]))
            estimates = []
            for method in self.methods:
                try:
                    if method == "cpnp":
                        bundle = self.sync.synchronize(t, require=("pose", "tag"))
                        estimates.append(
                            estimate_cpnp(
                                bundle,
                                self.rig,
                                self.intrinsics,
                                self.tag_geometry,
                                self.staleness_bound,
                                self.marker_offset,
                            )
                        )
                    else:
                        bundle = self.sync.synchronize(t)
                        estimates.append(
                            estimate_cd(
                                bundle,
                                self.rig,
                                self.intrinsics,
                                self.staleness_bound,
                                self.marker_offset,
                            )
                        )
                except AquaposError as exc:
                    self.counters[f"{method}_skipped"] += 1
                    log.debug("t=%.3f: %s skipped (%s)", t, method, exc)
            return estimates
        raise ValueError(f"unknown record kind {kind!r}")
