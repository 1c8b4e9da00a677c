"""Camera and radar measurement models with frame transforms, analytic
Jacobians, gimbal pointing, and noisy capture.

Frame conventions. The inertial frame used for sensor geometry has its
z-axis pointing DOWN (aero convention): a UAV flying at altitude h sits at
inertial z = -h, and a ground target below it has positive relative z. With
this choice the gimbal pitch range [0, pi/2] covers horizon-to-nadir and
the measurement Jacobian with respect to the target state is the frame
rotation itself. Relative positions here are target minus UAV (opposite
sign to the guidance module's UAV-minus-target offsets).

The camera sits on a yaw-then-pitch gimbal; its x-axis is the optical axis
and points at the target when the gimbal is ideally pointed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import logging

import numpy as np

from .linalg import psd_sqrt
from .uav import UavState

logger = logging.getLogger(__name__)

# A target closer to the image plane than this (camera-frame x) cannot be
# projected.
IMAGE_PLANE_EPS = 1e-6


class InvalidMeasurement(ValueError):
    """Raised when a measurement model is evaluated at a degenerate point."""


@dataclass
class CameraModel:
    """Pinhole camera: focal length, 2x2 image-noise covariance, sample rate."""

    focal: float = 0.05
    noise_cov: np.ndarray = field(default_factory=lambda: np.diag([0.03**2, 0.03**2]))
    rate_hz: float = 25.0

    def __post_init__(self):
        if self.focal <= 0.0:
            raise ValueError("focal length must be positive")
        if self.rate_hz <= 0.0:
            raise ValueError("sample rate must be positive")
        self.noise_cov = np.asarray(self.noise_cov, dtype=float)
        self._noise_transform = psd_sqrt(self.noise_cov, "camera noise covariance")


@dataclass
class RadarModel:
    """Range/azimuth radar: 2x2 noise covariance (m, rad) and sample rate."""

    noise_cov: np.ndarray = field(default_factory=lambda: np.diag([2.0**2, 0.01**2]))
    rate_hz: float = 10.0

    def __post_init__(self):
        if self.rate_hz <= 0.0:
            raise ValueError("sample rate must be positive")
        self.noise_cov = np.asarray(self.noise_cov, dtype=float)
        self._noise_transform = psd_sqrt(self.noise_cov, "radar noise covariance")


@dataclass
class GimbalAngles:
    """Gimbal pitch in [0, pi/2] (0 = horizon, pi/2 = nadir) and yaw in [-pi, pi)."""

    pitch: float
    yaw: float


@dataclass
class Measurement:
    """One sensor reading: 2-vector of values, sensor kind, capture step."""

    values: np.ndarray
    kind: str
    timestamp: int


def camera_project(p_cam, focal: float) -> np.ndarray:
    """Pinhole projection (b, c) = (focal / x) * (y, z) of camera-frame points.

    Accepts (3,) or (..., 3); raises InvalidMeasurement if any point lies on
    or behind the image plane (x <= IMAGE_PLANE_EPS).
    """
    p = np.asarray(p_cam, dtype=float)
    x = p[..., 0]
    if np.any(x <= IMAGE_PLANE_EPS):
        raise InvalidMeasurement("point on or behind the camera image plane")
    return focal * p[..., 1:] / x[..., None]


def camera_jacobian(p_cam, focal: float) -> np.ndarray:
    """Jacobian of camera_project with respect to the camera-frame point;
    (..., 2, 3) = (focal / x^2) * [[-y, x, 0], [-z, 0, x]]."""
    p = np.asarray(p_cam, dtype=float)
    x = p[..., 0]
    if np.any(x <= IMAGE_PLANE_EPS):
        raise InvalidMeasurement("point on or behind the camera image plane")
    jac = np.zeros(p.shape[:-1] + (2, 3))
    scale = focal / (x * x)
    jac[..., 0, 0] = -p[..., 1] * scale
    jac[..., 0, 1] = x * scale
    jac[..., 1, 0] = -p[..., 2] * scale
    jac[..., 1, 2] = x * scale
    return jac


def radar_measure(p) -> np.ndarray:
    """Range and azimuth (d, phi) of inertial-frame relative positions.

    Accepts (3,) or (..., 3); azimuth uses the four-quadrant arctangent.
    Raises InvalidMeasurement at the origin or on the vertical axis (azimuth
    undefined).
    """
    pt = np.asarray(p, dtype=float)
    d = np.linalg.norm(pt, axis=-1)
    planar = np.hypot(pt[..., 0], pt[..., 1])
    if np.any(d == 0.0) or np.any(planar == 0.0):
        raise InvalidMeasurement("radar measurement undefined on the vertical axis")
    return np.stack([d, np.arctan2(pt[..., 1], pt[..., 0])], axis=-1)


def radar_jacobian(p) -> np.ndarray:
    """Jacobian of radar_measure with respect to the relative position;
    (..., 2, 3) = [[x/d, y/d, z/d], [-y/rho^2, x/rho^2, 0]]."""
    pt = np.asarray(p, dtype=float)
    d = np.linalg.norm(pt, axis=-1)
    rho2 = pt[..., 0] ** 2 + pt[..., 1] ** 2
    if np.any(d == 0.0) or np.any(rho2 == 0.0):
        raise InvalidMeasurement("radar Jacobian undefined on the vertical axis")
    jac = np.zeros(pt.shape[:-1] + (2, 3))
    jac[..., 0, :] = pt / d[..., None]
    jac[..., 1, 0] = -pt[..., 1] / rho2
    jac[..., 1, 1] = pt[..., 0] / rho2
    return jac


def inertial_to_body(heading: float) -> np.ndarray:
    """Rotation taking inertial coordinates to the UAV body frame (yaw only,
    constant-altitude flight)."""
    c, s = np.cos(heading), np.sin(heading)
    return np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])


def body_to_camera(gimbal: GimbalAngles) -> np.ndarray:
    """Rotation taking body coordinates to the camera frame: yaw about the
    body z-axis, then pitch about the intermediate y-axis."""
    ct, st = np.cos(gimbal.pitch), np.sin(gimbal.pitch)
    cp, sp = np.cos(gimbal.yaw), np.sin(gimbal.yaw)
    pitch = np.array([[ct, 0.0, st], [0.0, 1.0, 0.0], [-st, 0.0, ct]])
    yaw = np.array([[cp, sp, 0.0], [-sp, cp, 0.0], [0.0, 0.0, 1.0]])
    return pitch @ yaw


def inertial_to_camera(heading: float, gimbal: GimbalAngles) -> np.ndarray:
    """Full chain: inertial -> body -> camera."""
    return body_to_camera(gimbal) @ inertial_to_body(heading)


def relative_position(target_xyz, uav: UavState, altitude: float) -> np.ndarray:
    """Target-minus-UAV offset in the down-positive inertial frame.

    ``target_xyz`` carries the target's own z coordinate (terrain
    fluctuation); the UAV sits at inertial z = -altitude.
    """
    t = np.asarray(target_xyz, dtype=float)
    return np.array([t[0] - uav.x, t[1] - uav.y, t[2] + altitude])


def _gimbal_from_body(b: np.ndarray) -> GimbalAngles:
    """Pointing angles for a body-frame target direction (see point_gimbal)."""
    yaw = float(np.arctan2(b[1], b[0]))
    pitch = float(np.arctan2(b[2], np.hypot(b[0], b[1])))
    if not 0.0 <= pitch <= np.pi / 2.0:
        clamped = float(np.clip(pitch, 0.0, np.pi / 2.0))
        logger.warning("gimbal pitch %.4f rad outside [0, pi/2]; clamped to %.4f", pitch, clamped)
        pitch = clamped
    return GimbalAngles(pitch, yaw)


def point_gimbal(uav: UavState, altitude: float, target_xyz) -> GimbalAngles:
    """Gimbal angles that put the target on the camera's optical axis.

    The ideal pitch is clamped into [0, pi/2] (and the clamp logged) when the
    target sits above the horizon or past nadir singularities.
    """
    rel = relative_position(target_xyz, uav, altitude)
    if np.linalg.norm(rel) == 0.0:
        raise InvalidMeasurement("cannot point gimbal at a coincident target")
    return _gimbal_from_body(inertial_to_body(uav.psi) @ rel)


@dataclass
class CameraContext:
    """Geometry snapshot a camera measurement was taken under, as needed by
    the filter: UAV position (down-frame), full rotation chain, intrinsics."""

    uav_xyz: np.ndarray
    c_ci: np.ndarray
    focal: float
    noise_cov: np.ndarray

    kind = "camera"
    #: which measurement channels are angles (innovations need wrapping)
    angle_channels = np.array([False, False])

    def predict(self, means: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Noise-free measurement of (n, 5) state means; also returns the
        per-row validity mask (target in front of the image plane)."""
        rel = means[:, :3] - self.uav_xyz
        cam = rel @ self.c_ci.T
        x = cam[:, 0]
        valid = x > IMAGE_PLANE_EPS
        safe_x = np.where(valid, x, 1.0)
        return self.focal * cam[:, 1:] / safe_x[:, None], valid

    def jacobian(self, means: np.ndarray) -> np.ndarray:
        """(n, 2, 5) measurement Jacobian; velocity columns are zero."""
        rel = means[:, :3] - self.uav_xyz
        cam = rel @ self.c_ci.T
        x = np.where(cam[:, 0] > IMAGE_PLANE_EPS, cam[:, 0], 1.0)
        jac_cam = np.zeros((means.shape[0], 2, 3))
        scale = self.focal / (x * x)
        jac_cam[:, 0, 0] = -cam[:, 1] * scale
        jac_cam[:, 0, 1] = x * scale
        jac_cam[:, 1, 0] = -cam[:, 2] * scale
        jac_cam[:, 1, 2] = x * scale
        chain = np.zeros((3, 5))
        chain[:, :3] = self.c_ci
        return jac_cam @ chain


@dataclass
class RadarContext:
    """Geometry snapshot for a radar measurement (range/azimuth)."""

    uav_xyz: np.ndarray
    noise_cov: np.ndarray

    kind = "radar"
    angle_channels = np.array([False, True])

    def predict(self, means: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        rel = means[:, :3] - self.uav_xyz
        d = np.linalg.norm(rel, axis=1)
        planar = np.hypot(rel[:, 0], rel[:, 1])
        valid = (d > 0.0) & (planar > 0.0)
        vals = np.stack(
            [d, np.arctan2(rel[:, 1], np.where(planar > 0.0, rel[:, 0], 1.0))], axis=-1
        )
        return vals, valid

    def jacobian(self, means: np.ndarray) -> np.ndarray:
        rel = means[:, :3] - self.uav_xyz
        d = np.linalg.norm(rel, axis=1)
        rho2 = rel[:, 0] ** 2 + rel[:, 1] ** 2
        d = np.where(d > 0.0, d, 1.0)
        rho2 = np.where(rho2 > 0.0, rho2, 1.0)
        jac = np.zeros((means.shape[0], 2, 5))
        jac[:, 0, :3] = rel / d[:, None]
        jac[:, 1, 0] = -rel[:, 1] / rho2
        jac[:, 1, 1] = rel[:, 0] / rho2
        return jac


SensorContext = CameraContext | RadarContext


def uav_inertial_position(uav: UavState, altitude: float) -> np.ndarray:
    """UAV position in the down-positive inertial frame."""
    return np.array([uav.x, uav.y, -altitude])


def measure(
    kind: str,
    target_xyz,
    uav: UavState,
    altitude: float,
    model: CameraModel | RadarModel,
    timestamp: int,
    rng: np.random.Generator | None,
) -> tuple[Measurement, SensorContext] | None:
    """Capture one noisy measurement of the true target position.

    The camera path points the gimbal at the target (ideal servo, the target
    is assumed kept in the field of view), then projects. Returns None when
    the geometry is degenerate (projection invalid); the caller drops the
    measurement. ``rng=None`` yields the noise-free measurement.
    """
    rel = relative_position(target_xyz, uav, altitude)
    uav_xyz = uav_inertial_position(uav, altitude)
    if kind == "camera":
        if np.linalg.norm(rel) == 0.0:
            logger.warning("camera measurement dropped: coincident target at step %d", timestamp)
            return None
        c_ai = inertial_to_body(uav.psi)
        body = c_ai @ rel
        gimbal = _gimbal_from_body(body)
        c_ca = body_to_camera(gimbal)
        c_ci = c_ca @ c_ai
        cam = c_ca @ body
        if cam[0] <= IMAGE_PLANE_EPS:
            logger.warning("camera measurement dropped: target behind image plane at step %d",
                           timestamp)
            return None
        values = camera_project(cam, model.focal)
        ctx = CameraContext(uav_xyz, c_ci, model.focal, model.noise_cov)
    elif kind == "radar":
        if np.linalg.norm(rel) == 0.0 or np.hypot(rel[0], rel[1]) == 0.0:
            logger.warning("radar measurement dropped: degenerate geometry at step %d", timestamp)
            return None
        values = radar_measure(rel)
        ctx = RadarContext(uav_xyz, model.noise_cov)
    else:
        raise ValueError(f"unknown sensor kind {kind!r}")
    if rng is not None:
        values = values + model._noise_transform @ rng.standard_normal(2)
    return Measurement(values, kind, timestamp), ctx
