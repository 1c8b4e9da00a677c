"""Discrete-time Lyapunov guidance vector field for standoff loitering.

Given the UAV-minus-target planar offset, the field returns the desired
relative velocity; its integral curves spiral onto a circle of the desired
radius, traversed at the desired relative speed. Adding the target velocity
converts the field output into speed/heading commands for the controller.

Relative positions here are UAV minus target (opposite sign to the sensor
module's target-minus-UAV convention).
"""

from __future__ import annotations

from dataclasses import dataclass
import logging

import numpy as np

from .angles import wrap_pi
from .uav import ActuatorLimits

logger = logging.getLogger(__name__)

# Inside this radius the field direction is undefined (division by r);
# a fixed escape direction is returned instead.
ORIGIN_EPS = 1e-6


@dataclass
class LoiterSpec:
    """Desired orbit: radius (m) and relative tangential speed (m/s)."""

    radius: float
    speed: float

    def __post_init__(self):
        if self.radius <= 0.0 or self.speed <= 0.0:
            raise ValueError("loiter radius and speed must be positive")


@dataclass
class GuidanceCommand:
    """Desired UAV speed (m/s) and heading (rad, in [-pi, pi))."""

    speed: float
    heading: float


def check_feasibility(spec: LoiterSpec, tau: float, limits: ActuatorLimits) -> bool:
    """True iff the orbit rate fits the turn-rate envelope and the sampling
    frequency clears sqrt(3)/2 times the maximum turn rate (both strict)."""
    if tau <= 0.0:
        raise ValueError(f"sampling interval must be positive, got {tau}")
    return (
        spec.speed / spec.radius < limits.max_turn_rate
        and 1.0 / tau > np.sqrt(3.0) * limits.max_turn_rate / 2.0
    )


def lyapunov_field(rel, spec: LoiterSpec):
    """Desired relative velocity at a UAV-minus-target offset.

    Accepts a (2,) offset or an (..., 2) batch. The output always has
    magnitude equal to ``spec.speed``; offsets inside ORIGIN_EPS get a fixed
    unit escape direction (+x) at that speed.
    """
    rel = np.asarray(rel, dtype=float)
    rd = spec.radius
    rd2 = rd * rd
    if rel.ndim == 1:
        x, y = rel
        r2 = x * x + y * y
        r = np.sqrt(r2)
        if r < ORIGIN_EPS:
            return np.array([spec.speed, 0.0])
        prefix = -spec.speed / (r * (r2 + rd2))
        two_rd_r = 2.0 * rd * r
        return np.array([
            prefix * (x * (r2 - rd2) + y * two_rd_r),
            prefix * (y * (r2 - rd2) - x * two_rd_r),
        ])

    x, y = rel[..., 0], rel[..., 1]
    r2 = x * x + y * y
    r = np.sqrt(r2)
    safe_r = np.where(r < ORIGIN_EPS, 1.0, r)
    prefix = -spec.speed / (safe_r * (r2 + rd2))
    vx = prefix * (x * (r2 - rd2) + y * (2.0 * rd * safe_r))
    vy = prefix * (y * (r2 - rd2) - x * (2.0 * rd * safe_r))
    out = np.stack([vx, vy], axis=-1)
    out[r < ORIGIN_EPS] = np.array([spec.speed, 0.0])
    return out


def cos_alpha(rel, vel) -> float:
    """Cosine of the angle between the offset and a velocity vector."""
    rel = np.asarray(rel, dtype=float)
    vel = np.asarray(vel, dtype=float)
    nr = np.linalg.norm(rel)
    nv = np.linalg.norm(vel)
    if nr == 0.0 or nv == 0.0:
        raise ValueError("cos_alpha requires nonzero position and velocity vectors")
    return float(np.dot(rel, vel) / (nr * nv))


def desired_command(field_vel, gmt_vel, fallback_heading: float = 0.0) -> GuidanceCommand:
    """Convert field output plus target velocity into a speed/heading command.

    When the summed velocity vanishes the heading is undefined; the caller's
    fallback (normally the previous command) is kept.
    """
    total = np.asarray(gmt_vel, dtype=float) + np.asarray(field_vel, dtype=float)
    speed = float(np.linalg.norm(total))
    if speed == 0.0:
        return GuidanceCommand(0.0, wrap_pi(fallback_heading))
    return GuidanceCommand(speed, wrap_pi(float(np.arctan2(total[1], total[0]))))


def radial_iterate(r: float, spec: LoiterSpec, tau: float) -> float:
    """One step of the field's polar radial map.

    r' = r - v_d * tau * (r^2 - r_d^2) / (r^2 + r_d^2); the desired radius is
    its fixed point.
    """
    if r < 0.0:
        raise ValueError(f"radius must be nonnegative, got {r}")
    rd2 = spec.radius**2
    return r - spec.speed * tau * (r * r - rd2) / (r * r + rd2)


def log_feasibility(spec: LoiterSpec, tau: float, limits: ActuatorLimits) -> bool:
    """Run the feasibility check once and log the outcome; returns the verdict."""
    ok = check_feasibility(spec, tau, limits)
    if ok:
        logger.info(
            "guidance feasible: v_d/r_d=%.4g < %.4g, 1/tau=%.4g",
            spec.speed / spec.radius,
            limits.max_turn_rate,
            1.0 / tau,
        )
    else:
        logger.warning(
            "guidance INFEASIBLE: v_d/r_d=%.4g vs max turn rate %.4g, 1/tau=%.4g vs %.4g",
            spec.speed / spec.radius,
            limits.max_turn_rate,
            1.0 / tau,
            np.sqrt(3.0) * limits.max_turn_rate / 2.0,
        )
    return ok
