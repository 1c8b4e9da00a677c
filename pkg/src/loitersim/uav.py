"""Discrete-time unicycle UAV plant with bounded input disturbance and
turn-rate saturation.

The position update is the exact zero-order-hold integral of the planar
unicycle (x' = v cos psi, y' = v sin psi) under constant perturbed inputs
over one sampling interval, so no integration error is introduced at any
step size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .angles import wrap_pi

# Below this commanded turn rate the closed-form update degenerates (two
# divisions by the turn rate); switch to its analytic zero-rate limit.
TURN_RATE_EPS = 1e-6


@dataclass
class UavState:
    """Planar pose: position (m), forward speed (m/s), heading (rad) in [-pi, pi)."""

    x: float
    y: float
    v: float
    psi: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.v, self.psi], dtype=float)


@dataclass
class ControlInput:
    """Commanded acceleration (m/s^2) and turn rate (rad/s)."""

    accel: float
    turn_rate: float


@dataclass
class DisturbanceBounds:
    """Hard bounds on the additive input disturbance per channel."""

    accel: float
    turn_rate: float

    def __post_init__(self):
        if self.accel < 0.0 or self.turn_rate < 0.0:
            raise ValueError("disturbance bounds must be nonnegative")


@dataclass
class ActuatorLimits:
    """Actuator envelope; only the turn rate is limited."""

    max_turn_rate: float

    def __post_init__(self):
        if self.max_turn_rate <= 0.0:
            raise ValueError("max_turn_rate must be positive")


def saturate(command: ControlInput, limits: ActuatorLimits) -> ControlInput:
    """Clamp the turn-rate command to the actuator envelope; acceleration passes through."""
    turn = float(np.clip(command.turn_rate, -limits.max_turn_rate, limits.max_turn_rate))
    return ControlInput(command.accel, turn)


def step_uav(state: UavState, command: ControlInput, disturbance, tau: float) -> UavState:
    """Advance the UAV one step under perturbed inputs u + w.

    Args:
        state: current pose.
        command: applied (already saturated) input.
        disturbance: (2,) additive input disturbance [accel, turn_rate].
        tau: sampling interval (s), > 0.

    Returns:
        Next pose with heading wrapped to [-pi, pi).
    """
    if tau <= 0.0:
        raise ValueError(f"sampling interval must be positive, got {tau}")
    w = np.asarray(disturbance, dtype=float)
    a = command.accel + w[0]
    omega = command.turn_rate + w[1]
    v, psi = state.v, state.psi

    if abs(omega) < TURN_RATE_EPS:
        # Zero-turn-rate limit: straight-line motion with constant acceleration.
        arc = v * tau + 0.5 * a * tau**2
        x = state.x + arc * np.cos(psi)
        y = state.y + arc * np.sin(psi)
    else:
        half = 0.5 * omega * tau
        psi_end = psi + omega * tau
        sin_half = np.sin(half)
        x = state.x + (
            v * 2.0 * np.cos(psi + half) * sin_half
            + a * tau * np.sin(psi_end)
            + (a / omega) * (-2.0 * np.sin(psi + half) * sin_half)
        ) / omega
        y = state.y + (
            2.0 * v * np.sin(psi + half) * sin_half
            - a * tau * np.cos(psi_end)
            + (a / omega) * (2.0 * np.cos(psi + half) * sin_half)
        ) / omega

    return UavState(float(x), float(y), v + a * tau, wrap_pi(psi + omega * tau))


def sample_bounded_disturbance(
    bounds: DisturbanceBounds,
    sigma_accel: float,
    sigma_turn_rate: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Truncated-Gaussian disturbance draw, one value per input channel.

    Each channel is N(0, sigma^2) redrawn (rejection) until it lies inside
    the hard bound, so the bound holds exactly on every sample.
    """
    if sigma_accel < 0.0 or sigma_turn_rate < 0.0:
        raise ValueError("disturbance sigmas must be nonnegative")
    out = np.zeros(2)
    for i, (sigma, bound) in enumerate(
        ((sigma_accel, bounds.accel), (sigma_turn_rate, bounds.turn_rate))
    ):
        if sigma == 0.0 or bound == 0.0:
            continue
        draw = rng.normal(0.0, sigma)
        while abs(draw) > bound:
            draw = rng.normal(0.0, sigma)
        out[i] = draw
    return out
