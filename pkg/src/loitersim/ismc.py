"""Discrete-time integral sliding-mode controller for the speed/heading
commands, with the gain conditions and steady-state error bound of its
stability analysis, plus PD and conventional-SMC baselines.

Channel order everywhere is [speed, heading]. Heading errors and heading
command differences are wrapped to [-pi, pi): both live on the circle, and
an unwrapped difference would inject a 2*pi spike at every crossing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .angles import wrap_pi
from .guidance import GuidanceCommand
from .uav import ControlInput, DisturbanceBounds, UavState

# Anti-windup clamp on the integral accumulator; far outside anything the
# nominal scenarios reach.
INTEGRAL_CLAMP = 1e4


@dataclass
class GainSet:
    """Diagonal controller gains: switching (W), reaching (M), integral (C)."""

    w_v: float
    w_psi: float
    m_v: float
    m_psi: float
    c_v: float
    c_psi: float

    def __post_init__(self):
        if min(self.w_v, self.w_psi, self.m_v, self.m_psi, self.c_v, self.c_psi) <= 0.0:
            raise ValueError("all controller gains must be positive")

    @property
    def switching(self) -> np.ndarray:
        return np.array([self.w_v, self.w_psi])

    @property
    def reaching(self) -> np.ndarray:
        return np.array([self.m_v, self.m_psi])

    @property
    def integral(self) -> np.ndarray:
        return np.array([self.c_v, self.c_psi])


#: Gains used throughout the reference experiments.
DEFAULT_GAINS = GainSet(w_v=0.2, w_psi=0.04, m_v=5.0, m_psi=0.6, c_v=5.0, c_psi=3.0)


@dataclass
class TrackingError:
    """Speed error (m/s) and wrapped heading error (rad)."""

    e_v: float
    e_psi: float

    def as_array(self) -> np.ndarray:
        return np.array([self.e_v, self.e_psi])


@dataclass
class ControllerState:
    """Per-episode controller memory; reset at episode start."""

    integral: np.ndarray = field(default_factory=lambda: np.zeros(2))
    prev_command: GuidanceCommand | None = None
    prev_error: np.ndarray | None = None


def tracking_error(uav: UavState, cmd: GuidanceCommand) -> TrackingError:
    """Actual minus commanded speed and heading (heading wrapped)."""
    return TrackingError(uav.v - cmd.speed, wrap_pi(uav.psi - cmd.heading))


def surface(err: TrackingError, state: ControllerState, integral_gain, tau: float) -> np.ndarray:
    """Integral sliding surface s = e + tau * C * sum(past errors).

    The accumulator holds the error sum up to (not including) this step and
    is advanced by the current error afterwards.
    """
    e = err.as_array()
    s = e + tau * np.asarray(integral_gain) * state.integral
    state.integral = np.clip(state.integral + e, -INTEGRAL_CLAMP, INTEGRAL_CLAMP)
    return s


def control(
    err: TrackingError, s, dcmd, gains: GainSet, tau: float
) -> ControlInput:
    """Sliding-mode law: -W sgn(s) - M s - C e + feedforward dcmd / tau."""
    u = (
        -gains.switching * np.sign(s)
        - gains.reaching * np.asarray(s)
        - gains.integral * err.as_array()
        + np.asarray(dcmd) / tau
    )
    return ControlInput(float(u[0]), float(u[1]))


def validate_gains(gains: GainSet, tau: float) -> tuple[bool, list[str]]:
    """Check the stability conditions 0 < c < 1/tau and 0 < m < 1/tau (strict).

    Returns the verdict plus one diagnostic line per violated condition.
    """
    if tau <= 0.0:
        raise ValueError(f"sampling interval must be positive, got {tau}")
    limit = 1.0 / tau
    problems = []
    for name, value in (
        ("c_v", gains.c_v),
        ("c_psi", gains.c_psi),
        ("m_v", gains.m_v),
        ("m_psi", gains.m_psi),
    ):
        if not 0.0 < value < limit:
            problems.append(f"{name}={value} outside (0, 1/tau={limit})")
    return (not problems), problems


def error_bound(gains: GainSet, bounds: DisturbanceBounds, tau: float) -> np.ndarray:
    """Guaranteed steady-state tracking-error bound per channel:
    4 * w / (c * (2 - tau * m))."""
    ok, problems = validate_gains(gains, tau)
    if not ok:
        raise ValueError("gains violate stability conditions: " + "; ".join(problems))
    w = np.array([bounds.accel, bounds.turn_rate])
    return 4.0 * w / (gains.integral * (2.0 - tau * gains.reaching))


def pd_baseline(
    err: TrackingError, prev_err, dcmd, kp, kd, tau: float
) -> ControlInput:
    """Proportional-derivative baseline: -kp e - kd (e - e_prev)/tau + dcmd/tau."""
    e = err.as_array()
    de = (e - np.asarray(prev_err)) / tau
    u = -np.asarray(kp) * e - np.asarray(kd) * de + np.asarray(dcmd) / tau
    return ControlInput(float(u[0]), float(u[1]))


def smc_baseline(err: TrackingError, s, dcmd, switching, tau: float) -> ControlInput:
    """Conventional SMC baseline: constant reaching law -W sgn(s) on the
    non-integral surface s = e, plus the same feedforward."""
    del err  # the non-integral surface is the error itself
    u = -np.asarray(switching) * np.sign(s) + np.asarray(dcmd) / tau
    return ControlInput(float(u[0]), float(u[1]))


def _command_delta(cmd: GuidanceCommand, prev: GuidanceCommand | None) -> np.ndarray:
    """Backward difference of the command; zero on the first step."""
    if prev is None:
        return np.zeros(2)
    return np.array([cmd.speed - prev.speed, wrap_pi(cmd.heading - prev.heading)])


class IsmcController:
    """Stateful wrapper running the sliding-mode law at the command rate."""

    def __init__(self, gains: GainSet, tau: float):
        self.gains = gains
        self.tau = tau
        self.state = ControllerState()

    def reset(self) -> None:
        self.state = ControllerState()

    def step(self, uav: UavState, cmd: GuidanceCommand):
        """Returns (input, error, surface) for logging."""
        err = tracking_error(uav, cmd)
        s = surface(err, self.state, self.gains.integral, self.tau)
        dcmd = _command_delta(cmd, self.state.prev_command)
        self.state.prev_command = cmd
        return control(err, s, dcmd, self.gains, self.tau), err, s


class PdController:
    """PD baseline with the same feedforward as the sliding-mode law.

    Default gains are a conservative textbook tuning of the double error
    channel; the comparison scenarios measure settling against them.
    """

    def __init__(self, kp=(0.5, 0.5), kd=(0.1, 0.1), tau: float = 0.04):
        self.kp = np.asarray(kp, dtype=float)
        self.kd = np.asarray(kd, dtype=float)
        self.tau = tau
        self.state = ControllerState()

    def reset(self) -> None:
        self.state = ControllerState()

    def step(self, uav: UavState, cmd: GuidanceCommand):
        err = tracking_error(uav, cmd)
        prev = self.state.prev_error if self.state.prev_error is not None else err.as_array()
        dcmd = _command_delta(cmd, self.state.prev_command)
        u = pd_baseline(err, prev, dcmd, self.kp, self.kd, self.tau)
        self.state.prev_error = err.as_array()
        self.state.prev_command = cmd
        return u, err, err.as_array()


class SmcController:
    """Conventional SMC baseline (surface = error, constant reaching law)."""

    def __init__(self, switching=None, tau: float = 0.04):
        self.switching = (
            DEFAULT_GAINS.switching if switching is None else np.asarray(switching, dtype=float)
        )
        self.tau = tau
        self.state = ControllerState()

    def reset(self) -> None:
        self.state = ControllerState()

    def step(self, uav: UavState, cmd: GuidanceCommand):
        err = tracking_error(uav, cmd)
        s = err.as_array()
        dcmd = _command_delta(cmd, self.state.prev_command)
        self.state.prev_command = cmd
        return smc_baseline(err, s, dcmd, self.switching, self.tau), err, s
