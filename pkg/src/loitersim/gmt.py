"""Ground-moving-target model: double-integrator kinematics driven by a
finite-state Markov maneuver chain, plus Gaussian input/terrain noise.

State vector: [x, y, z, vx, vy] (positions in m, planar velocities in m/s).
The maneuver chain selects a planar acceleration from a mode table; the
z channel carries only terrain fluctuation noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import psd_sqrt

STATE_DIM = 5

_ROW_SUM_TOL = 1e-12
_PSD_TOL = 1e-12


@dataclass
class GmtState:
    """Target state: planar position/velocity plus terrain height."""

    x: float
    y: float
    z: float
    vx: float
    vy: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z, self.vx, self.vy], dtype=float)

    @classmethod
    def from_array(cls, arr) -> "GmtState":
        x, y, z, vx, vy = np.asarray(arr, dtype=float)
        return cls(x, y, z, vx, vy)


@dataclass
class ManeuverModel:
    """Mode acceleration table plus Markov transition matrix.

    Args:
        modes: (m, 2) planar accelerations, one row per maneuver mode [m/s^2].
        transition: (m, m) row-stochastic transition matrix.
        initial_mode: starting mode index (0-based).
    """

    modes: np.ndarray
    transition: np.ndarray
    initial_mode: int = 0

    def __post_init__(self):
        self.modes = np.atleast_2d(np.asarray(self.modes, dtype=float))
        self.transition = np.atleast_2d(np.asarray(self.transition, dtype=float))
        m = self.modes.shape[0]
        if m < 1 or self.modes.shape[1] != 2:
            raise ValueError(f"mode table must be (m, 2) with m >= 1, got {self.modes.shape}")
        if self.transition.shape != (m, m):
            raise ValueError(
                f"transition matrix shape {self.transition.shape} does not match {m} modes"
            )
        if np.any(self.transition < 0.0) or np.any(self.transition > 1.0):
            raise ValueError("transition probabilities must lie in [0, 1]")
        row_sums = self.transition.sum(axis=1)
        if np.any(np.abs(row_sums - 1.0) > _ROW_SUM_TOL):
            raise ValueError(f"transition rows must sum to 1, got {row_sums}")
        if not 0 <= self.initial_mode < m:
            raise ValueError(f"initial_mode {self.initial_mode} out of range for {m} modes")
        # Cached cumulative rows for inverse-CDF sampling.
        self._cum = np.cumsum(self.transition, axis=1)

    @property
    def n_modes(self) -> int:
        return self.modes.shape[0]


@dataclass
class GmtNoiseModel:
    """Process noise covariance for [ax, ay, vz] channels (3x3 PSD)."""

    covariance: np.ndarray
    _transform: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        q = np.asarray(self.covariance, dtype=float)
        if q.shape != (3, 3):
            raise ValueError(f"covariance must be 3x3, got {q.shape}")
        self.covariance = 0.5 * (q + q.T) if np.allclose(q, q.T, atol=_PSD_TOL, rtol=0) else q
        # psd_sqrt validates symmetry/PSD and handles singular (zero-channel) cases.
        self._transform = psd_sqrt(self.covariance, "process noise covariance")

    def sample(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        """Draw noise vectors; (3,) when size is None, else (size, 3)."""
        n = 1 if size is None else size
        draws = rng.standard_normal((n, 3)) @ self._transform.T
        return draws[0] if size is None else draws


def build_system_matrices(tau: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Discrete-time target matrices (F, B, G) for sampling interval tau.

    F propagates position by velocity, B maps planar acceleration inputs,
    G maps [ax-noise, ay-noise, vz-noise] into the state.
    """
    if tau <= 0.0:
        raise ValueError(f"sampling interval must be positive, got {tau}")
    f = np.eye(STATE_DIM)
    f[0, 3] = tau
    f[1, 4] = tau
    b = np.zeros((STATE_DIM, 2))
    b[0, 0] = tau**2 / 2.0
    b[1, 1] = tau**2 / 2.0
    b[3, 0] = tau
    b[4, 1] = tau
    g = np.zeros((STATE_DIM, 3))
    g[0, 0] = tau**2 / 2.0
    g[1, 1] = tau**2 / 2.0
    g[2, 2] = tau
    g[3, 0] = tau
    g[4, 1] = tau
    return f, b, g


def sample_mode(prev: int, model: ManeuverModel, rng: np.random.Generator) -> int:
    """Draw the next maneuver mode from the chain's transition row."""
    if not 0 <= prev < model.n_modes:
        raise ValueError(f"mode index {prev} out of range for {model.n_modes} modes")
    u = rng.random()
    # Clip guards the u ~ 1 edge when the row sums to 1 - eps.
    return int(min(np.searchsorted(model._cum[prev], u, side="right"), model.n_modes - 1))


def step_gmt(
    state: GmtState,
    mode: int,
    noise,
    model: ManeuverModel,
    tau: float,
    matrices: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None,
) -> GmtState:
    """Advance the target one step: F x + B u(mode) + G w."""
    if not 0 <= mode < model.n_modes:
        raise ValueError(f"mode index {mode} out of range for {model.n_modes} modes")
    f, b, g = matrices if matrices is not None else build_system_matrices(tau)
    x = state.as_array()
    nxt = f @ x + b @ model.modes[mode] + g @ np.asarray(noise, dtype=float)
    return GmtState.from_array(nxt)
