"""Rao-Blackwellised particle filter for the jump-Markov target model.

Each particle carries only a maneuver-mode hypothesis; conditioned on the
sampled mode sequence the target dynamics are linear-Gaussian, so every
particle keeps exact EKF statistics (mean, covariance) for the continuous
state. Importance weights use the predicted measurement density, resampling
is multinomial on the mode particles, and the output is the weighted
mixture of the per-particle EKF estimates.

The filter loop order per tick is: time update, (weight update +
measurement update from the same predicted statistics), resampling when the
effective sample size degenerates, output, then mode propagation for the
next tick. Weights are stored in log domain and renormalised with
log-sum-exp; a bank of 100 particles underflows linear weights within a few
hundred steps.

Bookkeeping note: the source derivation indexes the weight attached to mode
sequence Gamma_{k-1} as omega_{k-1} while conditioning on measurement m_k;
operationally that is simply "reweight by the predicted density of the
newest measurement", applied here from the first measurement onward.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import logging

import numpy as np

from .angles import wrap_pi
from .gmt import ManeuverModel, build_system_matrices
from .sensors import SensorContext

logger = logging.getLogger(__name__)

STATE_DIM = 5

COV_SYM_TOL = 1e-10
COV_EIG_FLOOR = 1e-12
COV_JITTER = 1e-10
LOG_2PI = np.log(2.0 * np.pi)


@dataclass
class RbpfConfig:
    """Particle count, resampling threshold, and mode-sampling options.

    ``resample_threshold`` is in effective-sample-size units and defaults to
    n/2. With ``transition_known`` False the mode proposal is uniform over
    modes instead of the chain's transition row. ``prior_mode_dist`` of None
    puts all initial particles on the maneuver model's initial mode.
    """

    n: int = 100
    resample_threshold: float | None = None
    transition_known: bool = True
    prior_mode_dist: np.ndarray | None = None
    resampling: str = "multinomial"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("particle count must be >= 1")
        if self.resample_threshold is None:
            self.resample_threshold = max(1.0, self.n / 2.0)
        if not 1.0 <= self.resample_threshold <= self.n:
            raise ValueError(f"resample threshold must lie in [1, n], got {self.resample_threshold}")
        if self.resampling not in ("multinomial", "systematic"):
            raise ValueError(f"unknown resampling scheme {self.resampling!r}")
        if self.prior_mode_dist is not None:
            p = np.asarray(self.prior_mode_dist, dtype=float)
            if np.any(p < 0.0) or abs(p.sum() - 1.0) > 1e-9:
                raise ValueError("prior mode distribution must be a probability vector")
            self.prior_mode_dist = p


@dataclass
class ParticleSet:
    """Vectorised bank: modes (n,), EKF means (n, 5), covariances (n, 5, 5),
    normalised log-weights (n,)."""

    modes: np.ndarray
    means: np.ndarray
    covs: np.ndarray
    log_weights: np.ndarray

    @property
    def n(self) -> int:
        return self.modes.shape[0]

    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)


@dataclass
class Estimate:
    """Filter output: state mean and mixture covariance."""

    mean: np.ndarray
    cov: np.ndarray


@dataclass
class FilterPlant:
    """Target model matrices at the filter tick interval."""

    transition: np.ndarray        # F (5, 5)
    input_map: np.ndarray         # B (5, 2)
    process_cov: np.ndarray       # G Q G^T (5, 5)
    accel_table: np.ndarray       # (m, 2) mode accelerations
    mode_inputs: np.ndarray = field(init=False)  # B @ u per mode, (m, 5)

    def __post_init__(self):
        self.mode_inputs = self.accel_table @ self.input_map.T


def make_filter_plant(model: ManeuverModel, noise_cov, tau: float) -> FilterPlant:
    """Build the plant the filter assumes for one tick of length tau."""
    f, b, g = build_system_matrices(tau)
    q = np.asarray(noise_cov, dtype=float)
    return FilterPlant(f, b, g @ q @ g.T, np.asarray(model.modes, dtype=float))


def init(
    config: RbpfConfig,
    model: ManeuverModel,
    x0,
    sigma0,
    rng: np.random.Generator,
) -> ParticleSet:
    """Spawn the particle bank: common Gaussian statistics, modes from the prior."""
    x0 = np.asarray(x0, dtype=float)
    sigma0 = np.asarray(sigma0, dtype=float)
    if x0.shape != (STATE_DIM,) or sigma0.shape != (STATE_DIM, STATE_DIM):
        raise ValueError("initial state must be (5,) with a (5, 5) covariance")
    try:
        np.linalg.cholesky(sigma0)
    except np.linalg.LinAlgError:
        raise ValueError("initial covariance must be positive definite")
    n = config.n
    if config.prior_mode_dist is None:
        modes = np.full(n, model.initial_mode, dtype=np.int64)
    else:
        if config.prior_mode_dist.shape != (model.n_modes,):
            raise ValueError("prior mode distribution length must match the mode count")
        cum = np.cumsum(config.prior_mode_dist)
        modes = np.minimum(
            (cum[None, :] <= rng.random(n)[:, None]).sum(axis=1), model.n_modes - 1
        ).astype(np.int64)
    return ParticleSet(
        modes=modes,
        means=np.tile(x0, (n, 1)),
        covs=np.tile(sigma0, (n, 1, 1)),
        log_weights=np.full(n, -np.log(n)),
    )


def time_update(particles: ParticleSet, plant: FilterPlant) -> None:
    """Propagate every particle's EKF statistics one tick under its mode."""
    particles.means = particles.means @ plant.transition.T + plant.mode_inputs[particles.modes]
    covs = plant.transition @ particles.covs @ plant.transition.T + plant.process_cov
    particles.covs = 0.5 * (covs + covs.transpose(0, 2, 1))


@dataclass
class InnovationStats:
    """Predicted measurement statistics shared by the weight and EKF updates.

    The inverse innovation covariance and the (wrapped) innovations are
    cached so that running both updates from one stats object does the
    linear algebra once.
    """

    predicted: np.ndarray      # h(x_pred), (n, 2)
    jacobian: np.ndarray       # H, (n, 2, 5)
    innovation_cov: np.ndarray  # H P H^T + R, (n, 2, 2)
    valid: np.ndarray          # (n,) rows with usable geometry and invertible S
    _s_inv: np.ndarray | None = None
    _innov: np.ndarray | None = None

    def inverse_cov(self) -> np.ndarray:
        if self._s_inv is None:
            self._s_inv = _inv_2x2(self.innovation_cov, self.valid)
        return self._s_inv

    def innovations(self, values, ctx) -> np.ndarray:
        if self._innov is None:
            innov = np.asarray(values, dtype=float) - self.predicted
            if ctx.angle_channels.any():
                innov[:, ctx.angle_channels] = wrap_pi(innov[:, ctx.angle_channels])
            self._innov = innov
        return self._innov


def innovation_stats(particles: ParticleSet, ctx: SensorContext) -> InnovationStats:
    """Evaluate the measurement model and its Jacobian at the predicted means."""
    predicted, valid = ctx.predict(particles.means)
    jac = ctx.jacobian(particles.means)
    s = jac @ particles.covs @ jac.transpose(0, 2, 1) + ctx.noise_cov
    det = s[:, 0, 0] * s[:, 1, 1] - s[:, 0, 1] * s[:, 1, 0]
    valid = valid & np.isfinite(det) & (det > 0.0)
    return InnovationStats(predicted, jac, s, valid)


def _inv_2x2(s: np.ndarray, valid: np.ndarray) -> np.ndarray:
    det = s[:, 0, 0] * s[:, 1, 1] - s[:, 0, 1] * s[:, 1, 0]
    det = np.where(valid, det, 1.0)
    inv = np.empty_like(s)
    inv[:, 0, 0] = s[:, 1, 1]
    inv[:, 1, 1] = s[:, 0, 0]
    inv[:, 0, 1] = -s[:, 0, 1]
    inv[:, 1, 0] = -s[:, 1, 0]
    return inv / det[:, None, None]


def weight_update(
    particles: ParticleSet,
    values,
    ctx: SensorContext,
    stats: InnovationStats | None = None,
) -> None:
    """Multiply weights by the predicted Gaussian density of the measurement
    and renormalise (log-sum-exp). Must run on predicted statistics, before
    the EKF correction. Particles with degenerate geometry drop to the floor;
    a fully-degenerate bank resets to uniform.
    """
    if stats is None:
        stats = innovation_stats(particles, ctx)
    innov = stats.innovations(values, ctx)
    s_inv = stats.inverse_cov()
    quad = np.einsum("ni,nij,nj->n", innov, s_inv, innov)
    det = (
        stats.innovation_cov[:, 0, 0] * stats.innovation_cov[:, 1, 1]
        - stats.innovation_cov[:, 0, 1] * stats.innovation_cov[:, 1, 0]
    )
    log_pdf = -0.5 * (quad + np.log(np.where(stats.valid, det, 1.0)) + 2.0 * LOG_2PI)
    particles.log_weights = np.where(
        stats.valid, particles.log_weights + log_pdf, -np.inf
    )
    _normalize_log_weights(particles)


def _normalize_log_weights(particles: ParticleSet) -> None:
    peak = np.max(particles.log_weights)
    if not np.isfinite(peak):
        logger.warning("all particle weights degenerate; resetting to uniform")
        particles.log_weights = np.full(particles.n, -np.log(particles.n))
        return
    shifted = particles.log_weights - peak
    particles.log_weights = shifted - np.log(np.sum(np.exp(shifted)))


def measurement_update(
    particles: ParticleSet,
    values,
    ctx: SensorContext,
    stats: InnovationStats | None = None,
) -> None:
    """EKF correction of every particle's statistics; covariances are
    re-symmetrised and jittered if an eigenvalue collapses."""
    if stats is None:
        stats = innovation_stats(particles, ctx)
    innov = stats.innovations(values, ctx)
    s_inv = stats.inverse_cov()
    gain = particles.covs @ stats.jacobian.transpose(0, 2, 1) @ s_inv
    if stats.valid.all():
        particles.means += np.einsum("nij,nj->ni", gain, innov)
        covs = particles.covs - gain @ stats.jacobian @ particles.covs
    else:
        ok = stats.valid
        particles.means[ok] += np.einsum("nij,nj->ni", gain, innov)[ok]
        covs = particles.covs.copy()
        corrected = particles.covs - gain @ stats.jacobian @ particles.covs
        covs[ok] = corrected[ok]
    particles.covs = 0.5 * (covs + covs.transpose(0, 2, 1))
    _repair_covariances(particles)


def _repair_covariances(particles: ParticleSet) -> None:
    try:
        np.linalg.cholesky(particles.covs)
    except np.linalg.LinAlgError:
        eigs = np.linalg.eigvalsh(particles.covs)
        bad = eigs[:, 0] < COV_EIG_FLOOR
        particles.covs[bad] += COV_JITTER * np.eye(STATE_DIM)
        logger.warning("jittered %d particle covariances (min eig %.3e)",
                       int(bad.sum()), float(eigs[:, 0].min()))


def effective_sample_size(particles: ParticleSet) -> float:
    """Degeneracy measure 1 / sum(w^2); n for uniform weights, 1 for one-hot."""
    w = particles.weights()
    return float(1.0 / np.sum(w * w))


def resample(
    particles: ParticleSet, rng: np.random.Generator, method: str = "multinomial"
) -> None:
    """Redraw the bank with replacement by weight; full particle tuples are
    copied and weights reset to 1/n."""
    w = particles.weights()
    cum = np.cumsum(w)
    cum[-1] = 1.0
    n = particles.n
    if method == "multinomial":
        picks = rng.random(n)
    elif method == "systematic":
        picks = (rng.random() + np.arange(n)) / n
    else:
        raise ValueError(f"unknown resampling scheme {method!r}")
    idx = np.searchsorted(cum, picks, side="right")
    idx = np.minimum(idx, n - 1)
    particles.modes = particles.modes[idx].copy()
    particles.means = particles.means[idx].copy()
    particles.covs = particles.covs[idx].copy()
    particles.log_weights = np.full(n, -np.log(n))


def propagate_modes(
    particles: ParticleSet,
    model: ManeuverModel,
    config: RbpfConfig,
    rng: np.random.Generator,
) -> None:
    """Redraw each particle's mode from its transition row, or uniformly when
    the transition matrix is treated as unknown."""
    u = rng.random(particles.n)
    if config.transition_known:
        rows = model._cum[particles.modes]
        nxt = (rows <= u[:, None]).sum(axis=1)
    else:
        nxt = np.floor(u * model.n_modes).astype(np.int64)
    particles.modes = np.minimum(nxt, model.n_modes - 1).astype(np.int64)


def estimate(particles: ParticleSet) -> Estimate:
    """Weighted mixture output: mean of means, mean of covariances."""
    w = particles.weights()
    mean = w @ particles.means
    cov = np.einsum("n,nij->ij", w, particles.covs)
    return Estimate(mean, cov)


class Rbpf:
    """Harness-facing filter running the full per-tick cycle."""

    def __init__(
        self,
        config: RbpfConfig,
        model: ManeuverModel,
        plant: FilterPlant,
        x0,
        sigma0,
        rng: np.random.Generator,
    ):
        self.config = config
        self.model = model
        self.plant = plant
        self.rng = rng
        self.particles = init(config, model, x0, sigma0, rng)
        self.last_resampled = False

    def step(self, measurement_values, ctx: SensorContext | None):
        """One filter tick; measurement may be None (time update only).

        Returns (Estimate, n_eff, resampled).
        """
        time_update(self.particles, self.plant)
        self.last_resampled = False
        if measurement_values is not None and ctx is not None:
            stats = innovation_stats(self.particles, ctx)
            weight_update(self.particles, measurement_values, ctx, stats)
            measurement_update(self.particles, measurement_values, ctx, stats)
            n_eff = effective_sample_size(self.particles)
            if n_eff < self.config.resample_threshold:
                resample(self.particles, self.rng, self.config.resampling)
                self.last_resampled = True
        else:
            n_eff = effective_sample_size(self.particles)
        out = estimate(self.particles)
        propagate_modes(self.particles, self.model, self.config, self.rng)
        return out, n_eff, self.last_resampled

    def mode_fractions(self) -> np.ndarray:
        """Particle weight share per maneuver mode (posterior mode histogram)."""
        w = self.particles.weights()
        return np.bincount(self.particles.modes, weights=w, minlength=self.model.n_modes)


def ekf_baseline_step(
    mean: np.ndarray,
    cov: np.ndarray,
    plant: FilterPlant,
    measurement_values,
    ctx: SensorContext | None,
    rng: np.random.Generator,
    mode: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """One predict/correct cycle of the single-EKF baseline.

    The baseline cannot observe the maneuver, so unless ``mode`` is given it
    predicts with an input drawn uniformly from the mode table (the chain's
    stationary guess). Written as an explicit textbook EKF; also serves as an
    independent cross-check of the particle bank with one mode.
    """
    if mode is None:
        mode = int(rng.integers(plant.accel_table.shape[0]))
    mean = plant.transition @ mean + plant.mode_inputs[mode]
    cov = plant.transition @ cov @ plant.transition.T + plant.process_cov
    cov = 0.5 * (cov + cov.T)
    if measurement_values is not None and ctx is not None:
        pred, valid = ctx.predict(mean[None, :])
        det_ok = False
        if valid[0]:
            h = ctx.jacobian(mean[None, :])[0]
            s = h @ cov @ h.T + ctx.noise_cov
            det_ok = np.isfinite(s).all() and np.linalg.det(s) > 0.0
        if det_ok:
            innov = np.asarray(measurement_values, dtype=float) - pred[0]
            if ctx.angle_channels.any():
                innov[ctx.angle_channels] = wrap_pi(innov[ctx.angle_channels])
            gain = cov @ h.T @ np.linalg.inv(s)
            mean = mean + gain @ innov
            cov = cov - gain @ h @ cov
            cov = 0.5 * (cov + cov.T)
    return mean, cov


class EkfEstimator:
    """Single-EKF estimator, either with uniformly sampled inputs (baseline
    for the filter comparison) or with a fixed known mode."""

    def __init__(self, plant: FilterPlant, x0, sigma0, rng: np.random.Generator,
                 random_input: bool = True, fixed_mode: int = 0):
        self.plant = plant
        self.mean = np.asarray(x0, dtype=float).copy()
        self.cov = np.asarray(sigma0, dtype=float).copy()
        self.rng = rng
        self.random_input = random_input
        self.fixed_mode = fixed_mode

    def step(self, measurement_values, ctx: SensorContext | None):
        mode = None if self.random_input else self.fixed_mode
        self.mean, self.cov = ekf_baseline_step(
            self.mean, self.cov, self.plant, measurement_values, ctx, self.rng, mode
        )
        return Estimate(self.mean.copy(), self.cov.copy()), float("nan"), False

    def mode_fractions(self) -> np.ndarray:
        return np.array([1.0])


def rmse(estimates, truths) -> np.ndarray:
    """Per-step planar position RMSE across Monte Carlo runs.

    Inputs are (runs, steps, >=2) arrays (or (steps, >=2) for one run) whose
    first two columns are x and y. RMSE_k = sqrt(mean over runs of squared
    planar error at step k).
    """
    est = np.asarray(estimates, dtype=float)
    tru = np.asarray(truths, dtype=float)
    if est.shape != tru.shape:
        raise ValueError(f"estimate/truth shape mismatch: {est.shape} vs {tru.shape}")
    if est.ndim == 2:
        est = est[None, ...]
        tru = tru[None, ...]
    sq = (est[..., 0] - tru[..., 0]) ** 2 + (est[..., 1] - tru[..., 1]) ** 2
    return np.sqrt(np.mean(sq, axis=0))
