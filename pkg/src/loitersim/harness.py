"""Closed-loop episode runner, Monte Carlo driver, configuration and export.

An episode wires the full loop together: the target advances under its
maneuver chain, a sensor captures (optionally delayed) measurements, the
filter estimates the target state, the guidance field turns the estimate
into speed/heading commands (certainty equivalence), the controller tracks
them, and the UAV plant advances under saturated inputs plus bounded
disturbance.

Determinism contract: (config, seed) fully determines every output byte.
Each episode splits its seed into five independent substreams, in order:
target process noise, target maneuver chain, UAV disturbance, sensor noise,
filter randomness. Truth and measurements therefore do not change when the
filter variant does, which allows paired filter comparisons on common
random numbers. Monte Carlo run i uses seed base_seed + i; aggregation is
slot-indexed, so reports are identical for any worker count.
"""

from __future__ import annotations

import hashlib
import json
import logging
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import estimation, guidance, gmt, ismc, sensors, uav
from .angles import wrap_pi

logger = logging.getLogger(__name__)

STREAM_NAMES = ("gmt_noise", "gmt_mode", "uav_disturbance", "sensor", "filter")


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass
class GmtScenario:
    """Truth-side target setup."""

    initial_state: np.ndarray
    maneuver: gmt.ManeuverModel
    noise_cov: np.ndarray

    def __post_init__(self):
        self.initial_state = np.asarray(self.initial_state, dtype=float)
        self.noise_cov = np.asarray(self.noise_cov, dtype=float)
        if self.initial_state.shape != (5,):
            raise ValueError("target initial state must be a 5-vector")


@dataclass
class UavScenario:
    """UAV initial pose, altitude, actuator envelope and disturbance setup."""

    initial: uav.UavState
    altitude: float
    limits: uav.ActuatorLimits
    disturbance_sigma: tuple[float, float]
    disturbance_bounds: uav.DisturbanceBounds

    def __post_init__(self):
        if self.altitude <= 0.0:
            raise ValueError("altitude must be positive")


@dataclass
class SensorSetup:
    """Sensor selection, parameters, and measurement delay."""

    kind: str = "camera"
    camera: sensors.CameraModel = field(default_factory=sensors.CameraModel)
    radar: sensors.RadarModel = field(default_factory=sensors.RadarModel)
    delay_s: float = 0.0

    def __post_init__(self):
        if self.kind not in ("camera", "radar"):
            raise ValueError(f"unknown sensor kind {self.kind!r}")
        if self.delay_s < 0.0:
            raise ValueError("delay must be nonnegative")

    @property
    def model(self) -> sensors.CameraModel | sensors.RadarModel:
        return self.camera if self.kind == "camera" else self.radar

    @property
    def rate_hz(self) -> float:
        return self.model.rate_hz


@dataclass
class FilterSetup:
    """Estimator selection. ``assumed_maneuver``/``assumed_noise_cov`` let the
    filter run a different target model than the truth (defaults: same)."""

    kind: str = "rbpf"
    rbpf: estimation.RbpfConfig = field(default_factory=estimation.RbpfConfig)
    sigma0: np.ndarray = field(
        default_factory=lambda: np.diag([100.0, 100.0, 1.0, 4.0, 4.0])
    )
    assumed_maneuver: gmt.ManeuverModel | None = None
    assumed_noise_cov: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("rbpf", "ekf", "none"):
            raise ValueError(f"unknown filter kind {self.kind!r}")
        self.sigma0 = np.asarray(self.sigma0, dtype=float)


@dataclass
class ScenarioConfig:
    """Everything an episode needs; serialisable to/from JSON."""

    name: str
    tau_sim: float
    horizon: int
    seed: int
    gmt: GmtScenario
    uav: UavScenario
    loiter: guidance.LoiterSpec
    gains: ismc.GainSet = field(default_factory=lambda: ismc.DEFAULT_GAINS)
    controller: str = "ismc"
    pd_kp: tuple[float, float] = (0.5, 0.5)
    pd_kd: tuple[float, float] = (0.1, 0.1)
    sensor: SensorSetup = field(default_factory=SensorSetup)
    filter: FilterSetup = field(default_factory=FilterSetup)
    guidance_source: str = "estimate"

    def __post_init__(self):
        if self.tau_sim <= 0.0:
            raise ValueError("tau_sim must be positive")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.controller not in ("ismc", "pd", "smc"):
            raise ValueError(f"unknown controller {self.controller!r}")
        if self.guidance_source not in ("estimate", "truth"):
            raise ValueError(f"unknown guidance source {self.guidance_source!r}")

    @property
    def sensor_every(self) -> int:
        """Simulation steps per sensor tick; validated to be integral."""
        period = 1.0 / self.sensor.rate_hz
        ratio = period / self.tau_sim
        every = round(ratio)
        if every < 1 or abs(ratio - every) > 1e-9:
            raise ValueError(
                f"sensor period {period} s is not an integer multiple of tau_sim {self.tau_sim} s"
            )
        return every

    @property
    def delay_periods(self) -> int:
        """Measurement delay in sensor periods, rounded to nearest (ties up)."""
        exact = self.sensor.delay_s * self.sensor.rate_hz
        periods = int(np.floor(exact + 0.5))
        if abs(exact - periods) > 1e-9:
            logger.info(
                "sensor delay %.3f s is %.2f periods; rounded to %d (%.3f s)",
                self.sensor.delay_s, exact, periods, periods / self.sensor.rate_hz,
            )
        return periods


def config_to_dict(config: ScenarioConfig) -> dict:
    """Plain-JSON-types view of a config."""
    return {
        "name": config.name,
        "tau_sim": config.tau_sim,
        "horizon": config.horizon,
        "seed": config.seed,
        "gmt": {
            "initial_state": config.gmt.initial_state.tolist(),
            "modes": config.gmt.maneuver.modes.tolist(),
            "transition": config.gmt.maneuver.transition.tolist(),
            "initial_mode": config.gmt.maneuver.initial_mode,
            "noise_cov": config.gmt.noise_cov.tolist(),
        },
        "uav": {
            "initial": [config.uav.initial.x, config.uav.initial.y,
                        config.uav.initial.v, config.uav.initial.psi],
            "altitude": config.uav.altitude,
            "max_turn_rate": config.uav.limits.max_turn_rate,
            "disturbance_sigma": list(config.uav.disturbance_sigma),
            "disturbance_bounds": [config.uav.disturbance_bounds.accel,
                                   config.uav.disturbance_bounds.turn_rate],
        },
        "loiter": {"radius": config.loiter.radius, "speed": config.loiter.speed},
        "gains": {
            "w_v": config.gains.w_v, "w_psi": config.gains.w_psi,
            "m_v": config.gains.m_v, "m_psi": config.gains.m_psi,
            "c_v": config.gains.c_v, "c_psi": config.gains.c_psi,
        },
        "controller": config.controller,
        "pd_kp": list(config.pd_kp),
        "pd_kd": list(config.pd_kd),
        "sensor": {
            "kind": config.sensor.kind,
            "camera": {
                "focal": config.sensor.camera.focal,
                "noise_cov": config.sensor.camera.noise_cov.tolist(),
                "rate_hz": config.sensor.camera.rate_hz,
            },
            "radar": {
                "noise_cov": config.sensor.radar.noise_cov.tolist(),
                "rate_hz": config.sensor.radar.rate_hz,
            },
            "delay_s": config.sensor.delay_s,
        },
        "filter": {
            "kind": config.filter.kind,
            "n": config.filter.rbpf.n,
            "resample_threshold": config.filter.rbpf.resample_threshold,
            "transition_known": config.filter.rbpf.transition_known,
            "prior_mode_dist": None if config.filter.rbpf.prior_mode_dist is None
            else config.filter.rbpf.prior_mode_dist.tolist(),
            "resampling": config.filter.rbpf.resampling,
            "sigma0": config.filter.sigma0.tolist(),
            "assumed_modes": None if config.filter.assumed_maneuver is None
            else config.filter.assumed_maneuver.modes.tolist(),
            "assumed_transition": None if config.filter.assumed_maneuver is None
            else config.filter.assumed_maneuver.transition.tolist(),
            "assumed_initial_mode": None if config.filter.assumed_maneuver is None
            else config.filter.assumed_maneuver.initial_mode,
            "assumed_noise_cov": None if config.filter.assumed_noise_cov is None
            else np.asarray(config.filter.assumed_noise_cov).tolist(),
        },
        "guidance_source": config.guidance_source,
    }


def config_from_dict(data: dict) -> ScenarioConfig:
    """Inverse of config_to_dict; raises KeyError/ValueError on bad input."""
    g = data["gmt"]
    u = data["uav"]
    s = data["sensor"]
    f = data["filter"]
    assumed = None
    if f.get("assumed_modes") is not None:
        assumed = gmt.ManeuverModel(
            np.array(f["assumed_modes"]),
            np.array(f["assumed_transition"]),
            f.get("assumed_initial_mode", 0),
        )
    return ScenarioConfig(
        name=data["name"],
        tau_sim=data["tau_sim"],
        horizon=data["horizon"],
        seed=data["seed"],
        gmt=GmtScenario(
            initial_state=np.array(g["initial_state"]),
            maneuver=gmt.ManeuverModel(
                np.array(g["modes"]), np.array(g["transition"]), g["initial_mode"]
            ),
            noise_cov=np.array(g["noise_cov"]),
        ),
        uav=UavScenario(
            initial=uav.UavState(*u["initial"]),
            altitude=u["altitude"],
            limits=uav.ActuatorLimits(u["max_turn_rate"]),
            disturbance_sigma=tuple(u["disturbance_sigma"]),
            disturbance_bounds=uav.DisturbanceBounds(*u["disturbance_bounds"]),
        ),
        loiter=guidance.LoiterSpec(data["loiter"]["radius"], data["loiter"]["speed"]),
        gains=ismc.GainSet(**data["gains"]),
        controller=data["controller"],
        pd_kp=tuple(data["pd_kp"]),
        pd_kd=tuple(data["pd_kd"]),
        sensor=SensorSetup(
            kind=s["kind"],
            camera=sensors.CameraModel(
                focal=s["camera"]["focal"],
                noise_cov=np.array(s["camera"]["noise_cov"]),
                rate_hz=s["camera"]["rate_hz"],
            ),
            radar=sensors.RadarModel(
                noise_cov=np.array(s["radar"]["noise_cov"]),
                rate_hz=s["radar"]["rate_hz"],
            ),
            delay_s=s["delay_s"],
        ),
        filter=FilterSetup(
            kind=f["kind"],
            rbpf=estimation.RbpfConfig(
                n=f["n"],
                resample_threshold=f["resample_threshold"],
                transition_known=f["transition_known"],
                prior_mode_dist=None if f["prior_mode_dist"] is None
                else np.array(f["prior_mode_dist"]),
                resampling=f["resampling"],
            ),
            sigma0=np.array(f["sigma0"]),
            assumed_maneuver=assumed,
            assumed_noise_cov=None if f["assumed_noise_cov"] is None
            else np.array(f["assumed_noise_cov"]),
        ),
        guidance_source=data["guidance_source"],
    )


def config_hash(config: ScenarioConfig) -> str:
    canon = json.dumps(config_to_dict(config), sort_keys=True)
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def save_config(config: ScenarioConfig, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(config_to_dict(config), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_config(path: str) -> ScenarioConfig:
    with open(path) as fh:
        return config_from_dict(json.load(fh))


@dataclass
class ValidationReport:
    """Outcome of the configuration checks: hard errors abort an episode,
    soft flags (infeasible guidance, gain conditions) only warn."""

    errors: list[str]
    warnings: list[str]

    @property
    def ok(self) -> bool:
        return not self.errors

    @property
    def clean(self) -> bool:
        return not self.errors and not self.warnings

    def lines(self) -> list[str]:
        out = [f"ERROR: {e}" for e in self.errors]
        out += [f"WARN: {w}" for w in self.warnings]
        if not out:
            out = ["all checks passed"]
        return out


def validate_config(config: ScenarioConfig) -> ValidationReport:
    """Run structural, feasibility and gain checks; log soft flags."""
    errors: list[str] = []
    warnings: list[str] = []
    try:
        config.sensor_every
    except ValueError as exc:
        errors.append(str(exc))
    tau_ctrl = None
    try:
        tau_ctrl = config.sensor_every * config.tau_sim
    except ValueError:
        pass
    if tau_ctrl is not None:
        if not guidance.check_feasibility(config.loiter, tau_ctrl, config.uav.limits):
            warnings.append(
                "guidance feasibility condition fails "
                f"(v_d/r_d={config.loiter.speed / config.loiter.radius:.4g}, "
                f"max turn rate {config.uav.limits.max_turn_rate}, 1/tau={1.0 / tau_ctrl:.4g})"
            )
        ok, problems = ismc.validate_gains(config.gains, tau_ctrl)
        if not ok:
            warnings.extend("gain condition: " + p for p in problems)
    if config.filter.kind == "rbpf" and config.filter.rbpf.n < 1:
        errors.append("particle count must be >= 1")
    report = ValidationReport(errors, warnings)
    for line in report.errors:
        logger.error("config %s: %s", config.name, line)
    for line in report.warnings:
        logger.warning("config %s: %s", config.name, line)
    return report


# ---------------------------------------------------------------------------
# Episode runner
# ---------------------------------------------------------------------------

TRACE_SCALAR_COLUMNS = [
    "k", "t_x", "t_y", "t_z", "t_vx", "t_vy", "t_mode",
    "a_x", "a_y", "a_v", "a_psi",
    "est_x", "est_y", "est_z", "est_vx", "est_vy", "cov_trace",
    "cmd_v", "cmd_psi", "e_v", "e_psi", "s_v", "s_psi",
    "u_accel", "u_turn",
    "meas_kind", "m1", "m2", "meas_valid",
    "n_eff", "resampled", "rel_dist",
]


@dataclass
class EpisodeTrace:
    """Per-step record of one episode (arrays of length horizon).

    ``mode_fractions`` holds the filter's posterior weight share per maneuver
    mode (horizon, n_modes). Column meanings are documented in the README.
    """

    config_name: str
    seed: int
    tau_sim: float
    columns: dict[str, np.ndarray]
    mode_fractions: np.ndarray

    def column_names(self) -> list[str]:
        return TRACE_SCALAR_COLUMNS + [
            f"mode_frac_{i}" for i in range(self.mode_fractions.shape[1])
        ]

    def row_count(self) -> int:
        return self.columns["k"].shape[0]


def _make_controller(config: ScenarioConfig, tau_ctrl: float):
    if config.controller == "ismc":
        return ismc.IsmcController(config.gains, tau_ctrl)
    if config.controller == "pd":
        return ismc.PdController(config.pd_kp, config.pd_kd, tau_ctrl)
    return ismc.SmcController(config.gains.switching, tau_ctrl)


def _make_filter(config: ScenarioConfig, tau_ctrl: float, rng: np.random.Generator):
    model = config.filter.assumed_maneuver or config.gmt.maneuver
    noise_cov = (
        config.filter.assumed_noise_cov
        if config.filter.assumed_noise_cov is not None
        else config.gmt.noise_cov
    )
    plant = estimation.make_filter_plant(model, noise_cov, tau_ctrl)
    x0 = config.gmt.initial_state
    if config.filter.kind == "rbpf":
        return estimation.Rbpf(config.filter.rbpf, model, plant, x0, config.filter.sigma0, rng)
    if config.filter.kind == "ekf":
        return estimation.EkfEstimator(plant, x0, config.filter.sigma0, rng, random_input=True)
    return None


def run_episode(config: ScenarioConfig, seed: int | None = None) -> EpisodeTrace:
    """Simulate one closed-loop episode. Deterministic given (config, seed)."""
    report = validate_config(config)
    if not report.ok:
        raise ValueError("invalid configuration: " + "; ".join(report.errors))
    seed = config.seed if seed is None else seed
    streams = np.random.SeedSequence(seed).spawn(len(STREAM_NAMES))
    rngs = {name: np.random.Generator(np.random.PCG64(s))
            for name, s in zip(STREAM_NAMES, streams)}

    tau = config.tau_sim
    every = config.sensor_every
    tau_ctrl = every * tau
    horizon = config.horizon
    delay_periods = config.delay_periods

    mats = gmt.build_system_matrices(tau)
    f_mat, b_mat, g_mat = mats
    noise_model = gmt.GmtNoiseModel(config.gmt.noise_cov)
    maneuver = config.gmt.maneuver
    truth = config.gmt.initial_state.copy()
    mode = maneuver.initial_mode

    uav_state = replace(config.uav.initial)
    limits = config.uav.limits
    sigma_a, sigma_t = config.uav.disturbance_sigma
    bounds = config.uav.disturbance_bounds
    altitude = config.uav.altitude

    controller = _make_controller(config, tau_ctrl)
    filt = _make_filter(config, tau_ctrl, rngs["filter"])
    n_modes = (config.filter.assumed_maneuver or maneuver).n_modes if filt else 1

    sensor_model = config.sensor.model
    pending: deque = deque()

    held_input = uav.ControlInput(0.0, 0.0)
    est = estimation.Estimate(truth.copy(), np.zeros((5, 5)))
    cmd = guidance.GuidanceCommand(uav_state.v, uav_state.psi)
    err = ismc.TrackingError(0.0, 0.0)
    s_vec = np.zeros(2)

    cols = {name: np.full(horizon, np.nan) for name in TRACE_SCALAR_COLUMNS}
    mode_frac = np.zeros((horizon, n_modes))
    # Bound locals once; the loop writes columns by index.
    c_k, c_tx, c_ty, c_tz, c_tvx, c_tvy, c_tmode = (
        cols["k"], cols["t_x"], cols["t_y"], cols["t_z"],
        cols["t_vx"], cols["t_vy"], cols["t_mode"],
    )
    c_ax, c_ay, c_av, c_apsi = cols["a_x"], cols["a_y"], cols["a_v"], cols["a_psi"]
    c_ex, c_ey, c_ez, c_evx, c_evy, c_ct = (
        cols["est_x"], cols["est_y"], cols["est_z"],
        cols["est_vx"], cols["est_vy"], cols["cov_trace"],
    )
    c_cv, c_cp, c_err_v, c_err_p, c_sv, c_sp = (
        cols["cmd_v"], cols["cmd_psi"], cols["e_v"], cols["e_psi"],
        cols["s_v"], cols["s_psi"],
    )
    c_ua, c_ut, c_mk, c_m1, c_m2, c_mv, c_ne, c_rs, c_rd = (
        cols["u_accel"], cols["u_turn"], cols["meas_kind"], cols["m1"], cols["m2"],
        cols["meas_valid"], cols["n_eff"], cols["resampled"], cols["rel_dist"],
    )

    for i in range(horizon):
        k = i + 1
        # Target advances under the current mode, then the chain transitions.
        noise = noise_model.sample(rngs["gmt_noise"])
        truth = f_mat @ truth + b_mat @ maneuver.modes[mode] + g_mat @ noise
        mode = gmt.sample_mode(mode, maneuver, rngs["gmt_mode"])

        delivered = None
        delivered_ctx = None
        n_eff = np.nan
        resampled = False
        if k % every == 0:
            cap = sensors.measure(
                config.sensor.kind, truth[:3], uav_state, altitude,
                sensor_model, k, rngs["sensor"],
            )
            pending.append(cap)
            if len(pending) > delay_periods:
                due = pending.popleft()
                if due is not None:
                    delivered, delivered_ctx = due
            if filt is not None:
                values = delivered.values if delivered is not None else None
                est, n_eff, resampled = filt.step(values, delivered_ctx)
                mode_frac[i] = filt.mode_fractions()
            else:
                est = estimation.Estimate(truth.copy(), np.zeros((5, 5)))
            if delivered is not None:
                c_mk[i] = 0.0 if delivered.kind == "camera" else 1.0
                c_m1[i] = delivered.values[0]
                c_m2[i] = delivered.values[1]
            else:
                c_mk[i] = -1.0

            # Guidance (certainty equivalence unless running on truth).
            source = truth if config.guidance_source == "truth" else est.mean
            rel = np.array([uav_state.x - source[0], uav_state.y - source[1]])
            field_vel = guidance.lyapunov_field(rel, config.loiter)
            cmd = guidance.desired_command(field_vel, source[3:5], fallback_heading=cmd.heading)
            raw, err, s_vec = controller.step(uav_state, cmd)
            held_input = uav.saturate(raw, limits)
        else:
            c_mk[i] = -1.0
            if filt is None:
                est = estimation.Estimate(truth.copy(), np.zeros((5, 5)))

        disturbance = uav.sample_bounded_disturbance(
            bounds, sigma_a, sigma_t, rngs["uav_disturbance"]
        )
        uav_state = uav.step_uav(uav_state, held_input, disturbance, tau)

        c_k[i] = k
        c_tx[i] = truth[0]
        c_ty[i] = truth[1]
        c_tz[i] = truth[2]
        c_tvx[i] = truth[3]
        c_tvy[i] = truth[4]
        c_tmode[i] = mode
        c_ax[i] = uav_state.x
        c_ay[i] = uav_state.y
        c_av[i] = uav_state.v
        c_apsi[i] = uav_state.psi
        mean = est.mean
        c_ex[i] = mean[0]
        c_ey[i] = mean[1]
        c_ez[i] = mean[2]
        c_evx[i] = mean[3]
        c_evy[i] = mean[4]
        c_ct[i] = est.cov[0, 0] + est.cov[1, 1] + est.cov[2, 2] + est.cov[3, 3] + est.cov[4, 4]
        c_cv[i] = cmd.speed
        c_cp[i] = cmd.heading
        c_err_v[i] = err.e_v
        c_err_p[i] = err.e_psi
        c_sv[i] = s_vec[0]
        c_sp[i] = s_vec[1]
        c_ua[i] = held_input.accel
        c_ut[i] = held_input.turn_rate
        c_mv[i] = float(delivered is not None)
        c_ne[i] = n_eff
        c_rs[i] = float(resampled)
        c_rd[i] = float(np.hypot(uav_state.x - truth[0], uav_state.y - truth[1]))

    return EpisodeTrace(config.name, seed, tau, cols, mode_frac)


# ---------------------------------------------------------------------------
# Monte Carlo driver
# ---------------------------------------------------------------------------


@dataclass
class MonteCarloReport:
    """Aggregate of independent episodes: per-step position RMSE, and
    loitering statistics of the true relative distance per run."""

    config_name: str
    config_hash: str
    seeds: list[int]
    tau_sim: float
    rmse: np.ndarray
    settling_time_s: np.ndarray
    final_quarter_min: np.ndarray
    final_quarter_max: np.ndarray
    band_m: float

    @property
    def n_runs(self) -> int:
        return len(self.seeds)

    def steady_rmse(self, fraction: float = 0.5) -> float:
        """Time-averaged RMSE over the trailing fraction of the horizon."""
        start = int(len(self.rmse) * (1.0 - fraction))
        return float(np.mean(self.rmse[start:]))

    def to_dict(self) -> dict:
        return {
            "config_name": self.config_name,
            "config_hash": self.config_hash,
            "seeds": list(self.seeds),
            "tau_sim": self.tau_sim,
            "rmse": self.rmse.tolist(),
            "settling_time_s": self.settling_time_s.tolist(),
            "final_quarter_min": self.final_quarter_min.tolist(),
            "final_quarter_max": self.final_quarter_max.tolist(),
            "band_m": self.band_m,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MonteCarloReport":
        return cls(
            config_name=data["config_name"],
            config_hash=data["config_hash"],
            seeds=list(data["seeds"]),
            tau_sim=data["tau_sim"],
            rmse=np.array(data["rmse"]),
            settling_time_s=np.array(data["settling_time_s"]),
            final_quarter_min=np.array(data["final_quarter_min"]),
            final_quarter_max=np.array(data["final_quarter_max"]),
            band_m=data["band_m"],
        )


def _episode_worker(args) -> EpisodeTrace:
    config, seed = args
    return run_episode(config, seed)


def _settling_time_s(rel_dist: np.ndarray, radius: float, band: float, tau: float) -> float:
    """First time after which |rel - radius| stays inside the band; nan if never."""
    inside = np.abs(rel_dist - radius) <= band
    if not inside[-1]:
        return float("nan")
    # Last index where the trajectory was outside the band.
    outside = np.nonzero(~inside)[0]
    first = 0 if outside.size == 0 else int(outside[-1] + 1)
    return first * tau


def run_monte_carlo(
    config: ScenarioConfig,
    n_runs: int,
    parallelism: int = 1,
    base_seed: int | None = None,
    band_m: float = 20.0,
) -> MonteCarloReport:
    """Run n_runs episodes with seeds base_seed + i and aggregate.

    The per-step RMSE follows the Monte Carlo definition: root mean (over
    runs) of the squared planar estimation error at each step. Results do
    not depend on the degree of parallelism.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    base = config.seed if base_seed is None else base_seed
    seeds = [base + i for i in range(n_runs)]
    jobs = [(config, s) for s in seeds]
    traces: list[EpisodeTrace | None] = [None] * n_runs
    if parallelism > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            for i, trace in enumerate(pool.map(_episode_worker, jobs)):
                traces[i] = trace
    else:
        for i, job in enumerate(jobs):
            traces[i] = _episode_worker(job)

    est = np.stack([np.column_stack([t.columns["est_x"], t.columns["est_y"]]) for t in traces])
    tru = np.stack([np.column_stack([t.columns["t_x"], t.columns["t_y"]]) for t in traces])
    rmse = estimation.rmse(est, tru)

    radius = config.loiter.radius
    settling = np.array([
        _settling_time_s(t.columns["rel_dist"], radius, band_m, config.tau_sim) for t in traces
    ])
    quarter = max(1, config.horizon // 4)
    fq_min = np.array([float(np.min(t.columns["rel_dist"][-quarter:])) for t in traces])
    fq_max = np.array([float(np.max(t.columns["rel_dist"][-quarter:])) for t in traces])

    return MonteCarloReport(
        config_name=config.name,
        config_hash=config_hash(config),
        seeds=seeds,
        tau_sim=config.tau_sim,
        rmse=rmse,
        settling_time_s=settling,
        final_quarter_min=fq_min,
        final_quarter_max=fq_max,
        band_m=band_m,
    )


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------


def _fmt(value: float) -> str:
    """Shortest round-trip decimal representation ('.' decimal separator)."""
    return repr(float(value))


def trace_to_csv_lines(trace: EpisodeTrace) -> list[str]:
    names = trace.column_names()
    lines = [",".join(names)]
    n_frac = trace.mode_fractions.shape[1]
    for i in range(trace.row_count()):
        vals = [_fmt(trace.columns[c][i]) for c in TRACE_SCALAR_COLUMNS]
        vals += [_fmt(trace.mode_fractions[i, j]) for j in range(n_frac)]
        lines.append(",".join(vals))
    return lines


def export_trace(trace: EpisodeTrace, path: str, fmt: str = "csv") -> None:
    """Write an episode trace; CSV has one header plus horizon data rows."""
    if fmt == "csv":
        _write_lines(path, trace_to_csv_lines(trace))
    elif fmt == "json":
        payload = {
            "config_name": trace.config_name,
            "seed": trace.seed,
            "tau_sim": trace.tau_sim,
            "columns": {c: trace.columns[c].tolist() for c in TRACE_SCALAR_COLUMNS},
            "mode_fractions": trace.mode_fractions.tolist(),
        }
        _write_json(path, payload)
    else:
        raise ValueError(f"unknown format {fmt!r}")


def export_report(report: MonteCarloReport, path: str, fmt: str = "json") -> None:
    if fmt == "json":
        _write_json(path, report.to_dict())
    elif fmt == "csv":
        lines = ["k,rmse"]
        lines += [f"{i + 1},{_fmt(v)}" for i, v in enumerate(report.rmse)]
        _write_lines(path, lines)
    else:
        raise ValueError(f"unknown format {fmt!r}")


def field_grid(spec: guidance.LoiterSpec, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Sample the guidance field on a grid; rows are [x, y, vx, vy]."""
    xx, yy = np.meshgrid(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    vel = guidance.lyapunov_field(pts, spec)
    return np.column_stack([pts, vel])


def export_field_grid(grid: np.ndarray, path: str) -> None:
    lines = ["x,y,vx,vy"]
    lines += [",".join(_fmt(v) for v in row) for row in grid]
    _write_lines(path, lines)


def _write_lines(path: str, lines: list[str]) -> None:
    try:
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def _write_json(path: str, payload: dict) -> None:
    try:
        with open(path, "w") as fh:
            json.dump(payload, fh, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
