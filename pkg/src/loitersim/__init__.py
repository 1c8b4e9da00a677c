"""loitersim: seeded simulations of a UAV loitering over a maneuvering
ground target.

Subpackages by concern:
    gmt         jump-Markov target model
    uav         unicycle UAV plant with saturation and bounded disturbance
    guidance    discrete-time Lyapunov guidance vector field
    ismc        integral sliding-mode controller (plus PD/SMC baselines)
    sensors     camera/radar models, frames, Jacobians, gimbal pointing
    estimation  Rao-Blackwellised particle filter and EKF baseline
    harness     episode runner, Monte Carlo driver, config and export
    presets     named reference scenarios
"""

from .angles import wrap_pi
from .gmt import GmtState, GmtNoiseModel, ManeuverModel, build_system_matrices, sample_mode, step_gmt
from .uav import (
    ActuatorLimits,
    ControlInput,
    DisturbanceBounds,
    UavState,
    sample_bounded_disturbance,
    saturate,
    step_uav,
)
from .guidance import (
    GuidanceCommand,
    LoiterSpec,
    check_feasibility,
    cos_alpha,
    desired_command,
    lyapunov_field,
    radial_iterate,
)
from .ismc import DEFAULT_GAINS, GainSet, IsmcController, TrackingError, error_bound, validate_gains
from .sensors import CameraModel, GimbalAngles, Measurement, RadarModel
from .estimation import Estimate, ParticleSet, Rbpf, RbpfConfig, rmse
from .harness import (
    EpisodeTrace,
    MonteCarloReport,
    ScenarioConfig,
    load_config,
    run_episode,
    run_monte_carlo,
    save_config,
    validate_config,
)
from . import presets

__version__ = "0.1.0"

__all__ = [
    "ActuatorLimits", "CameraModel", "ControlInput", "DEFAULT_GAINS",
    "DisturbanceBounds", "Estimate", "EpisodeTrace", "GainSet", "GimbalAngles",
    "GmtNoiseModel", "GmtState", "GuidanceCommand", "IsmcController",
    "LoiterSpec", "ManeuverModel", "Measurement", "MonteCarloReport",
    "ParticleSet", "RadarModel", "Rbpf", "RbpfConfig", "ScenarioConfig",
    "TrackingError", "UavState", "build_system_matrices", "check_feasibility",
    "cos_alpha", "desired_command", "error_bound", "load_config",
    "lyapunov_field", "presets", "radial_iterate", "rmse", "run_episode",
    "run_monte_carlo", "sample_bounded_disturbance", "sample_mode",
    "saturate", "save_config", "step_gmt", "step_uav", "validate_config",
    "validate_gains", "wrap_pi",
]
