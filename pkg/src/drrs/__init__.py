"""Simulation lab for a dual-rotor rotational rig.

Plant dynamics, strict-feedback model, finite-time parameter estimation,
adaptive input-output linearizing control, and scripted closed-loop scenarios
with CSV/SVG output.
"""

from .dynamics import PhysicalParams, default_params
from .errors import (
    DrrsError,
    NonConvergence,
    NoStabilizingGain,
    NotHurwitz,
    ParseError,
    SingularControlAuthority,
    SingularityError,
    ValidationError,
)
from .estimator import EstimatorConfig, EstimatorState
from .harness import (
    Command,
    ControllerSettings,
    OutputSettings,
    RunMetrics,
    ScenarioConfig,
    SimSettings,
    Trace,
    default_scenario,
    run_axis_sweep,
    run_inertia_sweep,
    run_rotor_coeff_sweep,
    run_scenario,
)

__version__ = "0.1.0"

__all__ = [
    "Command",
    "ControllerSettings",
    "DrrsError",
    "EstimatorConfig",
    "EstimatorState",
    "NoStabilizingGain",
    "NonConvergence",
    "NotHurwitz",
    "OutputSettings",
    "ParseError",
    "PhysicalParams",
    "RunMetrics",
    "ScenarioConfig",
    "SimSettings",
    "SingularControlAuthority",
    "SingularityError",
    "Trace",
    "ValidationError",
    "__version__",
    "default_params",
    "default_scenario",
    "run_axis_sweep",
    "run_inertia_sweep",
    "run_rotor_coeff_sweep",
    "run_scenario",
]
