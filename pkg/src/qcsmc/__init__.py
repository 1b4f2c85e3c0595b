"""Modified quasi-continuous second-order sliding-mode control of a perturbed double integrator.

Closed-form unperturbed solutions, a fixed-step closed-loop simulator,
Lyapunov checks and a batch CLI that emits plot-ready CSV/JSON data.
"""

from .controller import MODIFIED, ORIGINAL, control, control_modified, control_original
from .core import (
    Constant,
    ControlParams,
    Sinusoid,
    SimConfig,
    State,
    Table,
    Trajectory,
    UniformRandom,
    Zero,
    config_from_dict,
    load_config,
    validate_config,
)
from .simulator import compare_with_analytic, simulate

__version__ = "0.1.0"

__all__ = [
    "MODIFIED",
    "ORIGINAL",
    "Constant",
    "ControlParams",
    "SimConfig",
    "Sinusoid",
    "State",
    "Table",
    "Trajectory",
    "UniformRandom",
    "Zero",
    "compare_with_analytic",
    "config_from_dict",
    "control",
    "control_modified",
    "control_original",
    "load_config",
    "simulate",
    "validate_config",
]
