"""Predictive online forward-backward and primal-dual splitting for dynamic imaging."""
from . import diagnostics, flow, grid, proxops, solvers, steprules
from .grid import Displacement, div, gaussian_convolve, grad, operator_norm_sq, warp
from .solvers import PofbSolver, PopdSolver, run_online
from .steprules import StepConfig, constant_steps, validate_conditions

__version__ = "0.1.0"

__all__ = [
    "diagnostics",
    "flow",
    "grid",
    "proxops",
    "solvers",
    "steprules",
    "Displacement",
    "div",
    "gaussian_convolve",
    "grad",
    "operator_norm_sq",
    "warp",
    "PofbSolver",
    "PopdSolver",
    "run_online",
    "StepConfig",
    "constant_steps",
    "validate_conditions",
]
