"""Incompressible Boussinesq solver on a collocated cell-centered grid.

Fractional-step time integration: explicit AB2 convection and implicit
Crank-Nicolson diffusion in the predictor, a pure-Neumann pressure Poisson
solve, then velocity correction on cells (wide gradient) and faces (compact
gradient). Face velocities carry the conservative fluxes, so the discrete
divergence lives on faces.
"""

from .config import BoundarySpec, SolverConfig
from .driver import (
    SteadyReport,
    initial_state,
    richardson_extrapolate,
    run_to_steady,
)
from .nusselt import (
    mean_nusselt,
    nusselt_cold_wall,
    nusselt_hot_wall,
    wall_gradient_one_sided,
)
from .state import FlowState
from .stepping import advance, pressure_field, solve_poisson

__all__ = [
    "BoundarySpec",
    "SolverConfig",
    "FlowState",
    "SteadyReport",
    "initial_state",
    "run_to_steady",
    "advance",
    "solve_poisson",
    "pressure_field",
    "nusselt_hot_wall",
    "nusselt_cold_wall",
    "mean_nusselt",
    "wall_gradient_one_sided",
    "richardson_extrapolate",
]
