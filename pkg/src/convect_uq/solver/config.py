"""Solver configuration and thermal wall boundary description."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError
from ..grid import StructuredGrid


@dataclass(frozen=True)
class SolverConfig:
    """Physical and numerical parameters for one cavity run.

    Momentum diffusivity is Pr/sqrt(Ra), thermal diffusivity 1/sqrt(Ra);
    buoyancy enters the +y momentum equation as Pr*Theta (gravity points
    -y). ``dt`` fixes the step size; when None the step adapts every
    ``dt_update_interval`` steps to ``cfl_target * h / max(|u|, 0.1)``.
    """

    ra: float = 1.0e5
    pr: float = 7.5
    dt: float | None = None
    cfl_target: float = 0.5
    steady_tol: float = 1.0e-4
    max_steps: int = 40000
    poisson_tol: float = 1.0e-8
    helmholtz_tol: float = 1.0e-9
    max_cg_iter: int = 4000
    blowup_threshold: float = 1.0e6
    dt_update_interval: int = 10
    buoyancy: bool = True
    # reference temperature of the reduced-pressure gauge; the hydrostatic
    # part Pr*theta_ref*y is carried by the pressure, not the momentum rhs
    theta_ref: float = 1.0

    def __post_init__(self):
        if self.ra <= 0 or self.pr <= 0:
            raise ConfigError("Ra and Pr must be positive")
        if self.dt is not None and self.dt <= 0:
            raise ConfigError("dt must be positive when given")
        if not 0 < self.cfl_target <= 1.0:
            raise ConfigError("cfl_target must lie in (0, 1]")
        if self.steady_tol <= 0 or self.poisson_tol <= 0 or self.helmholtz_tol <= 0:
            raise ConfigError("tolerances must be positive")
        if self.max_steps < 1 or self.max_cg_iter < 1:
            raise ConfigError("step and iteration caps must be >= 1")

    @property
    def nu(self) -> float:
        """Nondimensional kinematic viscosity."""
        return self.pr / np.sqrt(self.ra)

    @property
    def kappa(self) -> float:
        """Nondimensional thermal diffusivity."""
        return 1.0 / np.sqrt(self.ra)


@dataclass(frozen=True)
class BoundarySpec:
    """Thermal wall values: cold plate at x=0, hot plate at x=1.

    The hot plate is either uniform at ``hot_value`` or split into
    ``strip_values.size`` equal-width strips along y (each strip spans the
    full z extent). Remaining walls are adiabatic; all walls are no-slip.
    """

    cold_value: float = 0.95
    hot_value: float = 1.05
    strip_values: np.ndarray | None = field(default=None)

    def __post_init__(self):
        if self.strip_values is not None:
            sv = np.asarray(self.strip_values, dtype=np.float64)
            if sv.ndim != 1 or sv.size < 1:
                raise ConfigError("strip_values must be a non-empty 1D array")
            if not np.all(np.isfinite(sv)):
                raise ConfigError("strip_values must be finite")
            object.__setattr__(self, "strip_values", sv)

    def strip_index(self, y: np.ndarray) -> np.ndarray:
        """Strip owning coordinate y; y = 1.0 belongs to the last strip."""
        k = self.strip_values.size
        return np.minimum((np.asarray(y) * k).astype(int), k - 1)

    def hot_wall(self, grid: StructuredGrid) -> np.ndarray:
        """Hot-plate temperature sampled at the (y, z) cell centers."""
        if self.strip_values is None:
            return np.full((grid.n, grid.n), self.hot_value)
        per_layer = self.strip_values[self.strip_index(grid.cell_centers())]
        return np.repeat(per_layer[:, None], grid.n, axis=1)

    def cold_wall(self, grid: StructuredGrid) -> np.ndarray:
        return np.full((grid.n, grid.n), self.cold_value)
