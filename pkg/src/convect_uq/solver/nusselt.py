"""Wall heat transfer diagnostics.

The local Nusselt number is the wall-normal temperature gradient divided
by the conductive flux of the 0.1 plate-to-plate temperature difference,
so pure conduction gives exactly 1. The wall gradient uses the one-sided
second-order formula through the wall value and the first two cell
centers (exact for quadratics):

    f'(wall) = (-8 f_wall + 9 f_{h/2} - f_{3h/2}) / (3 h)
"""

from __future__ import annotations

import numpy as np

from ..grid import StructuredGrid
from .config import BoundarySpec

DELTA_THETA = 0.1


def wall_gradient_one_sided(fw, f1, f2, h: float):
    """Derivative at the wall, positive pointing into the domain."""
    return (-8.0 * fw + 9.0 * f1 - f2) / (3.0 * h)


def nusselt_hot_wall(theta: np.ndarray, bc: BoundarySpec,
                     grid: StructuredGrid) -> np.ndarray:
    """Local Nu over the x=1 plate as an (n, n) array in (y, z)."""
    grad_inward = wall_gradient_one_sided(
        bc.hot_wall(grid), theta[-1], theta[-2], grid.h
    )
    # inward at x=1 is -x, so dtheta/dx = -grad_inward
    return -grad_inward / DELTA_THETA


def nusselt_cold_wall(theta: np.ndarray, bc: BoundarySpec,
                      grid: StructuredGrid) -> np.ndarray:
    """Local Nu over the x=0 plate as an (n, n) array in (y, z)."""
    grad_inward = wall_gradient_one_sided(
        bc.cold_wall(grid), theta[0], theta[1], grid.h
    )
    return grad_inward / DELTA_THETA


def mean_nusselt(nu_local: np.ndarray, grid: StructuredGrid) -> float:
    """Plate-averaged Nu: midpoint-rule integral over the unit wall."""
    return float(grid.h**2 * nu_local.sum())
