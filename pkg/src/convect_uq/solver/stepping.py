"""One fractional step: predictor, pressure projection, energy transport."""

from __future__ import annotations

import numpy as np

from ..errors import LinearSolverError
from ..grid import StructuredGrid
from .config import BoundarySpec, SolverConfig
from .kernels import (
    apply_operator,
    average_to_faces,
    cell_gradient,
    convect_scalar,
    correct_faces,
    face_divergence,
    operator_diagonal,
    pcg,
)
from .nusselt import DELTA_THETA
from .state import FlowState

# wall codes (x0, x1, y0, y1, z0, z1): 1 Dirichlet, 0 zero-normal-gradient
BC_VELOCITY = np.ones(6, dtype=np.int64)
BC_THETA = np.array([1, 1, 0, 0, 0, 0], dtype=np.int64)
BC_NEUMANN = np.zeros(6, dtype=np.int64)


def _solve(x, b, shift, coef, grid, bc, tol, maxiter, what,
           project=False, atol_inf=0.0):
    diag = operator_diagonal(grid.n, shift, coef, grid.h, bc)
    iters, relres, rinf = pcg(
        x, b, diag, shift, coef, grid.h, bc, tol, atol_inf, maxiter,
        1 if project else 0,
    )
    if relres > tol or (atol_inf > 0.0 and rinf > atol_inf):
        raise LinearSolverError(what, relres, iters)
    return iters


def solve_poisson(rhs: np.ndarray, grid: StructuredGrid, tol: float = 1.0e-8,
                  maxiter: int = 4000, x0: np.ndarray | None = None,
                  atol_inf: float = 0.0) -> np.ndarray:
    """Solve Laplacian(phi) = rhs with zero-flux walls; mean-free result.

    The incompatible part of the right-hand side (its mean) is removed
    before solving, matching the singular pure-Neumann operator. A positive
    ``atol_inf`` additionally bounds max|residual|; the projection step uses
    that to keep the corrected face divergence at the tolerance itself.
    """
    b = -(rhs - rhs.mean())
    phi = np.zeros_like(rhs) if x0 is None else x0
    phi -= phi.mean()
    _solve(phi, b, 0.0, 1.0, grid, BC_NEUMANN, tol, maxiter,
           "pressure Poisson solve", project=True, atol_inf=atol_inf)
    phi -= phi.mean()
    return phi


def theta_wall_rhs(bc: BoundarySpec, grid: StructuredGrid) -> np.ndarray:
    """Inhomogeneous Dirichlet contribution to Laplacian(theta).

    Ghost = 2*wall - interior splits into the homogeneous mirror handled
    by the operator plus this fixed 2*wall/h^2 source in the wall layers.
    """
    vec = np.zeros((grid.n,) * 3)
    vec[0] = 2.0 * bc.cold_wall(grid) / grid.h**2
    vec[-1] = 2.0 * bc.hot_wall(grid) / grid.h**2
    return vec


def advance(state: FlowState, cfg: SolverConfig, bc: BoundarySpec,
            grid: StructuredGrid, theta_rhs: np.ndarray | None = None) -> FlowState:
    """Advance one time step of size state.dt in place."""
    n = grid.n
    dt = state.dt
    nu = cfg.nu
    kap = cfg.kappa
    if theta_rhs is None:
        theta_rhs = theta_wall_rhs(bc, grid)

    # explicit convection of momentum, AB2 after the first step
    conv_u = np.empty_like(state.u)
    conv_v = np.empty_like(state.v)
    conv_w = np.empty_like(state.w)
    convect_scalar(conv_u, state.u, state.ufx, state.ufy, state.ufz, grid.h)
    convect_scalar(conv_v, state.v, state.ufx, state.ufy, state.ufz, grid.h)
    convect_scalar(conv_w, state.w, state.ufx, state.ufy, state.ufz, grid.h)
    if state.conv_u is None:
        eff_u, eff_v, eff_w = conv_u, conv_v, conv_w
    else:
        eff_u = 1.5 * conv_u - 0.5 * state.conv_u
        eff_v = 1.5 * conv_v - 0.5 * state.conv_v
        eff_w = 1.5 * conv_w - 0.5 * state.conv_w

    # predictor: (1/dt - nu/2 L) u* = u/dt - conv + (nu/2) L u [+ Pr*theta]
    lap = np.empty_like(state.u)
    shift = 1.0 / dt
    for comp, eff in ((state.u, eff_u), (state.v, eff_v), (state.w, eff_w)):
        apply_operator(lap, comp, 0.0, -1.0, grid.h, BC_VELOCITY)
        rhs = comp / dt - eff + 0.5 * nu * lap
        if comp is state.v and cfg.buoyancy:
            # deviation from the reference, normalized by the plate
            # contrast so Ra is the true plate Rayleigh number; the
            # hydrostatic part lives in the pressure gauge
            rhs += cfg.pr * (state.theta - cfg.theta_ref) / DELTA_THETA
        _solve(comp, rhs, shift, 0.5 * nu, grid, BC_VELOCITY,
               cfg.helmholtz_tol, cfg.max_cg_iter, "momentum solve")

    # projection: faces from momentum interpolation, compact divergence
    average_to_faces(state.u, state.v, state.w, state.ufx, state.ufy, state.ufz)
    div = np.empty_like(state.u)
    face_divergence(div, state.ufx, state.ufy, state.ufz, grid.h)
    # residual of this system times dt is exactly the leftover divergence,
    # so the absolute criterion pins max|div| <= poisson_tol after the fix
    state.phi = solve_poisson(div / dt, grid, cfg.poisson_tol,
                              cfg.max_cg_iter, x0=state.phi,
                              atol_inf=cfg.poisson_tol / dt)

    gx = np.empty_like(state.u)
    gy = np.empty_like(state.u)
    gz = np.empty_like(state.u)
    cell_gradient(state.phi, gx, gy, gz, grid.h)
    state.u -= dt * gx
    state.v -= dt * gy
    state.w -= dt * gz
    correct_faces(state.ufx, state.ufy, state.ufz, state.phi, dt, grid.h)

    # energy: explicit convection with the corrected (solenoidal) faces,
    # Crank-Nicolson diffusion with the fixed wall temperatures
    conv_t = np.empty_like(state.theta)
    convect_scalar(conv_t, state.theta, state.ufx, state.ufy, state.ufz, grid.h)
    apply_operator(lap, state.theta, 0.0, -1.0, grid.h, BC_THETA)
    rhs = state.theta / dt - conv_t + 0.5 * kap * lap + kap * theta_rhs
    _solve(state.theta, rhs, shift, 0.5 * kap, grid, BC_THETA,
           cfg.helmholtz_tol, cfg.max_cg_iter, "energy solve")

    state.conv_u, state.conv_v, state.conv_w = conv_u, conv_v, conv_w
    state.time += dt
    state.step += 1
    return state


def face_divergence_max(state: FlowState, grid: StructuredGrid) -> float:
    """Largest |div| of the corrected face velocity field."""
    div = np.empty_like(state.u)
    face_divergence(div, state.ufx, state.ufy, state.ufz, grid.h)
    return float(np.max(np.abs(div)))


def pressure_field(state: FlowState, cfg: SolverConfig,
                   grid: StructuredGrid) -> np.ndarray:
    """Recover pressure from the projection potential.

    p = phi - (nu * dt / 2) * Laplacian(phi), reported mean-free.
    """
    lap = np.empty_like(state.phi)
    apply_operator(lap, state.phi, 0.0, -1.0, grid.h, BC_NEUMANN)
    p = state.phi - 0.5 * cfg.nu * state.dt * lap
    return p - p.mean()
