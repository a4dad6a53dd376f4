"""March the cavity to steady state and extrapolate grid sequences."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import BlowupError, FitError, NonConvergenceError
from ..grid import StructuredGrid
from .config import BoundarySpec, SolverConfig
from .state import FlowState
from .stepping import advance, face_divergence_max, theta_wall_rhs

log = logging.getLogger("convect_uq.solver")

_FIELDS = ("u", "v", "w", "theta")


@dataclass
class SteadyReport:
    """Diagnostics from one steady-state run."""

    steps: int
    time: float
    errors: dict[str, float]
    div_max: float
    history: np.ndarray = field(repr=False)  # columns: step, per-field errors


def initial_state(grid: StructuredGrid, cfg: SolverConfig) -> FlowState:
    """Quiescent fluid at the mean plate temperature."""
    n = grid.n
    z = lambda: np.zeros((n, n, n))
    dt = cfg.dt if cfg.dt is not None else cfg.cfl_target * grid.h / 0.1
    return FlowState(
        u=z(), v=z(), w=z(), theta=np.ones((n, n, n)), phi=z(),
        ufx=np.zeros((n + 1, n, n)), ufy=np.zeros((n, n + 1, n)),
        ufz=np.zeros((n, n, n + 1)), dt=dt,
    )


def _relative_changes(state: FlowState, prev: dict[str, np.ndarray]) -> dict[str, float]:
    out = {}
    for name in _FIELDS:
        new = getattr(state, name)
        num = float(np.max(np.abs(new - prev[name])))
        den = float(np.max(np.abs(new)))
        out[name] = num / den if den > 0.0 else num
    return out


def run_to_steady(
    cfg: SolverConfig,
    bc: BoundarySpec,
    grid: StructuredGrid,
    monitor=None,
) -> tuple[FlowState, SteadyReport]:
    """Advance until every field's per-step relative change drops below
    cfg.steady_tol. Raises NonConvergenceError at the step cap and
    BlowupError if any field norm passes the blow-up threshold.

    ``monitor(state)`` runs after every step when given.
    """
    state = initial_state(grid, cfg)
    theta_rhs = theta_wall_rhs(bc, grid)
    prev = {name: getattr(state, name).copy() for name in _FIELDS}
    hist = []
    div_max = 0.0
    errors: dict[str, float] = {}
    for _ in range(cfg.max_steps):
        if cfg.dt is None and state.step % cfg.dt_update_interval == 0:
            state.dt = cfg.cfl_target * grid.h / max(state.speed_max(), 0.1)
        for name in _FIELDS:
            np.copyto(prev[name], getattr(state, name))
        advance(state, cfg, bc, grid, theta_rhs)
        errors = _relative_changes(state, prev)
        hist.append((state.step, errors["u"], errors["v"], errors["w"],
                     errors["theta"]))
        for name in _FIELDS:
            if not np.isfinite(errors[name]):
                raise BlowupError(f"{name} became non-finite at step {state.step}")
        if max(np.max(np.abs(state.theta)), state.speed_max()) > cfg.blowup_threshold:
            raise BlowupError(f"field norm exceeded {cfg.blowup_threshold:g} "
                              f"at step {state.step}")
        div_max = max(div_max, face_divergence_max(state, grid))
        if monitor is not None:
            monitor(state)
        if state.step % 200 == 0:
            log.debug("step %d t=%.4f dt=%.3e errors=%s", state.step,
                      state.time, state.dt,
                      {k: f"{v:.2e}" for k, v in errors.items()})
        if all(errors[name] < cfg.steady_tol for name in _FIELDS):
            log.info("steady after %d steps (t=%.3f, max |div|=%.2e)",
                     state.step, state.time, div_max)
            return state, SteadyReport(
                steps=state.step, time=state.time, errors=errors,
                div_max=div_max, history=np.asarray(hist),
            )
    raise NonConvergenceError(
        f"no steady state within {cfg.max_steps} steps; "
        f"last relative changes {errors}"
    )


def richardson_extrapolate(values, spacings) -> tuple[float, float]:
    """Extrapolate a three-grid sequence with arbitrary spacing ratios.

    Fits f(h) = f_inf + C h^p through (h_i, f_i), coarsest first, by
    bisecting on the observed order p. Returns (f_inf, p).
    """
    f = np.asarray(values, dtype=np.float64)
    h = np.asarray(spacings, dtype=np.float64)
    if f.shape != (3,) or h.shape != (3,) or not (h[0] > h[1] > h[2] > 0):
        raise FitError("need three values with strictly decreasing spacings")
    d1, d2 = f[0] - f[1], f[1] - f[2]
    if d2 == 0.0 or d1 * d2 <= 0.0 or abs(d1) <= abs(d2):
        raise FitError("grid sequence is not monotonically converging")
    target = d1 / d2

    def ratio(p):
        return (h[0] ** p - h[1] ** p) / (h[1] ** p - h[2] ** p)

    lo, hi = 1.0e-3, 16.0
    if not ratio(lo) < target < ratio(hi):
        raise FitError(f"observed ratio {target:.3f} outside the order window")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if ratio(mid) < target:
            lo = mid
        else:
            hi = mid
    p = 0.5 * (lo + hi)
    f_inf = f[2] - d2 * h[2] ** p / (h[1] ** p - h[2] ** p)
    return float(f_inf), float(p)
