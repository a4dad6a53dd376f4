"""Mutable flow state advanced by the time stepper."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class FlowState:
    """Cell-centered primary fields plus the face velocities that carry
    conservative fluxes and the previous momentum convection terms needed
    by the two-level explicit scheme (None until one step has run)."""

    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    ufx: np.ndarray
    ufy: np.ndarray
    ufz: np.ndarray
    conv_u: np.ndarray | None = None
    conv_v: np.ndarray | None = None
    conv_w: np.ndarray | None = None
    time: float = 0.0
    step: int = 0
    dt: float = field(default=0.0)

    @property
    def n(self) -> int:
        return self.theta.shape[0]

    def speed_max(self) -> float:
        """Largest cell-centered velocity magnitude component."""
        return max(
            float(np.max(np.abs(self.u))),
            float(np.max(np.abs(self.v))),
            float(np.max(np.abs(self.w))),
        )
