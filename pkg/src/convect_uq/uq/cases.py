"""Stochastic input specifications for the two cavity studies.

Case A perturbs the two global parameters: Ra and Pr are independent
normals with sigma a fixed fraction (2% by default) of the mean. Case B
keeps Ra and Pr fixed and splits the hot wall into K strips whose
temperatures are i.i.d. Normal(1.05, 0.01/3), so three sigmas span the
0.01 half-gap between the plates and the mean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..solver.config import BoundarySpec

PR_MEAN = 7.5
STRIP_MEAN = 1.05
STRIP_SIGMA = 0.01 / 3.0
CASE_B_RA = 1.0e6
ALLOWED_MU_RA = (1.0e5, 1.0e6)
ALLOWED_STRIPS = (4, 8, 16, 32)


@dataclass(frozen=True)
class CaseASpec:
    """Two-parameter study: Ra ~ N(mu_ra, f*mu_ra), Pr ~ N(7.5, f*7.5).

    ``sigma_fraction`` defaults to the standard 2%; zero is allowed and
    collapses the study to a single deterministic run (useful as a
    degeneracy check). ``level`` is the one-dimensional quadrature size,
    so the tensor design has level**2 points; ``order`` is the total
    polynomial degree of the expansion fitted to them.
    """

    mu_ra: float
    level: int
    order: int
    seed: int = 0
    sigma_fraction: float = 0.02

    def __post_init__(self):
        if self.mu_ra not in ALLOWED_MU_RA:
            raise ConfigError(
                f"mu_ra must be one of {ALLOWED_MU_RA}, got {self.mu_ra!r}"
            )
        if int(self.level) != self.level or self.level < 1:
            raise ConfigError(f"level must be a positive integer, got {self.level!r}")
        if int(self.order) != self.order or self.order < 0:
            raise ConfigError(f"order must be a non-negative integer, got {self.order!r}")
        if self.level < self.order + 1:
            raise ConfigError(
                f"level {self.level} cannot resolve order {self.order}; "
                "need level >= order + 1"
            )
        if not 0.0 <= self.sigma_fraction <= 0.5:
            raise ConfigError("sigma_fraction must lie in [0, 0.5]")

    @property
    def means(self) -> np.ndarray:
        return np.array([self.mu_ra, PR_MEAN])

    @property
    def sigmas(self) -> np.ndarray:
        return self.sigma_fraction * self.means

    @property
    def dims(self) -> int:
        return 2


@dataclass(frozen=True)
class CaseBSpec:
    """Strip-heated hot wall at fixed Ra=1e6, Pr=7.5.

    The stochastic dimension equals the strip count; train/validation/
    test ensembles are drawn with consecutive seeds so the three designs
    are distinct but reproducible from the one ``seed`` field.
    """

    strips: int
    n_train: int
    n_val: int
    n_test: int
    seed: int = 0

    def __post_init__(self):
        if self.strips not in ALLOWED_STRIPS:
            raise ConfigError(
                f"strip count must be one of {ALLOWED_STRIPS}, got {self.strips!r}"
            )
        for name in ("n_train", "n_val", "n_test"):
            count = getattr(self, name)
            if int(count) != count or count < 2:
                raise ConfigError(f"{name} must be an integer >= 2, got {count!r}")

    @property
    def means(self) -> np.ndarray:
        return np.full(self.strips, STRIP_MEAN)

    @property
    def sigmas(self) -> np.ndarray:
        return np.full(self.strips, STRIP_SIGMA)

    @property
    def dims(self) -> int:
        return self.strips

    @property
    def ra(self) -> float:
        return CASE_B_RA

    @property
    def pr(self) -> float:
        return PR_MEAN


def make_strip_boundary(temps) -> BoundarySpec:
    """Hot wall split into len(temps) equal-height bands stacked along y.

    Band s imposes temps[s] for y in [s/K, (s+1)/K); the top edge y=1
    belongs to the last band. Every band spans the full z extent and the
    cold wall stays at 0.95.
    """
    temps = np.asarray(temps, dtype=np.float64)
    if temps.ndim != 1 or temps.size < 1:
        raise ConfigError("strip temperatures must form a non-empty 1D array")
    return BoundarySpec(strip_values=temps)
