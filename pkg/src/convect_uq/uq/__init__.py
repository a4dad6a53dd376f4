"""Case orchestration: stochastic input specs, solver ensembles, surrogate
propagation, and shift-of-mean statistics."""

from .cases import CaseASpec, CaseBSpec, make_strip_boundary
from .ensemble import EnsembleManifest, ManifestRow, read_manifest, run_ensemble
from .stats import (
    StatFields,
    monte_carlo_stats,
    normal_sampler,
    shift_of_mean,
    stat_fields,
    write_stat_fields,
)
from .case_a import CaseAResult, case_a_pipeline
from .case_b import CaseBResult, case_b_pipeline, strip_band_variance_ratio

__all__ = [
    "CaseASpec",
    "CaseBSpec",
    "make_strip_boundary",
    "EnsembleManifest",
    "ManifestRow",
    "read_manifest",
    "run_ensemble",
    "StatFields",
    "monte_carlo_stats",
    "normal_sampler",
    "shift_of_mean",
    "stat_fields",
    "write_stat_fields",
    "CaseAResult",
    "case_a_pipeline",
    "CaseBResult",
    "case_b_pipeline",
    "strip_band_variance_ratio",
]
