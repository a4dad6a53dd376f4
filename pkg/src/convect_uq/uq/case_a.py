"""Global-parameter study: polynomial chaos over (Ra, Pr).

Tensor-grid collocation runs feed least-squares expansion fits, one per
plane quantity plus a six-output scalar model (mean/max hot-wall Nu,
mean/max |u| and |v|). The fitted expansions carry the rest: moments,
total Sobol indices, the mean-Nu response surface, Monte Carlo field
statistics against the deterministic run at the input mean, and a
normalized RMS error on an independent Latin hypercube test set.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import EnsembleError
from ..grid import StructuredGrid
from ..pce import (
    PceModel,
    fit_surrogate,
    multi_indices,
    predict as pce_predict,
    response_surface,
    save_pce,
    total_sobol,
)
from ..sampling import SampleMatrix, normal_lhs, tensor_grid
from ..solver.config import SolverConfig
from .cases import CaseASpec
from .ensemble import (
    FILE_KEYS,
    PLANE_AXES,
    SCALAR_NAMES,
    collect_planes,
    reference_outputs,
    run_ensemble,
)
from .stats import normal_sampler, propagate_fields

# seed offsets keep the ensemble design, the test design, and the
# surrogate MC draws on unrelated streams
_TEST_SEED_OFFSET = 1
_MC_SEED_OFFSET = 2


@dataclass
class CaseAResult:
    manifest: object
    field_models: dict
    scalar_model: PceModel
    sobol: np.ndarray | None
    surface: tuple | None
    stats: dict
    fit_residual: float
    test_error: float | None
    excluded: list[int]


def _constant_model(spec: CaseASpec, outputs: np.ndarray) -> PceModel:
    """Expansion for the degenerate sigma=0 study: one sample, zero
    variance. Unit sigmas keep the standardization map well defined; all
    non-constant coefficients are exactly zero, so predictions are the
    constant regardless."""
    indices = multi_indices(spec.dims, spec.order)
    coeffs = np.zeros((indices.shape[0], outputs.size))
    coeffs[0] = outputs
    return PceModel(
        indices=indices,
        coeffs=coeffs,
        means=spec.means,
        sigmas=np.ones(spec.dims),
        fit_residual=np.zeros(outputs.size),
    )


def _normalized_rms(true: np.ndarray, pred: np.ndarray) -> float:
    scale = np.abs(true).max()
    return float(np.sqrt(np.mean((pred - true) ** 2)) / scale)


def collocation_design(spec: CaseASpec) -> SampleMatrix:
    """Tensor collocation points, or the single mean point at sigma=0."""
    if spec.sigma_fraction == 0.0:
        points = spec.means[None, :].copy()
        return SampleMatrix(points, seed=spec.seed, means=spec.means,
                            sigmas=spec.sigmas)
    points = tensor_grid(spec.level, spec.means, spec.sigmas)
    return SampleMatrix(points, seed=spec.seed, means=spec.means,
                        sigmas=spec.sigmas)


def test_design(spec: CaseASpec, n_test: int) -> SampleMatrix:
    return normal_lhs(n_test, spec.means, spec.sigmas,
                      spec.seed + _TEST_SEED_OFFSET)


def fit_study_models(spec: CaseASpec, manifest):
    """Fit one expansion per plane quantity plus the six-scalar model."""
    done = manifest.done_rows()
    degenerate = spec.sigma_fraction == 0.0
    pts_ok = np.array([r.inputs for r in done])
    scalar_true = np.array([r.scalars for r in done])
    field_models = {}
    for key in FILE_KEYS:
        planes = collect_planes(manifest, key)
        flat = planes.reshape(planes.shape[0], -1)
        if degenerate:
            field_models[key] = _constant_model(spec, flat[0])
        else:
            field_models[key] = fit_surrogate(
                pts_ok, flat, spec.means, spec.sigmas, spec.order
            )
    if degenerate:
        scalar_model = _constant_model(spec, scalar_true[0])
    else:
        scalar_model = fit_surrogate(
            pts_ok, scalar_true, spec.means, spec.sigmas, spec.order
        )
    return field_models, scalar_model


def save_study_models(models_dir, field_models, scalar_model) -> None:
    models_dir = Path(models_dir)
    models_dir.mkdir(parents=True, exist_ok=True)
    for key, model in field_models.items():
        save_pce(models_dir / f"{key}.pce", model)
    save_pce(models_dir / "scalars.pce", scalar_model)


def write_sobol_table(path, sobol: np.ndarray, output_names, input_names) -> None:
    with open(path, "w") as fh:
        fh.write("output," + ",".join(f"{n}_total" for n in input_names) + "\n")
        for j, name in enumerate(output_names):
            fh.write(name + "".join(",%.17g" % s for s in sobol[:, j]) + "\n")


def write_response_surface_csv(path, surface) -> None:
    ra_ax, pr_ax, vals = surface
    with open(path, "w") as fh:
        fh.write("ra,pr,nu_mean\n")
        for i, ra in enumerate(ra_ax):
            for j, pr in enumerate(pr_ax):
                fh.write("%.17g,%.17g,%.17g\n" % (ra, pr, vals[i, j]))


def mean_nu_test_error(scalar_model: PceModel, manifest) -> float:
    """Normalized RMS error of the surrogate mean Nu on a test ensemble."""
    done = manifest.done_rows()
    if not done:
        raise EnsembleError("every test sample failed")
    pts = np.array([r.inputs for r in done])
    true = np.array([r.scalars[0] for r in done])
    pred = pce_predict(scalar_model, pts)[:, 0]
    return _normalized_rms(true, pred)


def propagate_study(spec: CaseASpec, cfg: SolverConfig, grid, field_models,
                    out_dir, mc_samples: int, *, run_fn=None):
    """MC field statistics through the expansions vs the mean-input run."""
    det_planes, _ = reference_outputs(spec, cfg, grid, run_fn=run_fn)
    predicts = {
        key: (lambda x, m=field_models[key]: pce_predict(m, x))
        for key in FILE_KEYS
    }
    sampler = normal_sampler(spec.means, spec.sigmas)
    return propagate_fields(
        predicts, sampler, det_planes, PLANE_AXES, grid,
        Path(out_dir) / "stats", mc_samples, spec.seed + _MC_SEED_OFFSET,
    )


def case_a_pipeline(
    spec: CaseASpec,
    cfg: SolverConfig,
    grid: StructuredGrid,
    out_dir,
    *,
    n_test: int = 30,
    mc_samples: int = 10_000,
    run_fn=None,
    workers: int = 1,
) -> CaseAResult:
    """Run the full (Ra, Pr) study below ``out_dir``.

    Artifacts: the collocation ensemble (and, when ``n_test`` > 0, a test
    ensemble) with their manifests, fitted expansion files, a Sobol table
    CSV, the mean-Nu response surface CSV, per-quantity statistics planes
    with JSON summaries, and a one-line summary.json.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    degenerate = spec.sigma_fraction == 0.0
    manifest = run_ensemble(
        spec, collocation_design(spec), cfg, grid, out_dir / "ensemble",
        run_fn=run_fn, workers=workers,
    )
    excluded = [r.sample_id for r in manifest.rows if r.status != "done"]

    field_models, scalar_model = fit_study_models(spec, manifest)
    if degenerate:
        sobol = None
        surface = None
        fit_residual = 0.0
    else:
        sobol = total_sobol(scalar_model)
        surface = response_surface(scalar_model, output=0)
        fit_residual = float(scalar_model.fit_residual[0])

    save_study_models(out_dir / "models", field_models, scalar_model)
    if sobol is not None:
        write_sobol_table(out_dir / "sobol.csv", sobol, SCALAR_NAMES,
                          ("ra", "pr"))
    if surface is not None:
        write_response_surface_csv(
            out_dir / "response_surface_nu_mean.csv", surface
        )

    stats, _ = propagate_study(
        spec, cfg, grid, field_models, out_dir, mc_samples, run_fn=run_fn
    )

    test_error = None
    if n_test > 0 and not degenerate:
        test_manifest = run_ensemble(
            spec, test_design(spec, n_test), cfg, grid, out_dir / "test",
            run_fn=run_fn, workers=workers,
        )
        test_error = mean_nu_test_error(scalar_model, test_manifest)

    summary = {
        "mu_ra": spec.mu_ra,
        "level": spec.level,
        "order": spec.order,
        "n_samples": manifest.n_samples,
        "n_failed": manifest.n_failed,
        "fit_residual": fit_residual,
        "test_error": test_error,
    }
    with open(out_dir / "summary.json", "w") as fh:
        fh.write(json.dumps(summary) + "\n")

    return CaseAResult(
        manifest=manifest,
        field_models=field_models,
        scalar_model=scalar_model,
        sobol=sobol,
        surface=surface,
        stats=stats,
        fit_residual=fit_residual,
        test_error=test_error,
        excluded=excluded,
    )
