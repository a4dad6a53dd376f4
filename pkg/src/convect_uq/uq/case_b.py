"""Strip-heated wall study: neural network surrogates over K strip
temperatures.

Three Latin hypercube ensembles (train/validation/test, consecutive
seeds) feed four networks, one per output quantity. The trained networks
then stand in for the solver: 10^4 Monte Carlo draws of the strip
temperatures give mean and std fields, compared against the
deterministic run with the wall uniform at 1.05.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from ..dnn import (
    Dataset,
    MlpNetwork,
    TrainConfig,
    he_network,
    predict as mlp_predict,
    preset,
    relative_average_percent_error,
    save_mlp,
    train,
)
from ..errors import ConfigError, DimensionError, EnsembleError
from ..grid import StructuredGrid
from ..sampling import normal_lhs
from ..solver.config import SolverConfig
from .cases import CaseBSpec
from .ensemble import (
    FILE_KEYS,
    PLANE_AXES,
    collect_planes,
    reference_outputs,
    run_ensemble,
)
from .stats import normal_sampler, propagate_fields

# one surrogate per output quantity, named after the production presets
QUANTITY_PRESETS = {
    "nu": "nusselt-wall",
    "theta": "temperature-midplane",
    "u": "x-velocity-midplane",
    "v": "y-velocity-midplane",
}
_SET_NAMES = ("train", "val", "test")
_MC_SEED_OFFSET = 3
_INIT_SEED_OFFSET = 10
_TRAIN_SEED_OFFSET = 20
OVERFIT_FACTOR = 5.0


@dataclass
class CaseBResult:
    manifests: dict
    networks: dict[str, MlpNetwork]
    histories: dict
    error_table: dict
    stats: dict
    warnings: list[str]
    excluded: dict


def strip_band_variance_ratio(values, strips: int, grid: StructuredGrid) -> float:
    """Band structure strength of a wall field under K strips.

    Rows of ``values`` follow y. |values| is averaged per strip band; the
    variance of those band means over the mean within-band variance says
    whether the strip demarcations dominate the field (ratio >> 1) or
    drown in smooth variation (ratio ~ 1).
    """
    d = np.abs(np.asarray(values, dtype=np.float64))
    if d.shape[0] != grid.n:
        raise DimensionError(f"field has {d.shape[0]} rows, grid has {grid.n}")
    band = np.minimum((grid.cell_centers() * strips).astype(int), strips - 1)
    means = np.array([d[band == s].mean() for s in range(strips)])
    within = np.array([d[band == s].var() for s in range(strips)])
    if within.mean() == 0.0:
        return float("inf")
    return float(means.var() / within.mean())


def set_design(spec: CaseBSpec, name: str):
    """Latin hypercube for one of the train/val/test sets."""
    if name not in _SET_NAMES:
        raise ConfigError(f"unknown sample set {name!r}")
    return normal_lhs(
        getattr(spec, f"n_{name}"), spec.means, spec.sigmas,
        spec.seed + _SET_NAMES.index(name),
    )


def set_arrays(manifest):
    """Inputs and flattened output planes of a manifest's done rows."""
    inputs = np.array([r.inputs for r in manifest.done_rows()])
    planes = {
        key: collect_planes(manifest, key).reshape(manifest.n_done, -1)
        for key in FILE_KEYS
    }
    return inputs, planes


def train_quantity_networks(spec: CaseBSpec, scale: str, base_cfg: TrainConfig,
                            inputs: dict, planes: dict):
    """One network per output quantity; returns nets, histories, errors.

    The regularization strength comes from the per-quantity preset and
    the init/shuffle seeds from ``spec.seed``; everything else follows
    ``base_cfg``. Error-table percentages are physical-unit RAPE on the
    train and test sets, with a warning string per quantity whose test
    error exceeds OVERFIT_FACTOR times its train error.
    """
    if scale not in ("desk", "paper"):
        raise ConfigError(f"scale must be 'desk' or 'paper', got {scale!r}")
    networks = {}
    histories = {}
    error_table = {}
    warnings = []
    for i, key in enumerate(FILE_KEYS):
        name = QUANTITY_PRESETS[key]
        p = preset(name if scale == "paper" else f"desk-{name}")
        sizes = (spec.strips, *p.hidden, planes["train"][key].shape[1])
        net = he_network(sizes, seed=spec.seed + _INIT_SEED_OFFSET + i)
        run_cfg = replace(
            base_cfg,
            l2_penalty=p.l2_penalty,
            seed=spec.seed + _TRAIN_SEED_OFFSET + i,
        )
        train_set = Dataset.standardized(inputs["train"], planes["train"][key])
        val_set = Dataset(inputs["val"], planes["val"][key])
        trained, history = train(net, train_set, val_set, run_cfg)
        networks[key] = trained
        histories[key] = history
        errs = {}
        for set_name in ("train", "test"):
            errs[set_name] = relative_average_percent_error(
                planes[set_name][key], mlp_predict(trained, inputs[set_name])
            )
        error_table[key] = errs
        if errs["test"] > OVERFIT_FACTOR * errs["train"] and errs["train"] > 0:
            warnings.append(
                f"{key}: test error {errs['test']:.3g}% exceeds "
                f"{OVERFIT_FACTOR:g}x train error {errs['train']:.3g}%"
            )
    return networks, histories, error_table, warnings


def write_error_table(path, scale: str, error_table: dict, warnings) -> None:
    with open(path, "w") as fh:
        fh.write(json.dumps({"scale": scale, "errors": error_table,
                             "warnings": list(warnings)}) + "\n")


def propagate_study(spec: CaseBSpec, cfg: SolverConfig, grid, networks,
                    out_dir, mc_samples: int, *, run_fn=None):
    """MC field statistics through the networks vs the uniform-wall run."""
    det_planes, _ = reference_outputs(spec, cfg, grid, run_fn=run_fn)
    predicts = {
        key: (lambda x, net=networks[key]: mlp_predict(net, x))
        for key in FILE_KEYS
    }
    sampler = normal_sampler(spec.means, spec.sigmas)
    return propagate_fields(
        predicts, sampler, det_planes, PLANE_AXES, grid,
        Path(out_dir) / "stats", mc_samples, spec.seed + _MC_SEED_OFFSET,
    )


def case_b_pipeline(
    spec: CaseBSpec,
    cfg: SolverConfig,
    grid: StructuredGrid,
    out_dir,
    *,
    scale: str = "desk",
    train_cfg: TrainConfig | None = None,
    mc_samples: int = 10_000,
    run_fn=None,
    workers: int = 1,
) -> CaseBResult:
    """Run the full strip study below ``out_dir``.

    ``scale`` selects the production presets or their desk-size
    counterparts. ``train_cfg`` overrides the optimizer settings; the
    regularization strength always comes from the per-quantity preset
    and the seeds from ``spec.seed``. Artifacts: three ensemble
    directories, trained model files, an error-table JSON, and the
    per-quantity statistics planes with summaries.
    """
    if scale not in ("desk", "paper"):
        raise ConfigError(f"scale must be 'desk' or 'paper', got {scale!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    base_cfg = train_cfg if train_cfg is not None else TrainConfig(
        learning_rate=3e-3, epochs=500, batch_size=32
    )

    manifests = {}
    excluded = {}
    inputs = {}
    planes = {}
    for name in _SET_NAMES:
        man = run_ensemble(
            spec, set_design(spec, name), cfg, grid, out_dir / name,
            run_fn=run_fn, workers=workers,
        )
        if not man.done_rows():
            raise EnsembleError(f"every sample in the {name} set failed")
        manifests[name] = man
        excluded[name] = [r.sample_id for r in man.rows if r.status != "done"]
        inputs[name], planes[name] = set_arrays(man)

    networks, histories, error_table, warnings = train_quantity_networks(
        spec, scale, base_cfg, inputs, planes
    )
    models_dir = out_dir / "models"
    models_dir.mkdir(exist_ok=True)
    for key, net in networks.items():
        save_mlp(models_dir / f"{key}.mlp", net)
    write_error_table(out_dir / "error_table.json", scale, error_table,
                      warnings)

    stats, _ = propagate_study(
        spec, cfg, grid, networks, out_dir, mc_samples, run_fn=run_fn
    )

    return CaseBResult(
        manifests=manifests,
        networks=networks,
        histories=histories,
        error_table=error_table,
        stats=stats,
        warnings=warnings,
        excluded=excluded,
    )
