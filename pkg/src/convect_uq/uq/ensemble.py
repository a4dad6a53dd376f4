"""Solver ensembles over sample matrices, tracked by an on-disk manifest.

Each sample becomes one steady cavity run. The manifest CSV records the
physical inputs, a status (pending/done/failed), six scalar summaries
(mean/max hot-wall Nu, mean/max |u| and |v| over the cube), and the four
per-sample field files: the hot-wall Nu plane and the z=0.5 midplane
theta/u/v slices. The manifest is rewritten after every sample, so an
interrupted ensemble resumes where it stopped; done rows are never run
again unless their files have gone missing or unreadable.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from ..errors import (
    BlowupError,
    ConfigError,
    DimensionError,
    EnsembleError,
    FieldFormatError,
    LinearSolverError,
    NonConvergenceError,
    SamplingError,
)
from ..grid import StructuredGrid, midplane_slice, read_plane_csv, write_plane_csv
from ..sampling import SampleMatrix, write_samples_csv
from ..solver.config import BoundarySpec, SolverConfig
from ..solver.driver import run_to_steady
from ..solver.nusselt import mean_nusselt, nusselt_hot_wall
from .cases import CaseASpec, CaseBSpec, make_strip_boundary

STATUSES = ("pending", "done", "failed")
FILE_KEYS = ("nu", "theta", "u", "v")
PLANE_AXES = {
    "nu": ("y", "z"),
    "theta": ("x", "y"),
    "u": ("x", "y"),
    "v": ("x", "y"),
}
SCALAR_NAMES = ("nu_mean", "nu_max", "absu_mean", "absu_max", "absv_mean", "absv_max")
# solver outcomes that mark a sample failed instead of aborting the sweep
_SAMPLE_FAILURES = (BlowupError, NonConvergenceError, LinearSolverError)


@dataclass
class ManifestRow:
    sample_id: int
    status: str
    inputs: np.ndarray
    scalars: np.ndarray
    files: tuple[str, str, str, str]


@dataclass
class EnsembleManifest:
    rows: list[ManifestRow]
    seed: int
    spec_hash: str
    directory: Path

    @property
    def n_samples(self) -> int:
        return len(self.rows)

    @property
    def n_done(self) -> int:
        return sum(r.status == "done" for r in self.rows)

    @property
    def n_failed(self) -> int:
        return sum(r.status == "failed" for r in self.rows)

    def done_rows(self) -> list[ManifestRow]:
        return [r for r in self.rows if r.status == "done"]

    def inputs_matrix(self) -> np.ndarray:
        return np.array([r.inputs for r in self.rows])


def spec_hash(spec, samples: SampleMatrix, cfg: SolverConfig, grid) -> str:
    """Fingerprint of everything that determines the ensemble's outputs."""
    h = hashlib.sha256()
    h.update(repr(spec).encode())
    h.update(repr(cfg).encode())
    h.update(str(grid.n).encode())
    h.update(np.ascontiguousarray(samples.values, dtype=np.float64).tobytes())
    return h.hexdigest()[:16]


def write_manifest(path, manifest: EnsembleManifest) -> None:
    dims = manifest.rows[0].inputs.size if manifest.rows else 0
    header = (
        "sample_id,status,"
        + ",".join(f"xi_{j + 1}" for j in range(dims))
        + "," + ",".join(SCALAR_NAMES)
        + "," + ",".join(f"{k}_file" for k in FILE_KEYS)
    )
    with open(path, "w") as fh:
        fh.write(f"# seed={manifest.seed} spec={manifest.spec_hash}\n")
        fh.write(header + "\n")
        for r in manifest.rows:
            cells = [str(r.sample_id), r.status]
            cells += ["%.17g" % v for v in r.inputs]
            cells += ["%.17g" % v for v in r.scalars]
            cells += list(r.files)
            fh.write(",".join(cells) + "\n")


def read_manifest(path) -> EnsembleManifest:
    path = Path(path)
    with open(path) as fh:
        meta = fh.readline().strip()
        header = fh.readline().strip()
        body = fh.read().splitlines()
    if not meta.startswith("#"):
        raise FieldFormatError(f"{path}: missing # metadata line")
    fields = dict(tok.split("=", 1) for tok in meta[1:].split() if "=" in tok)
    if "seed" not in fields or "spec" not in fields:
        raise FieldFormatError(f"{path}: metadata needs seed= and spec=")
    cols = header.split(",")
    n_fixed = 2 + len(SCALAR_NAMES) + len(FILE_KEYS)
    dims = len(cols) - n_fixed
    if dims < 1 or cols[:2] != ["sample_id", "status"] or cols[-4:] != [
        f"{k}_file" for k in FILE_KEYS
    ]:
        raise FieldFormatError(f"{path}: unexpected header {header!r}")
    rows = []
    for line in body:
        if not line:
            continue
        cells = line.split(",")
        if len(cells) != len(cols):
            raise FieldFormatError(f"{path}: ragged row {line!r}")
        status = cells[1]
        if status not in STATUSES:
            raise FieldFormatError(f"{path}: unknown status {status!r}")
        try:
            rows.append(
                ManifestRow(
                    sample_id=int(cells[0]),
                    status=status,
                    inputs=np.array([float(c) for c in cells[2:2 + dims]]),
                    scalars=np.array(
                        [float(c) for c in cells[2 + dims:2 + dims + 6]]
                    ),
                    files=tuple(cells[-4:]),
                )
            )
        except ValueError as exc:
            raise FieldFormatError(f"{path}: {exc}") from exc
    if [r.sample_id for r in rows] != list(range(len(rows))):
        raise FieldFormatError(f"{path}: sample ids must run 0..M-1")
    return EnsembleManifest(
        rows=rows,
        seed=int(fields["seed"]),
        spec_hash=fields["spec"],
        directory=path.parent,
    )


def sample_outputs(state, bc: BoundarySpec, grid: StructuredGrid):
    """Planes and scalar summaries extracted from one converged state.

    Nu statistics live on the hot wall; velocity statistics are taken
    over the whole cube, so they are computed here while the 3D fields
    are still in memory.
    """
    nu = nusselt_hot_wall(state.theta, bc, grid)
    planes = {
        "nu": nu,
        "theta": midplane_slice(state.theta, "z", 0.5, grid),
        "u": midplane_slice(state.u, "z", 0.5, grid),
        "v": midplane_slice(state.v, "z", 0.5, grid),
    }
    scalars = np.array(
        [
            mean_nusselt(nu, grid),
            nu.max(),
            np.abs(state.u).mean(),
            np.abs(state.u).max(),
            np.abs(state.v).mean(),
            np.abs(state.v).max(),
        ]
    )
    return planes, scalars


def sample_case(spec, cfg: SolverConfig, inputs: np.ndarray):
    """Per-row solver configuration and thermal boundary."""
    if isinstance(spec, CaseASpec):
        return replace(cfg, ra=float(inputs[0]), pr=float(inputs[1])), BoundarySpec()
    if isinstance(spec, CaseBSpec):
        return replace(cfg, ra=spec.ra, pr=spec.pr), make_strip_boundary(inputs)
    raise ConfigError(f"unsupported ensemble spec {type(spec).__name__}")


def _default_run(cfg, bc, grid):
    state, _ = run_to_steady(cfg, bc, grid)
    return state


def _solve_one(spec, cfg, grid, inputs, run_fn):
    run_cfg, bc = sample_case(spec, cfg, inputs)
    state = run_fn(run_cfg, bc, grid)
    return sample_outputs(state, bc, grid)


def reference_outputs(spec, cfg: SolverConfig, grid: StructuredGrid, *, run_fn=None):
    """Planes and scalars of the deterministic run at the input mean.

    For the strip case the mean input is a uniform hot wall at 1.05; for
    the parameter case it is (mu_Ra, 7.5) with uniform walls.
    """
    run = _default_run if run_fn is None else run_fn
    return _solve_one(spec, cfg, grid, spec.means, run)


def _row_files_ok(row: ManifestRow, directory: Path) -> bool:
    for name in row.files:
        if not name:
            return False
        try:
            read_plane_csv(directory / name)
        except (OSError, FieldFormatError):
            return False
    return True


def run_ensemble(
    spec,
    samples: SampleMatrix,
    cfg: SolverConfig,
    grid: StructuredGrid,
    out_dir,
    *,
    run_fn=None,
    workers: int = 1,
) -> EnsembleManifest:
    """Run (or resume) one solver sweep over the sample rows.

    A sample that blows up or fails to converge is recorded as failed
    and the sweep continues; more than 10% failures aborts with an
    EnsembleError once every row has been attempted. With ``workers`` > 1
    the solves are farmed out to worker processes (``run_fn`` must then
    be picklable); all files and the manifest are written by this
    process only.
    """
    if samples.dims != spec.dims:
        raise DimensionError(
            f"samples have {samples.dims} columns, spec expects {spec.dims}"
        )
    if samples.n_samples < 1:
        raise SamplingError("sample matrix is empty")
    if workers < 1:
        raise ConfigError(f"workers must be >= 1, got {workers!r}")
    run = _default_run if run_fn is None else run_fn
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    fingerprint = spec_hash(spec, samples, cfg, grid)
    manifest_path = out_dir / "manifest.csv"

    if manifest_path.exists():
        manifest = read_manifest(manifest_path)
        if manifest.spec_hash != fingerprint or manifest.seed != samples.seed:
            raise ConfigError(
                f"{manifest_path} belongs to a different ensemble "
                f"(spec {manifest.spec_hash}, requested {fingerprint})"
            )
        if manifest.n_samples != samples.n_samples:
            raise ConfigError(
                f"{manifest_path} has {manifest.n_samples} rows, "
                f"expected {samples.n_samples}"
            )
        # a done row whose files vanished or fail to parse is recomputed
        for row in manifest.rows:
            if row.status == "done" and not _row_files_ok(row, out_dir):
                row.status = "pending"
    else:
        manifest = EnsembleManifest(
            rows=[
                ManifestRow(
                    sample_id=i,
                    status="pending",
                    inputs=samples.values[i].copy(),
                    scalars=np.full(len(SCALAR_NAMES), np.nan),
                    files=("", "", "", ""),
                )
                for i in range(samples.n_samples)
            ],
            seed=samples.seed,
            spec_hash=fingerprint,
            directory=out_dir,
        )
        write_samples_csv(out_dir / "samples.csv", samples)
        write_manifest(manifest_path, manifest)

    todo = [r for r in manifest.rows if r.status != "done"]

    def finish(row: ManifestRow, outcome):
        if isinstance(outcome, Exception):
            row.status = "failed"
            row.scalars = np.full(len(SCALAR_NAMES), np.nan)
            row.files = ("", "", "", "")
        else:
            planes, scalars = outcome
            names = []
            for key in FILE_KEYS:
                name = f"sample_{row.sample_id:04d}_{key}.csv"
                write_plane_csv(out_dir / name, planes[key], PLANE_AXES[key], grid)
                names.append(name)
            row.scalars = scalars
            row.files = tuple(names)
            row.status = "done"
        write_manifest(manifest_path, manifest)

    if workers == 1:
        for row in todo:
            try:
                outcome = _solve_one(spec, cfg, grid, row.inputs, run)
            except _SAMPLE_FAILURES as exc:
                outcome = exc
            finish(row, outcome)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                (row, pool.submit(_solve_one, spec, cfg, grid, row.inputs, run))
                for row in todo
            ]
            for row, fut in futures:
                try:
                    outcome = fut.result()
                except _SAMPLE_FAILURES as exc:
                    outcome = exc
                finish(row, outcome)

    if manifest.n_failed > 0.1 * manifest.n_samples:
        raise EnsembleError(
            f"{manifest.n_failed} of {manifest.n_samples} samples failed"
        )
    return manifest


def collect_planes(manifest: EnsembleManifest, key: str) -> np.ndarray:
    """Stack one plane quantity over the done rows, in sample-id order."""
    if key not in FILE_KEYS:
        raise ConfigError(f"unknown plane key {key!r}; have {FILE_KEYS}")
    idx = FILE_KEYS.index(key)
    planes = []
    for row in manifest.done_rows():
        values, _ = read_plane_csv(manifest.directory / row.files[idx])
        planes.append(values)
    return np.array(planes)
