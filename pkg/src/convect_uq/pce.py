"""Hermite polynomial chaos surrogates for normal inputs.

The basis is the normalized probabilists' Hermite family (orthonormal
under the standard normal weight), tensorized over input dimensions and
truncated by total degree. Coefficients come from an overdetermined
least-squares fit on sampled solver outputs; mean, variance, and total
Sobol indices then read off the coefficients directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from pathlib import Path

import numpy as np

from .errors import DimensionError, FieldFormatError, FitError, SensitivityUndefinedError

_COND_CAP = 1.0e12


def multi_indices(dims: int, order: int) -> np.ndarray:
    """Total-degree multi-index set, graded then lexicographic.

    Row 0 is the constant term; C(dims+order, order) rows total.
    """
    if dims < 1 or order < 0:
        raise DimensionError(f"need dims >= 1 and order >= 0, got {dims}, {order}")
    idx = [a for a in product(range(order + 1), repeat=dims) if sum(a) <= order]
    idx.sort(key=lambda a: (sum(a), a))
    out = np.array(idx, dtype=np.int64)
    assert out.shape[0] == math.comb(dims + order, order)
    return out


def hermite_table(order: int, z: np.ndarray) -> np.ndarray:
    """psi_k(z) for k = 0..order, shape (len(z), order+1).

    psi_k = He_k / sqrt(k!), evaluated by the stable orthonormal
    recurrence psi_{k+1} = (z psi_k - sqrt(k) psi_{k-1}) / sqrt(k+1).
    """
    z = np.asarray(z, dtype=np.float64)
    table = np.empty(z.shape + (order + 1,))
    table[..., 0] = 1.0
    if order >= 1:
        table[..., 1] = z
    for k in range(1, order):
        table[..., k + 1] = (
            z * table[..., k] - math.sqrt(k) * table[..., k - 1]
        ) / math.sqrt(k + 1)
    return table


@dataclass(frozen=True)
class PceModel:
    """Fitted expansion: coefficients are (n_terms, n_outputs)."""

    indices: np.ndarray
    coeffs: np.ndarray
    means: np.ndarray
    sigmas: np.ndarray
    fit_residual: np.ndarray  # per-output RMS residual / max|output|

    @property
    def dims(self) -> int:
        return self.indices.shape[1]

    @property
    def order(self) -> int:
        return int(self.indices.sum(axis=1).max())

    @property
    def n_outputs(self) -> int:
        return self.coeffs.shape[1]


def basis_matrix(indices: np.ndarray, zpoints: np.ndarray) -> np.ndarray:
    """Vandermonde-style design matrix at standardized points."""
    zpoints = np.atleast_2d(np.asarray(zpoints, dtype=np.float64))
    dims = indices.shape[1]
    if zpoints.shape[1] != dims:
        raise DimensionError(
            f"points have {zpoints.shape[1]} columns, basis expects {dims}"
        )
    table = hermite_table(int(indices.max()), zpoints)  # (M, dims, p+1)
    cols = np.ones((zpoints.shape[0], indices.shape[0]))
    for j in range(dims):
        cols *= table[:, j, indices[:, j]]
    return cols


def _standardize(points, means, sigmas):
    means = np.asarray(means, dtype=np.float64)
    sigmas = np.asarray(sigmas, dtype=np.float64)
    if means.ndim != 1 or means.shape != sigmas.shape:
        raise DimensionError("means and sigmas must be matching 1D arrays")
    if np.any(sigmas <= 0):
        raise FitError("sigmas must be positive")
    return (np.atleast_2d(np.asarray(points, dtype=np.float64)) - means) / sigmas


def fit_surrogate(points, outputs, means, sigmas, order: int) -> PceModel:
    """Least-squares collocation fit at physical sample points.

    ``points`` is (M, dims) in physical units, ``outputs`` (M,) or
    (M, n_out). Needs M >= C(dims+order, order); the design matrix is
    column-equilibrated before the orthogonal-factorization solve and the
    fit refuses rank-deficient or absurdly conditioned systems.
    """
    z = _standardize(points, means, sigmas)
    y = np.asarray(outputs, dtype=np.float64)
    squeeze = y.ndim == 1
    y = y.reshape(y.shape[0], -1)
    if y.shape[0] != z.shape[0]:
        raise FitError(f"{z.shape[0]} points but {y.shape[0]} output rows")
    indices = multi_indices(z.shape[1], order)
    n_terms = indices.shape[0]
    if z.shape[0] < n_terms:
        raise FitError(
            f"underdetermined fit: {z.shape[0]} samples for {n_terms} terms"
        )
    v = basis_matrix(indices, z)
    colnorm = np.linalg.norm(v, axis=0)
    if np.any(colnorm == 0.0):
        raise FitError("degenerate design matrix column")
    sol, _, rank, svals = np.linalg.lstsq(v / colnorm, y, rcond=None)
    cond = svals[0] / svals[-1] if svals[-1] > 0 else np.inf
    if rank < n_terms or cond > _COND_CAP:
        raise FitError(
            f"ill-conditioned design matrix (rank {rank}/{n_terms}, "
            f"cond {cond:.2e}); add samples or lower the order"
        )
    coeffs = sol / colnorm[:, None]
    resid = v @ coeffs - y
    scale = np.maximum(np.max(np.abs(y), axis=0), np.finfo(float).tiny)
    fit_residual = np.sqrt(np.mean(resid**2, axis=0)) / scale
    return PceModel(
        indices=indices,
        coeffs=coeffs,
        means=np.asarray(means, dtype=np.float64),
        sigmas=np.asarray(sigmas, dtype=np.float64),
        fit_residual=fit_residual,
    )


def predict(model: PceModel, points) -> np.ndarray:
    """Evaluate the surrogate at physical points; (n_out,) for one point."""
    pts = np.asarray(points, dtype=np.float64)
    single = pts.ndim == 1
    z = _standardize(pts, model.means, model.sigmas)
    out = basis_matrix(model.indices, z) @ model.coeffs
    return out[0] if single else out


def moments(model: PceModel) -> tuple[np.ndarray, np.ndarray]:
    """(mean, variance) per output, straight from orthonormality."""
    mean = model.coeffs[0].copy()
    var = np.sum(model.coeffs[1:] ** 2, axis=0)
    return mean, var


def total_sobol(model: PceModel) -> np.ndarray:
    """Total sensitivity per (input, output): coefficient-square ratios."""
    _, var = moments(model)
    # round-off floor: a constant response fit leaves var ~ eps^2 * mean^2
    power = (model.coeffs**2).sum(axis=0)
    if np.any(var <= np.finfo(float).eps * power):
        dead = int(np.argmin(var - np.finfo(float).eps * power))
        raise SensitivityUndefinedError(
            f"output {dead} has zero variance; Sobol indices are undefined"
        )
    sq = model.coeffs[1:] ** 2
    active = model.indices[1:] > 0  # (n_terms-1, dims)
    out = np.empty((model.dims, model.coeffs.shape[1]))
    for j in range(model.dims):
        out[j] = sq[active[:, j]].sum(axis=0) / var
    return out


def response_surface(model: PceModel, output: int = 0, resolution: int = 41):
    """Surrogate values over the (mean +- 3 sigma)^2 input box.

    Only defined for two input dimensions; returns (x1, x2, values) with
    values[i, j] evaluated at (x1[i], x2[j]).
    """
    if model.dims != 2:
        raise DimensionError(
            f"response surfaces need exactly 2 inputs, model has {model.dims}"
        )
    if resolution < 2:
        raise DimensionError("resolution must be at least 2")
    axes = [
        np.linspace(m - 3 * s, m + 3 * s, resolution)
        for m, s in zip(model.means, model.sigmas)
    ]
    g1, g2 = np.meshgrid(axes[0], axes[1], indexing="ij")
    pts = np.stack([g1.ravel(), g2.ravel()], axis=1)
    vals = predict(model, pts)[:, output].reshape(resolution, resolution)
    return axes[0], axes[1], vals


_MAGIC = "pce-model v1"


def save_pce(path: str | Path, model: PceModel) -> None:
    """Versioned plain-text serialization (17 significant digits)."""
    with open(path, "w") as fh:
        fh.write(f"{_MAGIC}\n")
        fh.write(f"dims {model.dims} order {model.order} "
                 f"terms {model.indices.shape[0]} outputs {model.n_outputs}\n")
        fh.write("means " + " ".join("%.17g" % m for m in model.means) + "\n")
        fh.write("sigmas " + " ".join("%.17g" % s for s in model.sigmas) + "\n")
        fh.write("fit_residual "
                 + " ".join("%.17g" % r for r in model.fit_residual) + "\n")
        for idx, row in zip(model.indices, model.coeffs):
            fh.write(" ".join(str(int(a)) for a in idx) + " | "
                     + " ".join("%.17g" % c for c in row) + "\n")


def load_pce(path: str | Path) -> PceModel:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != _MAGIC:
        raise FieldFormatError(f"{path}: not a {_MAGIC!r} file")
    try:
        head = lines[1].split()
        dims, order, terms, outputs = (int(head[i]) for i in (1, 3, 5, 7))
        means = np.array([float(v) for v in lines[2].split()[1:]])
        sigmas = np.array([float(v) for v in lines[3].split()[1:]])
        fit_residual = np.array([float(v) for v in lines[4].split()[1:]])
        indices = np.empty((terms, dims), dtype=np.int64)
        coeffs = np.empty((terms, outputs))
        for r, line in enumerate(lines[5:5 + terms]):
            left, right = line.split("|")
            indices[r] = [int(v) for v in left.split()]
            coeffs[r] = [float(v) for v in right.split()]
    except (IndexError, ValueError) as exc:
        raise FieldFormatError(f"{path}: malformed model file: {exc}") from exc
    model = PceModel(indices=indices, coeffs=coeffs, means=means,
                     sigmas=sigmas, fit_residual=fit_residual)
    if indices.shape[0] != terms or int(indices.sum(axis=1).max()) != order:
        raise FieldFormatError(f"{path}: inconsistent header")
    return model
