"""Sampling utilities: Latin hypercube designs, the inverse normal CDF,
Gauss-Hermite quadrature for standard normals, and tensor product grids.

Randomness comes from the counter-based Philox generator keyed by the user
seed; each sampling dimension draws from its own jumped stream, so designs
are reproducible and dimensions are independent by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import FieldFormatError, SamplingError

# Acklam's rational approximation to the inverse normal CDF. Peak absolute
# error ~1.15e-9 before polishing; one Newton step against the erfc-based
# CDF brings |Phi(z) - p| below 1e-12 across [1e-12, 1 - 1e-12].
_A = (
    -3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
    1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00,
)
_B = (
    -5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
    6.680131188771972e01, -1.328068155288572e01,
)
_C = (
    -7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
    -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00,
)
_D = (
    7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
    3.754408661907416e00,
)
_P_LOW = 0.02425

_erfc = np.frompyfunc(math.erfc, 1, 1)


@dataclass(frozen=True)
class SampleMatrix:
    """Rows are samples, columns are input dimensions.

    ``means``/``sigmas`` are set once the design has been mapped to
    physical normal variables; ``None`` means the values are still uniform
    on (0, 1).
    """

    values: np.ndarray
    seed: int
    means: np.ndarray | None = None
    sigmas: np.ndarray | None = None

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def dims(self) -> int:
        return self.values.shape[1]


def stream(seed: int, index: int) -> np.random.Generator:
    """Independent generator number ``index`` under a fixed seed."""
    return np.random.Generator(np.random.Philox(key=seed).jumped(index))


def norm_cdf(z):
    """Standard normal CDF, erfc-based so the lower tail keeps precision."""
    arr = np.atleast_1d(np.asarray(z, dtype=np.float64))
    out = 0.5 * _erfc(-arr / math.sqrt(2.0)).astype(np.float64)
    return float(out[0]) if np.ndim(z) == 0 else out.reshape(np.shape(z))


def _acklam(p: np.ndarray) -> np.ndarray:
    z = np.empty_like(p)
    lo = p < _P_LOW
    hi = p > 1.0 - _P_LOW
    mid = ~(lo | hi)

    q = p[mid] - 0.5
    r = q * q
    num = ((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]
    den = ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
    z[mid] = q * num / den

    for sel, sign in ((lo, 1.0), (hi, -1.0)):
        pt = p[sel] if sign > 0 else 1.0 - p[sel]
        q = np.sqrt(-2.0 * np.log(pt))
        num = ((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]
        den = (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        z[sel] = sign * num / den
    return z


def normal_inverse_cdf(p):
    """Quantile function of the standard normal.

    Accepts scalars or arrays over the open interval (0, 1).
    """
    scalar = np.isscalar(p)
    arr = np.atleast_1d(np.asarray(p, dtype=np.float64))
    if arr.size == 0:
        raise SamplingError("empty probability input")
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0.0) or np.any(arr >= 1.0):
        raise SamplingError("probabilities must lie strictly inside (0, 1)")
    z = _acklam(arr)
    pdf = np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    safe = pdf > 0.0
    z[safe] -= (norm_cdf(z[safe]) - arr[safe]) / pdf[safe]
    return float(z[0]) if scalar else z.reshape(np.shape(p))


def latin_hypercube(n_samples: int, dims: int, seed: int) -> SampleMatrix:
    """Stratified uniform design: one point per stratum in every dimension."""
    if n_samples < 1:
        raise SamplingError(f"need at least one sample, got {n_samples}")
    if dims < 1:
        raise SamplingError(f"need at least one dimension, got {dims}")
    vals = np.empty((n_samples, dims))
    for j in range(dims):
        g = stream(seed, j)
        perm = g.permutation(n_samples)
        offs = g.random(n_samples)
        vals[:, j] = (perm + offs) / n_samples
    return SampleMatrix(values=vals, seed=seed)


def normal_lhs(
    n_samples: int, means, sigmas, seed: int
) -> SampleMatrix:
    """Latin hypercube design mapped to independent normal inputs."""
    means = np.asarray(means, dtype=np.float64)
    sigmas = np.asarray(sigmas, dtype=np.float64)
    if means.shape != sigmas.shape or means.ndim != 1:
        raise SamplingError("means and sigmas must be 1D arrays of equal length")
    if np.any(sigmas <= 0.0):
        raise SamplingError("sigmas must be positive")
    design = latin_hypercube(n_samples, means.size, seed)
    z = normal_inverse_cdf(design.values)
    return SampleMatrix(
        values=means + sigmas * z, seed=seed, means=means, sigmas=sigmas
    )


def gauss_hermite(level: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights integrating against the standard normal density.

    Exact for polynomials up to degree 2*level - 1; weights are positive
    and sum to one; nodes come out symmetric about zero.
    """
    if int(level) != level or level < 1:
        raise SamplingError(f"level must be an integer >= 1, got {level!r}")
    n = int(level)
    m = (n + 1) // 2
    half = np.empty(m)
    z = 0.0
    for i in range(m):  # largest root first, classic seeding
        if i == 0:
            z = math.sqrt(2.0 * n + 1) - 1.85575 * (2.0 * n + 1) ** (-1.0 / 6.0)
            z *= math.sqrt(2.0)
        elif i == 1:
            z -= math.sqrt(2.0) * 1.14 * n**0.426 / (z / math.sqrt(2.0))
        elif i == 2:
            z = 1.86 * z - 0.86 * half[0]
        elif i == 3:
            z = 1.91 * z - 0.91 * half[1]
        else:
            z = 2.0 * z - half[i - 2]
        for _ in range(100):
            pk, pk1 = _orthonormal_pair(n, z)
            dz = pk / (math.sqrt(n) * pk1)
            z -= dz
            if abs(dz) <= 1e-15 * max(1.0, abs(z)):
                break
        half[i] = z
    nodes = np.concatenate([-half, half[::-1][n % 2:]])
    nodes.sort()
    if n % 2 == 1:
        nodes[m - 1] = 0.0
    weights = np.array([1.0 / _christoffel(n, x) for x in nodes])
    # exact symmetry: average mirrored entries, then renormalize
    weights = 0.5 * (weights + weights[::-1])
    nodes = 0.5 * (nodes - nodes[::-1])
    weights /= weights.sum()
    return nodes, weights


def _orthonormal_pair(n: int, z: float) -> tuple[float, float]:
    """(psi_n, psi_{n-1}) from the orthonormal Hermite recurrence."""
    pm, pk = 0.0, 1.0
    for k in range(n):
        pm, pk = pk, (z * pk - math.sqrt(k) * pm) / math.sqrt(k + 1)
    return pk, pm


def _christoffel(n: int, z: float) -> float:
    """Sum of squared orthonormal polynomials below degree n."""
    total, pm, pk = 0.0, 0.0, 1.0
    for k in range(n):
        total += pk * pk
        pm, pk = pk, (z * pk - math.sqrt(k) * pm) / math.sqrt(k + 1)
    return total


def tensor_grid(level: int, means, sigmas) -> np.ndarray:
    """Full tensor product of a 1D Gauss-Hermite rule in physical units.

    Row ``r`` holds ``mu_j + sigma_j * node`` per dimension; rows follow
    lexicographic order with the first dimension slowest. Guarded against
    combinatorial explosion: at most 4 dimensions and 1e6 points.
    """
    means = np.asarray(means, dtype=np.float64)
    sigmas = np.asarray(sigmas, dtype=np.float64)
    if means.shape != sigmas.shape or means.ndim != 1:
        raise SamplingError("means and sigmas must be 1D arrays of equal length")
    dims = means.size
    if not 1 <= dims <= 4:
        raise SamplingError(f"tensor grids support 1..4 dimensions, got {dims}")
    if np.any(sigmas <= 0.0):
        raise SamplingError("sigmas must be positive")
    nodes, _ = gauss_hermite(level)
    if float(level) ** dims > 1e6:
        raise SamplingError(f"tensor grid of {level}^{dims} points is too large")
    axes = np.meshgrid(*([nodes] * dims), indexing="ij")
    z = np.stack([a.ravel() for a in axes], axis=1)
    return means + sigmas * z


def write_samples_csv(path, sm: SampleMatrix) -> None:
    """Dump a sample matrix with its provenance in a leading # line."""
    meta = f"# seed={sm.seed}"
    if sm.means is not None:
        meta += " means=" + ",".join("%.17g" % m for m in sm.means)
    if sm.sigmas is not None:
        meta += " sigmas=" + ",".join("%.17g" % s for s in sm.sigmas)
    header = "sample_id," + ",".join(f"xi_{j + 1}" for j in range(sm.dims))
    with open(path, "w") as fh:
        fh.write(meta + "\n" + header + "\n")
        for i, row in enumerate(sm.values):
            fh.write("%d," % i + ",".join("%.17g" % v for v in row) + "\n")


def read_samples_csv(path) -> SampleMatrix:
    with open(path) as fh:
        meta = fh.readline().strip()
        header = fh.readline().strip()
        body = fh.read()
    if not meta.startswith("#"):
        raise FieldFormatError(f"{path}: missing # metadata line")
    fields = dict(
        tok.split("=", 1) for tok in meta[1:].split() if "=" in tok
    )
    if "seed" not in fields:
        raise FieldFormatError(f"{path}: metadata line lacks seed=")
    cols = header.split(",")
    if cols[0] != "sample_id" or any(
        c != f"xi_{j + 1}" for j, c in enumerate(cols[1:])
    ):
        raise FieldFormatError(f"{path}: unexpected header {header!r}")
    try:
        raw = np.loadtxt(body.splitlines(), delimiter=",", ndmin=2)
    except ValueError as exc:
        raise FieldFormatError(f"{path}: {exc}") from exc
    if raw.size == 0 or raw.shape[1] != len(cols):
        raise FieldFormatError(f"{path}: expected {len(cols)} columns")
    if np.any(raw[:, 0] != np.arange(raw.shape[0])):
        raise FieldFormatError(f"{path}: sample_id column must run 0..M-1")

    def _vec(key):
        if key not in fields:
            return None
        return np.array([float(t) for t in fields[key].split(",")])

    return SampleMatrix(
        values=raw[:, 1:].copy(),
        seed=int(fields["seed"]),
        means=_vec("means"),
        sigmas=_vec("sigmas"),
    )
