"""Monte Carlo propagation through surrogates and shift-of-mean fields.

The stochastic mean of an output can sit away from the deterministic
value at the input mean; the difference field and its max-normalized
percentage ("relative shift of mean") are the headline statistics of
both studies, alongside the standard-deviation field.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import DimensionError, MetricUndefinedError, SamplingError, ToolkitError
from ..grid import write_plane_csv
from ..sampling import stream


@dataclass(frozen=True)
class StatFields:
    """Per-quantity bundle: stochastic mean/std, deterministic reference,
    mean - deterministic difference, and std/mean ratio (zero where the
    mean vanishes exactly)."""

    mean: np.ndarray
    std: np.ndarray
    deterministic: np.ndarray
    difference: np.ndarray
    ratio: np.ndarray

    def __post_init__(self):
        shape = self.mean.shape
        for name in ("std", "deterministic", "difference", "ratio"):
            if getattr(self, name).shape != shape:
                raise DimensionError(f"{name} field shape differs from mean {shape}")
        if np.any(self.std < 0.0):
            raise ToolkitError("stochastic std must be non-negative")


def stat_fields(mean, std, deterministic) -> StatFields:
    """Assemble a StatFields bundle; difference and ratio are derived."""
    mean = np.asarray(mean, dtype=np.float64)
    std = np.asarray(std, dtype=np.float64)
    deterministic = np.asarray(deterministic, dtype=np.float64)
    if mean.shape != std.shape or mean.shape != deterministic.shape:
        raise DimensionError(
            f"incongruent fields: mean {mean.shape}, std {std.shape}, "
            f"deterministic {deterministic.shape}"
        )
    ratio = np.zeros_like(mean)
    np.divide(std, mean, out=ratio, where=mean != 0.0)
    return StatFields(mean, std, deterministic, mean - deterministic, ratio)


def normal_sampler(means, sigmas):
    """Closure drawing (m, d) i.i.d. normal inputs from a passed generator.

    Zero sigmas are allowed so degenerate (deterministic) studies can run
    through the same plumbing.
    """
    means = np.asarray(means, dtype=np.float64)
    sigmas = np.asarray(sigmas, dtype=np.float64)
    if means.ndim != 1 or means.shape != sigmas.shape:
        raise SamplingError("means and sigmas must be 1D arrays of equal length")
    if np.any(sigmas < 0.0):
        raise SamplingError("sigmas must be non-negative")

    def draw(g: np.random.Generator, m: int) -> np.ndarray:
        return means + sigmas * g.standard_normal((m, means.size))

    return draw


def monte_carlo_stats(predict_fn, sampler, n: int, seed: int, *, chunk: int = 4096):
    """Streaming mean and unbiased std of ``predict_fn`` over ``n`` draws.

    ``sampler(generator, m)`` supplies (m, d) input rows; ``predict_fn``
    maps them to (m,) or (m, q) outputs. Single pass in chunks, merging
    partial moments, so memory stays bounded at any n. Deterministic for
    a fixed (seed, chunk) pair. Returns (mean, std) of shape (q,).
    """
    if int(n) != n or n < 2:
        raise SamplingError(f"need at least 2 Monte Carlo samples, got {n!r}")
    if chunk < 1:
        raise SamplingError(f"chunk must be positive, got {chunk!r}")
    n = int(n)
    g = stream(seed, 0)
    count = 0
    mean = None
    m2 = None
    while count < n:
        m = min(chunk, n - count)
        x = np.atleast_2d(np.asarray(sampler(g, m), dtype=np.float64))
        if x.shape[0] != m:
            raise SamplingError(f"sampler returned {x.shape[0]} rows, wanted {m}")
        y = np.asarray(predict_fn(x), dtype=np.float64).reshape(m, -1)
        cmean = y.mean(axis=0)
        cdev = y - cmean
        cm2 = (cdev * cdev).sum(axis=0)
        if mean is None:
            mean, m2 = cmean, cm2
        else:
            # Chan's pairwise update: exact merge of (count, mean, m2)
            # with the chunk's partial moments
            delta = cmean - mean
            tot = count + m
            mean = mean + delta * (m / tot)
            m2 = m2 + cm2 + delta * delta * (count * m / tot)
        count += m
    return mean, np.sqrt(m2 / (n - 1))


def shift_of_mean(stoch_mean, deterministic):
    """Difference field and its max-normalized percentage.

    relative shift = 100 * max|mean - det| / max|det|; undefined when
    the deterministic field is identically zero.
    """
    a = np.asarray(stoch_mean, dtype=np.float64)
    b = np.asarray(deterministic, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"incongruent fields: {a.shape} vs {b.shape}")
    denom = np.max(np.abs(b)) if b.size else 0.0
    if denom == 0.0:
        raise MetricUndefinedError(
            "relative shift is undefined against an identically zero "
            "deterministic field"
        )
    diff = a - b
    return diff, 100.0 * np.max(np.abs(diff)) / denom


def write_stat_fields(out_dir, name: str, fields: StatFields, plane_axes, grid):
    """Write the five per-quantity planes plus a one-line JSON summary.

    Files land in ``out_dir`` as ``<name>_<tag>.csv`` with tags mean,
    std, deterministic, difference, ratio; the summary records the
    relative shift percentage and the peak std.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tags = (
        ("mean", fields.mean),
        ("std", fields.std),
        ("deterministic", fields.deterministic),
        ("difference", fields.difference),
        ("ratio", fields.ratio),
    )
    for tag, arr in tags:
        write_plane_csv(out_dir / f"{name}_{tag}.csv", arr, plane_axes, grid)
    _, shift = shift_of_mean(fields.mean, fields.deterministic)
    summary = {
        "quantity": name,
        "relative_shift_percent": shift,
        "max_std": float(fields.std.max()),
    }
    with open(out_dir / f"{name}_summary.json", "w") as fh:
        fh.write(json.dumps(summary) + "\n")
    return summary


def propagate_fields(predicts, sampler, det_planes, plane_axes, grid,
                     out_dir, n: int, seed: int):
    """Monte Carlo statistics for several surrogate quantities at once.

    ``predicts`` maps quantity name -> vectorized predictor; every
    quantity is driven by the same draw stream so the set stays coupled.
    Returns ({name: StatFields}, {name: summary dict}) and writes the
    plane CSVs under ``out_dir``.
    """
    stats = {}
    summaries = {}
    for key, predict_fn in predicts.items():
        mc_mean, mc_std = monte_carlo_stats(predict_fn, sampler, n, seed)
        fields = stat_fields(
            mc_mean.reshape(grid.n, grid.n),
            mc_std.reshape(grid.n, grid.n),
            det_planes[key],
        )
        stats[key] = fields
        summaries[key] = write_stat_fields(
            out_dir, key, fields, plane_axes[key], grid
        )
    return stats, summaries
