"""Structured cell-centered grids on the unit cube and delimited field I/O.

A grid is n^3 cubic cells, spacing h = 1/n, cell centers at (i + 1/2) h.
Scalar fields are plain float64 arrays of shape (n, n, n) indexed [i, j, k]
for (x, y, z). Files are comma-delimited with an index triple, physical
coordinates, and the value; values use 17 significant digits so a write ->
read cycle reproduces the array bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FieldFormatError, GridError

AXES = ("x", "y", "z")

# 17 significant digits round-trips any finite float64 exactly.
_FMT = "%.17g"


@dataclass(frozen=True)
class StructuredGrid:
    """Uniform cell-centered grid on [0,1]^3."""

    n: int
    h: float

    def cell_centers(self) -> np.ndarray:
        """1D array of the n cell-center coordinates along any axis."""
        return (np.arange(self.n) + 0.5) * self.h


def make_grid(n: int) -> StructuredGrid:
    if int(n) != n or n < 4:
        raise GridError(f"grid size must be an integer >= 4, got {n!r}")
    n = int(n)
    return StructuredGrid(n=n, h=1.0 / n)


def _axis_index(axis: str) -> int:
    try:
        return AXES.index(axis)
    except ValueError:
        raise GridError(f"axis must be one of {AXES}, got {axis!r}") from None


def nearest_layer(grid: StructuredGrid, coordinate: float) -> int:
    """Index of the cell layer whose center is closest to ``coordinate``.

    Ties (coordinate exactly on a cell face) resolve to the lower index.
    """
    if not 0.0 <= coordinate <= 1.0:
        raise GridError(f"coordinate {coordinate!r} outside [0, 1]")
    # Centers sit at (i+1/2)h, so any point in (ih, (i+1)h] is nearest to
    # center i; ceil(c*n)-1 implements that half-open binning directly.
    idx = int(np.ceil(coordinate * grid.n)) - 1
    return min(max(idx, 0), grid.n - 1)


def midplane_slice(
    values: np.ndarray, axis: str, coordinate: float, grid: StructuredGrid
) -> np.ndarray:
    """Extract the 2D cell layer nearest to ``coordinate`` along ``axis``."""
    check_field(values, grid)
    ax = _axis_index(axis)
    idx = nearest_layer(grid, coordinate)
    return np.take(values, idx, axis=ax).copy()


def check_field(values: np.ndarray, grid: StructuredGrid) -> None:
    expected = (grid.n,) * 3
    if values.shape != expected:
        raise GridError(f"field shape {values.shape} does not match grid {expected}")
    if not np.all(np.isfinite(values)):
        raise GridError("field contains non-finite values")


def write_field_csv(path: str | Path, values: np.ndarray, grid: StructuredGrid) -> None:
    """Write a scalar field as ``i,j,k,x,y,z,value`` rows, i fastest."""
    check_field(values, grid)
    n = grid.n
    c = grid.cell_centers()
    i, j, k = np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij")
    cols = (
        i.ravel(order="F"),
        j.ravel(order="F"),
        k.ravel(order="F"),
        c[i].ravel(order="F"),
        c[j].ravel(order="F"),
        c[k].ravel(order="F"),
        np.asarray(values, dtype=np.float64).ravel(order="F"),
    )
    with open(path, "w") as fh:
        fh.write("i,j,k,x,y,z,value\n")
        for row in zip(*cols):
            fh.write(
                "%d,%d,%d," % row[:3] + ",".join(_FMT % v for v in row[3:]) + "\n"
            )


def read_field_csv(path: str | Path) -> tuple[np.ndarray, StructuredGrid]:
    """Read a field written by :func:`write_field_csv`."""
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "i,j,k,x,y,z,value":
            raise FieldFormatError(f"{path}: unexpected header {header!r}")
        try:
            raw = np.loadtxt(fh, delimiter=",", ndmin=2)
        except ValueError as exc:
            raise FieldFormatError(f"{path}: {exc}") from exc
    if raw.size == 0 or raw.shape[1] != 7:
        raise FieldFormatError(f"{path}: expected 7 columns")
    n = int(raw[:, 0].max()) + 1
    if n < 4 or raw.shape[0] != n**3:
        raise FieldFormatError(
            f"{path}: {raw.shape[0]} rows, expected {n**3} for n={n}"
        )
    grid = make_grid(n)
    values = np.empty((n, n, n))
    i = raw[:, 0].astype(int)
    j = raw[:, 1].astype(int)
    k = raw[:, 2].astype(int)
    values[i, j, k] = raw[:, 6]
    return values, grid


def write_plane_csv(
    path: str | Path,
    values: np.ndarray,
    plane_axes: tuple[str, str],
    grid: StructuredGrid,
) -> None:
    """Write a 2D layer with headers named after the in-plane axes.

    For a slice normal to x the header reads ``j,k,y,z,value`` and the first
    listed index varies fastest, mirroring the 3D format.
    """
    a0, a1 = (_axis_index(a) for a in plane_axes)
    if a0 == a1:
        raise GridError(f"plane axes must differ, got {plane_axes}")
    if values.shape != (grid.n, grid.n):
        raise GridError(f"plane shape {values.shape} does not match n={grid.n}")
    if not np.all(np.isfinite(values)):
        raise GridError("plane contains non-finite values")
    idx_names = ("i", "j", "k")
    c = grid.cell_centers()
    p, q = np.meshgrid(np.arange(grid.n), np.arange(grid.n), indexing="ij")
    cols = (
        p.ravel(order="F"),
        q.ravel(order="F"),
        c[p].ravel(order="F"),
        c[q].ravel(order="F"),
        np.asarray(values, dtype=np.float64).ravel(order="F"),
    )
    header = ",".join(
        (idx_names[a0], idx_names[a1], AXES[a0], AXES[a1], "value")
    )
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in zip(*cols):
            fh.write("%d,%d," % row[:2] + ",".join(_FMT % v for v in row[2:]) + "\n")


def read_plane_csv(path: str | Path) -> tuple[np.ndarray, tuple[str, str]]:
    """Read a plane written by :func:`write_plane_csv`."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if len(header) != 5 or header[4] != "value":
            raise FieldFormatError(f"{path}: unexpected header {header!r}")
        axes = (header[2], header[3])
        if axes[0] not in AXES or axes[1] not in AXES:
            raise FieldFormatError(f"{path}: unknown plane axes {axes!r}")
        try:
            raw = np.loadtxt(fh, delimiter=",", ndmin=2)
        except ValueError as exc:
            raise FieldFormatError(f"{path}: {exc}") from exc
    if raw.size == 0 or raw.shape[1] != 5:
        raise FieldFormatError(f"{path}: expected 5 columns")
    n = int(raw[:, 0].max()) + 1
    if raw.shape[0] != n * n:
        raise FieldFormatError(f"{path}: {raw.shape[0]} rows, expected {n * n}")
    values = np.empty((n, n))
    values[raw[:, 0].astype(int), raw[:, 1].astype(int)] = raw[:, 4]
    return values, axes
