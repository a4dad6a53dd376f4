"""Figure rendering for the delimited outputs.

Every helper reads the CSV form (or the in-memory object that produced
it) and writes a PNG next to it under a figures/ directory, with the
same basename as the CSV it accompanies. Rendering is deterministic:
fixed size and dpi, no timestamps, and the Software tag stripped so the
bytes depend only on the data.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .grid import read_plane_csv

_DPI = 130


def _save(fig, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=_DPI, metadata={"Software": None})
    plt.close(fig)
    return path


def figure_dir(out_dir) -> Path:
    return Path(out_dir) / "figures"


def render_plane(csv_path, fig_dir) -> Path:
    """Heat map of a plane CSV; the color range comes from the data."""
    csv_path = Path(csv_path)
    values, axes = read_plane_csv(csv_path)
    n = values.shape[0]
    fig, ax = plt.subplots(figsize=(4.4, 3.6))
    # rows follow the first named axis, which imshow wants on x after
    # a transpose with origin at the lower-left corner
    im = ax.imshow(
        values.T, origin="lower", extent=(0.0, 1.0, 0.0, 1.0),
        cmap="viridis", interpolation="nearest",
    )
    ax.set_xlabel(axes[0])
    ax.set_ylabel(axes[1])
    ax.set_title(f"{csv_path.stem} ({n}x{n})")
    fig.colorbar(im, ax=ax)
    return _save(fig, figure_dir(fig_dir) / f"{csv_path.stem}.png")


def render_profiles(curves, xlabel: str, ylabel: str, fig_path) -> Path:
    """Overlaid line profiles; ``curves`` is a list of (x, y, label)."""
    fig, ax = plt.subplots(figsize=(4.4, 3.6))
    for x, y, label in curves:
        ax.plot(np.asarray(x), np.asarray(y), label=label, linewidth=1.2)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    return _save(fig, fig_path)


def render_history(history: dict, fig_path) -> Path:
    """Training and validation loss curves on a log axis."""
    fig, ax = plt.subplots(figsize=(4.4, 3.6))
    for name in ("train", "val"):
        ax.semilogy(np.asarray(history[name]), label=name, linewidth=1.2)
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    return _save(fig, fig_path)


def render_surface(csv_path, fig_dir) -> Path:
    """Filled contours of a 3-column (x, y, value) response surface CSV."""
    csv_path = Path(csv_path)
    with open(csv_path) as fh:
        header = fh.readline().strip().split(",")
        raw = np.loadtxt(fh, delimiter=",", ndmin=2)
    x = np.unique(raw[:, 0])
    y = np.unique(raw[:, 1])
    vals = raw[:, 2].reshape(x.size, y.size)
    fig, ax = plt.subplots(figsize=(4.4, 3.6))
    cs = ax.contourf(x, y, vals.T, levels=21, cmap="viridis")
    ax.set_xlabel(header[0])
    ax.set_ylabel(header[1])
    ax.set_title(header[2])
    fig.colorbar(cs, ax=ax)
    return _save(fig, figure_dir(fig_dir) / f"{csv_path.stem}.png")
