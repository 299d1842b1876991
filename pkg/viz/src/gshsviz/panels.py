"""Density heatmap panels and mode-marginal charts from DGRD dumps."""

from __future__ import annotations

import glob
import json
import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .dgrd import Dump, read_dump

AXIS_ALIASES = {"y": 0, "y1": 0, "y2": 1, "v": 1, "theta": 2, "th": 2}


def parse_axes(spec: str) -> tuple[int, int]:
    parts = [p.strip().lower() for p in spec.split(",")]
    if len(parts) != 2:
        raise ValueError("axes selection needs exactly two entries, e.g. '0,1' or 'y1,y2'")
    idx = []
    for p in parts:
        if p in AXIS_ALIASES:
            idx.append(AXIS_ALIASES[p])
        else:
            idx.append(int(p))
    return idx[0], idx[1]


def load_dumps(pattern: str) -> list[Dump]:
    paths = sorted(glob.glob(pattern))
    if not paths:
        raise FileNotFoundError(f"no dumps match {pattern!r}")
    dumps = [read_dump(p) for p in paths]
    ref = dumps[0]
    for d in dumps[1:]:
        if d.counts != ref.counts or not np.allclose(d.lengths, ref.lengths):
            raise ValueError("dumps do not share a grid")
    return sorted(dumps, key=lambda d: d.time)


def load_obstacles(meta_path) -> list[tuple[float, float, float]]:
    """Obstacle circles (x, y, radius) from a run manifest, if it carries them."""
    if meta_path is None:
        return []
    with open(meta_path) as fh:
        manifest = json.load(fh)
    meta = manifest.get("model_meta") or {}
    radius = float(meta.get("obstacle_radius", 0.0))
    return [(float(o[0]), float(o[1]), radius) for o in meta.get("obstacles", [])]


def plot_density_panels(dumps: list[Dump], axes: tuple[int, int], out_path, obstacles=()) -> None:
    """One heatmap panel per dump time, marginalized to the chosen axis pair."""
    n = len(dumps)
    ncols = min(n, 5)
    nrows = math.ceil(n / ncols)
    fig, grid_axes = plt.subplots(
        nrows, ncols, figsize=(3.0 * ncols, 2.7 * nrows), squeeze=False, constrained_layout=True
    )
    a, b = axes
    for i, dump in enumerate(dumps):
        ax = grid_axes[i // ncols][i % ncols]
        marg = dump.marginal((a, b))
        xs = dump.axis_points(a)
        ys = dump.axis_points(b)
        # cells are centered on the grid points
        xe = np.append(xs - dump.steps[a] / 2, xs[-1] + dump.steps[a] / 2)
        ye = np.append(ys - dump.steps[b] / 2, ys[-1] + dump.steps[b] / 2)
        mesh = ax.pcolormesh(xe, ye, marg.T, cmap="viridis", shading="flat")
        for ox, oy, radius in obstacles:
            ax.plot(ox, oy, "k.", markersize=4)
            if radius > 0:
                ax.add_patch(plt.Circle((ox, oy), radius, fill=False, color="black", linewidth=0.8))
        ax.set_title(f"t = {dump.time:g} s", fontsize=9)
        ax.set_xlabel(f"axis {a}", fontsize=8)
        ax.set_ylabel(f"axis {b}", fontsize=8)
        fig.colorbar(mesh, ax=ax, shrink=0.85)
    for j in range(n, nrows * ncols):
        grid_axes[j // ncols][j % ncols].axis("off")
    fig.savefig(out_path, dpi=130)
    plt.close(fig)


def plot_mode_marginals(dumps: list[Dump], out_path) -> None:
    """Per-mode probability mass across the dump times as grouped bars."""
    times = [d.time for d in dumps]
    masses = np.stack([d.mode_marginal() for d in dumps])  # (T, modes)
    n_modes = masses.shape[1]
    fig, ax = plt.subplots(figsize=(1.4 * len(times) + 2, 3.2), constrained_layout=True)
    width = 0.8 / n_modes
    xs = np.arange(len(times))
    for s in range(n_modes):
        ax.bar(xs + (s - (n_modes - 1) / 2) * width, masses[:, s], width, label=f"mode {s + 1}")
    ax.set_xticks(xs, [f"{t:g}" for t in times])
    ax.set_xlabel("time (s)")
    ax.set_ylabel("probability")
    ax.set_ylim(0, 1.05)
    ax.legend(fontsize=8)
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
