"""Truth / estimate / uncertainty-band figures from filter estimate tables."""

from __future__ import annotations

import csv

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def read_table(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise ValueError(f"{path}: no estimate rows")
    header = rows[0]
    data = np.array([[float(x) for x in row] for row in rows[1:]])
    return {name: data[:, j] for j, name in enumerate(header)}


def _axis_count(table) -> int:
    k = 0
    while f"mean_r{k}" in table:
        k += 1
    if k == 0:
        raise ValueError("table carries no mean_r* columns")
    return k


def plot_estimates(table: dict[str, np.ndarray], out_path) -> None:
    """One subplot per state axis (truth, mean, 3-sigma band, measurement
    where one maps to the axis) plus a mode subplot when several modes exist.
    """
    n_axes = _axis_count(table)
    t = table["time"]
    has_truth = "truth_r0" in table
    n_modes = 0
    while f"mode_marginal_{n_modes}" in table:
        n_modes += 1
    want_mode_panel = n_modes > 1

    rows = n_axes + (1 if want_mode_panel else 0)
    fig, axes = plt.subplots(rows, 1, figsize=(7, 2.2 * rows), sharex=True, constrained_layout=True)
    axes = np.atleast_1d(axes)

    for k in range(n_axes):
        ax = axes[k]
        mean = table[f"mean_r{k}"]
        std = np.nan_to_num(table[f"std_r{k}"], posinf=1e9)
        band = 3.0 * std
        ax.fill_between(t, mean - band, mean + band, color="0.85", label="3-sigma bound")
        ax.plot(t, mean + band, "-.", color="0.5", linewidth=0.8)
        ax.plot(t, mean - band, "-.", color="0.5", linewidth=0.8)
        if f"meas_r{k}" in table:
            ax.plot(t, table[f"meas_r{k}"], ".", color="tab:green", markersize=2.5, label="measured")
        if has_truth:
            ax.plot(t, table[f"truth_r{k}"], "-", color="tab:red", linewidth=1.2, label="true")
        ax.plot(t, mean, "-", color="tab:blue", linewidth=1.2, label="estimate")
        lo_ref = [mean]
        if has_truth:
            lo_ref.append(table[f"truth_r{k}"])
        ref = np.concatenate(lo_ref)
        span = max(ref.max() - ref.min(), 1e-3)
        ax.set_ylim(ref.min() - 0.7 * span, ref.max() + 0.7 * span)
        ax.set_ylabel(f"axis {k}")
        if k == 0:
            ax.legend(fontsize=7, ncol=4)

    if want_mode_panel:
        ax = axes[-1]
        if has_truth:
            ax.step(t, table["truth_mode"] + 1, where="post", color="tab:red", label="true mode")
        ax.step(t, table["map_mode"] + 1, where="post", color="tab:blue", label="estimated mode")
        ax.set_ylabel("mode")
        ax.set_yticks(np.arange(1, n_modes + 1))
        ax.legend(fontsize=7)
    axes[-1].set_xlabel("time (s)")
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
