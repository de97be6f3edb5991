"""Matplotlib figures written next to the CSV/PGM outputs."""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (6.4, 3.6),
    "figure.dpi": 120,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.fontsize": 8,
    "legend.frameon": False,
    "font.size": 9,
}


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_tracking_errors(traj, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for i in range(traj.n_agents):
            ax.plot(traj.times, traj.e[:, i], lw=1, label=f"$e_{i + 1}$")
        ax.set_xlabel("time")
        ax.set_ylabel("tracking error")
        ax.legend(ncol=4)
        return _save(fig, path)


def plot_outputs(traj, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(traj.times, traj.y0, "k-", lw=1.5, label="$y_0$")
        ax.plot(traj.times, -traj.y0, "k--", lw=1.0, label="$-y_0$")
        for i in range(traj.n_agents):
            ax.plot(traj.times, traj.outputs[:, i], lw=1, label=f"$y_{i + 1}$")
        ax.set_xlabel("time")
        ax.set_ylabel("output")
        ax.legend(ncol=3)
        return _save(fig, path)


def plot_estimation_errors(traj, path):
    err = traj.estimation_errors()
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        floor = np.finfo(float).eps
        for i in range(traj.n_agents):
            ax.semilogy(traj.times, np.maximum(err[:, i], floor), lw=1,
                        label=rf"$\|\eta_{i + 1} - \phi_{i + 1} v\|$")
        ax.set_xlabel("time")
        ax.set_ylabel("estimation error")
        ax.legend(ncol=2)
        return _save(fig, path)


def simulation_report(traj, out_dir, stem="simulation"):
    """Write the standard figures for a closed-loop run; return their paths."""
    out_dir = Path(out_dir)
    paths = [plot_estimation_errors(traj, out_dir / f"{stem}_estimation.png")]
    if traj.x is not None:
        paths.append(plot_tracking_errors(traj, out_dir / f"{stem}_tracking.png"))
        paths.append(plot_outputs(traj, out_dir / f"{stem}_outputs.png"))
    return paths


def plot_row_outputs(times, outputs, path, row=0):
    """Outputs of every pixel agent in one image row over time."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(times, outputs[:, row, :], lw=0.7)
        ax.set_xlabel("time")
        ax.set_ylabel(f"output, row {row + 1}")
        ax.set_ylim(-1.3, 1.3)
        return _save(fig, path)


def plot_pattern(image, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4, 4))
        ax.imshow(image, cmap="gray", vmin=-1, vmax=1, interpolation="nearest")
        ax.set_axis_off()
        return _save(fig, path)


def turing_report(result, out_dir, stem="turing"):
    out_dir = Path(out_dir)
    paths = [plot_pattern(result.image, out_dir / f"{stem}_pattern.png")]
    if result.outputs is not None:
        paths.append(plot_row_outputs(result.times, result.outputs, out_dir / f"{stem}_row1.png"))
    return paths
