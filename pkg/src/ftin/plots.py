"""Static figures: trajectory overlays, error CDFs and drift bars."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .evaluation import MetricsReport, read_trajectory_csv  # noqa: E402

_META = {"Software": None}  # keep PNG bytes independent of the matplotlib version string


def _save(fig, path: Path) -> Path:
    fig.savefig(path, dpi=110, metadata=_META)
    plt.close(fig)
    return path


def plot_overlay(csv_path, out_path) -> Path:
    pred, gt = read_trajectory_csv(csv_path)
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot(gt.pos[:, 0], gt.pos[:, 1], "k-", lw=1.2, label="ground truth")
    ax.plot(pred.pos[:, 0], pred.pos[:, 1], "-", color="tab:red", lw=1.0, label="predicted")
    ax.plot(*gt.pos[0], "go", ms=5)
    ax.set_aspect("equal", adjustable="datalim")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.set_title(Path(csv_path).stem)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    return _save(fig, Path(out_path))


def plot_cdf(reports: dict[str, MetricsReport], out_path) -> Path:
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.6))
    for label, rep in reports.items():
        for ax, curve in zip(axes, (rep.cdf, rep.cdf_rte)):
            xs = [0.0] + [p[0] for p in curve]
            ys = [0.0] + [p[1] for p in curve]
            ax.step(xs, ys, where="post", label=label)
    for ax, name in zip(axes, ("ATE", "RTE")):
        ax.set_xlabel(f"{name} (m)")
        ax.set_ylabel("fraction of sequences")
        ax.set_ylim(0, 1.02)
        ax.grid(alpha=0.3)
    axes[0].legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, Path(out_path))


def plot_pde(reports: dict[str, MetricsReport], out_path) -> Path:
    fig, ax = plt.subplots(figsize=(max(3.5, 1.2 * len(reports) + 1), 3.4))
    labels = list(reports)
    ax.bar(range(len(labels)), [reports[k].pde for k in labels], color="tab:blue")
    ax.set_xticks(range(len(labels)), labels)
    ax.set_ylabel("PDE (endpoint error / path length)")
    fig.tight_layout()
    return _save(fig, Path(out_path))
