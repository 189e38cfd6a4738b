"""Matplotlib figures rendered next to the delimited report output."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from ..synthshape.render import render_grid, view_directions


def per_category_accuracy_figure(report, path):
    cats = list(report.per_category_acc)
    vals = [report.per_category_acc[c] for c in cats]
    fig, ax = plt.subplots(figsize=(7, 3.2))
    ax.bar(range(len(cats)), vals, color="#4878a8")
    ax.axhline(report.acc, color="#b04a4a", lw=1, ls="--",
               label=f"overall {report.acc:.1f}%")
    ax.set_xticks(range(len(cats)))
    ax.set_xticklabels(cats, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("accuracy [%]")
    ax.set_ylim(0, 105)
    ax.legend(loc="lower right", fontsize=8)
    ax.set_title("per-category accuracy of generated shapes")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def gallery_figure(grids, prompts, path, max_items=24):
    """Depth-render thumbnails of generated grids, one per prompt."""
    n = min(len(grids), max_items)
    cols = 6
    rows = (n + cols - 1) // cols
    direction = view_directions(8)[1]
    fig, axes = plt.subplots(rows, cols, figsize=(1.9 * cols, 2.1 * rows))
    axes = np.atleast_2d(axes)
    for i in range(rows * cols):
        ax = axes[i // cols, i % cols]
        ax.axis("off")
        if i < n:
            ax.imshow(render_grid(grids[i], direction, 64, 64), cmap="gray",
                      vmin=0, vmax=1)
            ax.set_title(prompts[i], fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def report_figures(report, out_dir, grids=None, query_set=None):
    per_category_accuracy_figure(report, out_dir / "per_category_accuracy.png")
    if grids is not None and query_set is not None:
        gallery_figure(grids, query_set.prompts(), out_dir / "generated_gallery.png")


def prefix_sweep_figure(reports, path):
    prefixes = [r.prefix for r in reports]
    x = np.arange(len(prefixes))
    fig, axes = plt.subplots(1, 3, figsize=(11, 3))
    for ax, key, label in zip(axes, ("fid", "mmd", "acc"),
                              ("FID (lower better)", "MMD-IOU (higher better)",
                               "Acc [%] (higher better)")):
        ax.bar(x, [getattr(r, key) for r in reports], color="#4878a8")
        ax.set_xticks(x)
        ax.set_xticklabels(prefixes, rotation=30, ha="right", fontsize=7)
        ax.set_title(label, fontsize=9)
    fig.suptitle("prompt prefix sweep")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def ablation_figure(table, axis_name, path):
    """table: {axis_value: [per-seed EvalReport, ...]}"""
    values = list(table)
    fig, axes = plt.subplots(1, 3, figsize=(11, 3))
    for ax, key, label in zip(axes, ("fid", "mmd", "acc"),
                              ("FID", "MMD-IOU", "Acc [%]")):
        medians = []
        for v in values:
            pts = [getattr(r, key) for r in table[v]]
            ax.scatter([str(v)] * len(pts), pts, s=14, color="#777777", zorder=2)
            medians.append(float(np.median(pts)))
        ax.plot([str(v) for v in values], medians, "o-", color="#b04a4a", zorder=3)
        ax.set_title(label, fontsize=9)
        ax.set_xlabel(axis_name, fontsize=8)
    fig.suptitle(f"ablation: {axis_name} (dots = seeds, line = median)")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
