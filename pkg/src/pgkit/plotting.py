"""Matplotlib rendering of principal graphs for report output."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def draw_graph(g, ax, title=""):
    """Depth-layered drawing: x = depth, vertices spread vertically.

    Multiple edges fan out with small vertical offsets; dual data, when
    present, appears as red pair labels at the even depths.
    """
    coords = {}
    for d, size in enumerate(g.depth_sizes):
        for i in range(size):
            coords[(d, i)] = (d, i - (size - 1) / 2.0)
    for d, mat in enumerate(g.adjacency):
        for i, row in enumerate(mat):
            for j, m in enumerate(row):
                if not m:
                    continue
                x0, y0 = coords[(d, i)]
                x1, y1 = coords[(d + 1, j)]
                for e in range(m):
                    off = (e - (m - 1) / 2.0) * 0.08
                    ax.plot([x0, x1], [y0 + off, y1 + off], "-", color="0.2", lw=1.2, zorder=1)
    xs = [c[0] for c in coords.values()]
    ys = [c[1] for c in coords.values()]
    ax.scatter(xs, ys, s=46, color="black", zorder=2)
    sx, sy = coords[(0, 0)]
    ax.scatter([sx], [sy], s=90, facecolor="white", edgecolor="black", zorder=3)
    if g.duals is not None:
        for bi, d in enumerate(range(0, g.max_depth + 1, 2)):
            for i, img in enumerate(g.duals[bi]):
                x, y = coords[(d, i)]
                ax.annotate(
                    str(img + 1),
                    (x, y),
                    textcoords="offset points",
                    xytext=(0, 7),
                    color="crimson",
                    fontsize=7,
                    ha="center",
                )
    ax.set_title(title, fontsize=9)
    ax.set_xticks(range(len(g.depth_sizes)))
    ax.set_yticks([])
    ax.set_xlabel("depth", fontsize=8)
    for side in ("top", "right", "left"):
        ax.spines[side].set_visible(False)


def save_pair_figure(pair, path, caption=""):
    """Render a principal/dual pair side by side to a file."""
    fig, axes = plt.subplots(1, 2, figsize=(10, 3.2))
    draw_graph(pair.principal, axes[0], "principal")
    draw_graph(pair.dual, axes[1], "dual")
    if caption:
        fig.suptitle(caption, fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def save_graph_figure(g, path, caption=""):
    fig, ax = plt.subplots(figsize=(6, 3.2))
    draw_graph(g, ax, caption)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path
