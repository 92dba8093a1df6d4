"""Residual-curve figures for the bench report path.

matplotlib is imported lazily with the Agg backend so the core library
carries no plotting dependency at import time.
"""

import numpy as np

_STYLE = {
    "none": dict(color="0.35", linestyle="--"),
    "ctw": dict(color="tab:orange"),
    "hc": dict(color="tab:green"),
    "mmf": dict(color="tab:blue", linewidth=2.0),
}


def render_residual_figure(histories, path, title=None):
    """Plot relative residual against iteration number for each method."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for method, history in histories.items():
        ax.semilogy(np.arange(len(history)), history,
                    label=method, **_STYLE.get(method, {}))
    ax.set_xlabel("iteration")
    ax.set_ylabel("relative residual")
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_iteration_bars(rows, path, title=None):
    """Bar chart of iteration counts per dataset and method."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    datasets = sorted({r.dataset for r in rows})
    methods = sorted({r.method for r in rows},
                     key=lambda m: ("none", "ctw", "hc", "mmf").index(m))
    fig, ax = plt.subplots(figsize=(1.8 + 1.2 * len(datasets), 4.0))
    width = 0.8 / max(len(methods), 1)
    for mi, method in enumerate(methods):
        xs, ys = [], []
        for di, ds in enumerate(datasets):
            row = next((r for r in rows if r.dataset == ds and r.method == method),
                       None)
            if row is None:
                continue
            xs.append(di + (mi - (len(methods) - 1) / 2.0) * width)
            ys.append(row.maxit if row.dnc else row.iterations)
        color = _STYLE.get(method, {}).get("color")
        ax.bar(xs, ys, width=width, label=method, color=color)
    ax.set_xticks(range(len(datasets)))
    ax.set_xticklabels(datasets, rotation=20, ha="right")
    ax.set_ylabel("iterations (cap if DNC)")
    if title:
        ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
