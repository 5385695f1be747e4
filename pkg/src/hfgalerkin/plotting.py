"""Error-versus-degree figure for sweep results.

Optional: only the ``--figure`` flag of ``sweep`` imports this module.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "lines.linewidth": 1.2,
    "lines.markersize": 4,
    "figure.dpi": 150,
}


def plot_sweep(rows, path, title: str | None = None):
    """Two panes of log10 relative error against degree, global and shadow, one line per k."""
    ks = sorted({r["k"] for r in rows})
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 2, figsize=(7.0, 3.0), sharey=True)
        for ax, key, label in ((axes[0], "global_relerr", "global"),
                               (axes[1], "shadow_relerr", "shadow")):
            for k in ks:
                sel = sorted((r for r in rows if r["k"] == k), key=lambda r: r["d"])
                ax.semilogy([r["d"] for r in sel], [r[key] for r in sel], "o-", label=f"k = {k:g}")
            ax.set_xlabel("degree d")
            ax.set_title(f"{label} relative error")
            ax.grid(True, which="both", alpha=0.3)
        axes[0].set_ylabel("relative L2 error")
        axes[1].legend(loc="upper right")
        if title:
            fig.suptitle(title)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return path
