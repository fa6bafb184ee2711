"""Report figures, written straight to PNG files."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (5.0, 3.6),
    "figure.dpi": 100,
    "axes.labelsize": 9,
    "axes.titlesize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.0,
    "savefig.dpi": 120,
}


def init_figure(**kw):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(**kw)
    return fig, ax


def save_figure(fig, path):
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)


def plot_curves(path, curves, xlabel, ylabel, title="", logx=False, logy=False, hline=None):
    """``curves`` maps a label to ``(x, y, yerr)``."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for label, (x, y, err) in curves.items():
            ax.errorbar(x, y, yerr=None if err is None else 3 * np.asarray(err),
                        marker="o", ms=3, capsize=2, label=str(label))
        if hline is not None:
            ax.axhline(hline, color="0.5", lw=0.8, ls="--")
        if logx:
            ax.set_xscale("log")
        if logy:
            ax.set_yscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        if len(curves) > 1:
            ax.legend()
        save_figure(fig, path)


def plot_mask(path, bits, highlight=None, extent=None, title=""):
    """Excursion set in grey with an optional highlighted component in black."""
    img = np.where(np.asarray(bits, bool), 0.6, 1.0)
    if highlight is not None:
        img = np.where(highlight, 0.0, img)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.0, 4.0 * bits.shape[0] / bits.shape[1] + 0.3))
        ax.imshow(img, origin="lower", cmap="gray", vmin=0, vmax=1, extent=extent,
                  interpolation="nearest")
        if title:
            ax.set_title(title)
        save_figure(fig, path)


def plot_heatmap(path, values, extent=None, title="", label=""):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        im = ax.imshow(values, origin="lower", extent=extent, cmap="viridis",
                       interpolation="nearest")
        fig.colorbar(im, ax=ax, label=label)
        if title:
            ax.set_title(title)
        save_figure(fig, path)
