"""Matplotlib figures written to files with reproducible bytes.

SVG ids are salted with a fixed string and date metadata is dropped, so the
same data always renders to the same file.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "svg.hashsalt": "ganforge",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.dpi": 100,
}

MARKERS = {"real": "o", "synthetic": "^"}


def save_figure(fig, path) -> Path:
    path = Path(path)
    fmt = path.suffix.lstrip(".").lower() or "svg"
    meta = {"Date": None} if fmt == "svg" else {"Software": None} if fmt == "png" else None
    with matplotlib.rc_context(STYLE):
        fig.savefig(path, format=fmt, metadata=meta)
    plt.close(fig)
    return path


def _figure(size=(5.0, 3.5)):
    with matplotlib.rc_context(STYLE):
        return plt.subplots(figsize=size)


def scatter(x, y, labels, source, path, title: str = "", margin: float = 0.05) -> Path:
    """Colour by label, marker by real/synthetic, limits padded by ``margin``."""
    with matplotlib.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.0, 4.5))
        labels = np.asarray(labels)
        source = np.asarray(source)
        classes = np.unique(labels)
        cmap = plt.get_cmap("tab10")
        for ci, c in enumerate(classes):
            for src, marker in MARKERS.items():
                sel = (labels == c) & (source == src)
                if sel.any():
                    ax.scatter(
                        x[sel], y[sel], s=14, marker=marker, color=cmap(ci % 10),
                        alpha=0.8, linewidths=0, label=f"{c} {src}",
                    )
        if len(x):
            for setter, v in ((ax.set_xlim, x), (ax.set_ylim, y)):
                lo, hi = float(np.min(v)), float(np.max(v))
                pad = margin * (hi - lo) if hi > lo else 1.0
                setter(lo - pad, hi + pad)
        if title:
            ax.set_title(title)
        if len(classes) * len(np.unique(source)) > 1:
            ax.legend(fontsize=7, frameon=False, loc="best")
        fig.tight_layout()
    return save_figure(fig, path)


def loss_curves(history, path) -> Path:
    with matplotlib.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.0, 3.5))
        ax.plot(history.epoch, history.d_loss, label="discriminator")
        ax.plot(history.epoch, history.g_loss, label="generator")
        ax.set_xlabel("epoch")
        ax.set_ylabel("loss")
        ax.legend(frameon=False)
        fig.tight_layout()
    return save_figure(fig, path)


def score_curves(epochs, d_real, d_fake, path) -> Path:
    with matplotlib.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.0, 3.5))
        ax.plot(epochs, d_real, label="mean D(real)")
        ax.plot(epochs, d_fake, label="mean D(fake)")
        ax.set_xlabel("epoch")
        ax.set_ylabel("score")
        ax.set_ylim(-0.02, 1.02)
        ax.legend(frameon=False)
        fig.tight_layout()
    return save_figure(fig, path)


def grouped_bars(groups, series: dict[str, tuple], path, ylabel: str = "") -> Path:
    """Bars per group for each named series of ``(means, stds)``."""
    with matplotlib.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(max(4.0, 1.2 * len(groups) + 2), 3.5))
        k = len(series)
        width = 0.8 / max(k, 1)
        pos = np.arange(len(groups))
        for i, (name, (means, stds)) in enumerate(series.items()):
            ax.bar(pos + (i - (k - 1) / 2) * width, means, width, yerr=stds, label=name, capsize=2)
        ax.set_xticks(pos)
        ax.set_xticklabels(groups, rotation=20, ha="right")
        if ylabel:
            ax.set_ylabel(ylabel)
        if k > 1:
            ax.legend(frameon=False, fontsize=7)
        fig.tight_layout()
    return save_figure(fig, path)
