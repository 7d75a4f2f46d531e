"""Quick-look figures rendered next to the delimited output.

Everything is headless (Agg) and file-based; the CSV stays the canonical
record, the figures are for eyeballing a run without opening a notebook.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import numpy as np
from matplotlib import pyplot as plt

__all__ = ["ladder_figure", "trace_figure", "profile_figure", "table_figure"]


def _save(fig, path: str) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def ladder_figure(path: str, eps, series: dict[str, np.ndarray], ylabel: str) -> None:
    """Log-log lines over a scale ladder, one per named series."""
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    for label, ys in series.items():
        ys = np.asarray(ys, dtype=float)
        pos = ys > 0
        if np.any(pos):
            ax.loglog(np.asarray(eps)[pos], ys[pos], "o-", label=label)
        else:
            # an all-zero series still deserves a mark at the bottom
            ax.semilogx(eps, np.zeros_like(ys), "o-", label=label)
    ax.set_xlabel("scale")
    ax.set_ylabel(ylabel)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    _save(fig, path)


def trace_figure(path: str, trace, ylabel: str = "energy") -> None:
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    ax.plot(np.arange(len(trace)), trace, "-")
    ax.set_xlabel("sweep")
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    _save(fig, path)


def profile_figure(path: str, scales, quotients, exponent: float) -> None:
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    ax.loglog(scales, np.maximum(quotients, 1e-300), "o-", label="sup quotient")
    ax.set_xlabel("scale")
    ax.set_ylabel("sup quotient")
    ax.set_title(f"fitted exponent {exponent:.3f}", fontsize=9)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    _save(fig, path)


def table_figure(path: str, matrix: np.ndarray, title: str) -> None:
    fig, ax = plt.subplots(figsize=(4.2, 3.6))
    im = ax.imshow(np.asarray(matrix, dtype=float), cmap="viridis")
    fig.colorbar(im, ax=ax, shrink=0.85)
    ax.set_title(title, fontsize=9)
    _save(fig, path)
