"""Static SVG figures: filter waveforms, signal heatmaps and metric bars.

Output is byte-stable across runs: the SVG hash salt is fixed and the date
metadata is dropped.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_RC = {"svg.hashsalt": "simgcf", "svg.fonttype": "none"}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def waveform_svg(rows: list[dict], path, title: str = "") -> Path:
    """Plot the columns of a waveform table (``lambda`` plus curves) against lambda."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5, 3.5))
        lam = [r["lambda"] for r in rows]
        for key in rows[0]:
            if key == "lambda":
                continue
            ax.plot(lam, [r[key] for r in rows], label=key)
        ax.axhline(0.0, color="0.6", lw=0.5)
        ax.set_xlabel("lambda")
        ax.set_title(title)
        ax.legend(fontsize="small")
        fig.tight_layout()
        return _save(fig, path)


def heatmap_svg(matrix, path, title: str = "", labels=None) -> Path:
    """Signed heatmap of a node-by-node signal matrix on a symmetric colour scale."""
    m = np.asarray(matrix, dtype=np.float64)
    vmax = float(np.max(np.abs(m))) or 1.0
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(4.5, 4))
        im = ax.imshow(m, cmap="RdBu_r", vmin=-vmax, vmax=vmax)
        if labels is not None:
            ticks = np.arange(len(labels))
            ax.set_xticks(ticks, labels=labels, fontsize="x-small")
            ax.set_yticks(ticks, labels=labels, fontsize="x-small")
        ax.set_title(title)
        fig.colorbar(im, ax=ax, shrink=0.8)
        fig.tight_layout()
        return _save(fig, path)


def metric_bars_svg(table: dict[str, dict[str, float]], path, title: str = "") -> Path:
    """Grouped bars: ``table[model][metric] = value``."""
    models = list(table)
    metrics = sorted({m for row in table.values() for m in row})
    width = 0.8 / max(len(models), 1)
    x = np.arange(len(metrics))
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(1.2 + 1.1 * len(metrics), 3.5))
        for k, model in enumerate(models):
            vals = [table[model].get(m, np.nan) for m in metrics]
            ax.bar(x + k * width, vals, width, label=model)
        ax.set_xticks(x + width * (len(models) - 1) / 2, labels=metrics)
        ax.set_title(title)
        ax.legend(fontsize="small")
        fig.tight_layout()
        return _save(fig, path)
