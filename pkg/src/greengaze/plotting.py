"""Figure rendering for the report paths: loss curves and the angular-error
grid, written as PNG files next to their CSV counterparts."""

from __future__ import annotations

from pathlib import Path
from typing import Dict, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .calibration import ErrorGrid  # noqa: E402


def render_loss_curves(columns: Dict[str, np.ndarray], out_png: str | Path) -> Path:
    """Two-panel loss plot: discriminator halves on top, generator composites
    and components below. `columns` comes from trainer.read_loss_csv."""
    out_png = Path(out_png)
    out_png.parent.mkdir(parents=True, exist_ok=True)
    steps = columns["step"]
    fig, (ax_d, ax_g) = plt.subplots(2, 1, figsize=(9, 7), sharex=True)
    for name in ("dA_real", "dA_fake", "dB_real", "dB_fake"):
        ax_d.plot(steps, columns[name], label=name, linewidth=0.9)
    ax_d.set_ylabel("discriminator loss")
    ax_d.legend(loc="upper right", fontsize=8)
    ax_d.grid(alpha=0.3)
    for name in ("g_AtoB", "g_BtoA"):
        ax_g.plot(steps, columns[name], label=name, linewidth=1.2)
    for name in ("adv", "cyc_f", "cyc_b", "id"):
        if name in columns:
            ax_g.plot(steps, columns[name], label=name, linewidth=0.7, alpha=0.7)
    ax_g.set_xlabel("step")
    ax_g.set_ylabel("generator loss")
    ax_g.legend(loc="upper right", fontsize=8)
    ax_g.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_png, dpi=120)
    plt.close(fig)
    return out_png


def render_error_grid(grid: ErrorGrid, out_png: str | Path) -> Path:
    """Annotated 4x5 heatmap of per-target mean errors in degrees."""
    out_png = Path(out_png)
    out_png.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(7, 5))
    im = ax.imshow(grid.cells, cmap="viridis")
    for r in range(grid.cells.shape[0]):
        for c in range(grid.cells.shape[1]):
            ax.text(c, r, f"{grid.cells[r, c]:.2f}", ha="center", va="center",
                    color="white", fontsize=10)
    ax.set_xticks(range(grid.cells.shape[1]),
                  [str(i + 1) for i in range(grid.cells.shape[1])])
    ax.set_yticks(range(grid.cells.shape[0]),
                  [f"row {i + 1}" for i in range(grid.cells.shape[0])])
    ax.set_title(f"mean angular error: {grid.mean_deg:.2f} deg")
    fig.colorbar(im, ax=ax, label="degrees")
    fig.tight_layout()
    fig.savefig(out_png, dpi=120)
    plt.close(fig)
    return out_png
