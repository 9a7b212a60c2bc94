"""Figure rendering for the report path.

Every figure is written to a file next to the delimited output; nothing is
shown interactively.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .domain import Grid
from .fields import ScalarField


def field_figure(grid: Grid, field: ScalarField, path: str, title: str = "") -> None:
    """1D fields as a line plot, 2D fields as a cell-value heatmap."""
    fig, ax = plt.subplots(figsize=(6, 4))
    if grid.n == 1:
        ax.plot(grid.centers[:, 0], field.values, lw=1.2)
        ax.set_xlabel("x")
        ax.set_ylabel("value")
    elif grid.n == 2:
        nx = int(grid.index[:, 0].max()) + 1
        ny = int(grid.index[:, 1].max()) + 1
        img = np.full((ny, nx), np.nan)
        img[grid.index[:, 1], grid.index[:, 0]] = field.values
        ax.imshow(img, origin="lower", interpolation="nearest", cmap="viridis")
        ax.set_xlabel("cell i")
        ax.set_ylabel("cell j")
    else:
        ax.hist(field.values, bins=50)
        ax.set_xlabel("value")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def hk_curve_figure(ks, uppers, path: str, lowers=None, exact=None,
                    title: str = "") -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.loglog(ks, uppers, "o-", label="upper bound")
    if lowers is not None:
        ax.loglog(ks, lowers, "s--", label="Faber-Krahn lower")
    if exact is not None:
        finite = [not math.isnan(v) for v in exact]
        if any(finite):
            ax.loglog([k for k, f in zip(ks, finite) if f],
                      [v for v, f in zip(exact, finite) if f],
                      "x:", label="exact")
    ax.set_xlabel("k")
    ax.set_ylabel("h_k")
    ax.legend()
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def p_trend_figure(ps, lambdas, h1: float, path: str, title: str = "") -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(ps, lambdas, "o-", label="lambda_1(p)")
    if not math.isnan(h1):
        ax.axhline(h1, color="gray", ls="--", label="h_1")
    ax.set_xlabel("p")
    ax.set_ylabel("lambda_1")
    ax.invert_xaxis()
    ax.legend()
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
