"""Reproducible SVG scatter plots for the pipeline artifacts."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_COLORS = {
    "TOO_SIMILAR": "tab:gray",
    "GOOD_PARTNER_SIMILARITY": "tab:green",
    "DISSIMILAR_WEAK": "tab:orange",
    "HIGH_BASE_ERROR": "tab:red",
}


def scatter_svg(path, xs, ys, labels, categories=None, xlabel="", ylabel="", fit=None) -> None:
    """Labelled scatter, optionally with a fitted line and its confidence band.

    ``fit`` is a :class:`~twinforge.doe.LinearFit`; the band is re-evaluated on
    a dense grid spanning the data.
    """
    from .doe import linfit_bounds

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with plt.rc_context({"svg.hashsalt": "twinforge", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6.0, 4.5))
        colors = [_COLORS.get(c, "tab:blue") for c in categories] if categories else "tab:blue"
        ax.scatter(xs, ys, c=colors, s=18, zorder=3)
        for x, y, lab in zip(xs, ys, labels):
            ax.annotate(lab, (x, y), fontsize=6, xytext=(3, 3), textcoords="offset points")
        if fit is not None and len(xs) >= 3:
            grid = np.linspace(min(xs), max(xs), 50)
            dense = linfit_bounds(xs, ys, fit.p, x_eval=grid)
            ax.plot(grid, fit.intercept + fit.slope * grid, color="k", lw=1)
            ax.fill_between(grid, dense.lower, dense.upper, color="k", alpha=0.12, lw=0)
        if categories:
            for name in sorted(set(categories)):
                ax.scatter([], [], c=_COLORS.get(name, "tab:blue"), s=18, label=name)
            ax.legend(fontsize=6)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.grid(alpha=0.3)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
