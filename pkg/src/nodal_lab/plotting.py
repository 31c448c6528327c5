"""Self-contained SVG figures with byte-stable output."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.patches import Circle  # noqa: E402

from .grid import GridDomain  # noqa: E402
from .nodal import NodalDecomposition  # noqa: E402

STYLE = {
    "svg.hashsalt": "nodal-lab",
    "svg.fonttype": "path",
    "font.size": 9,
    "axes.linewidth": 0.8,
    "figure.dpi": 100,
}
POSITIVE = "#c0392b"
NEGATIVE = "#2c6fbb"


def _save(fig, path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def scaling_figure(lams, radii, slope: float, intercept: float, path, title: str = "") -> None:
    """Log-log scatter of ``r_min`` against ``lambda`` with the fitted power law."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.5))
        lams = np.asarray(lams, float)
        ax.loglog(lams, radii, "o", ms=3, color="0.2", label="min inner radius")
        xs = np.geomspace(lams.min() / 1.2, lams.max() * 1.2, 50)
        ax.loglog(xs, np.exp(intercept) * xs**slope, "-", color=POSITIVE, lw=1.2, label=f"fit, slope {slope:.3f}")
        ax.loglog(xs, np.exp(intercept) * xs[0] ** (slope + 0.5) * xs**-0.5, ":", color="0.5", lw=1, label="slope -1/2")
        ax.set_xlabel(r"$\lambda$")
        ax.set_ylabel(r"$r_\lambda$")
        if title:
            ax.set_title(title)
        ax.legend(frameon=False, fontsize=8)
        fig.tight_layout()
        _save(fig, path)


def nodal_figure(dec: NodalDecomposition, d: GridDomain, circles, path, title: str = "") -> None:
    """Filled nodal domains (red positive, blue negative) with inscribed circles.

    ``circles`` holds ``(center_index, radius)`` per domain.
    """
    if d.dim != 2:
        raise ValueError("nodal pictures are 2D only")
    x, y = d.coords()
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 5 * d.shape[1] / d.shape[0] if d.shape[0] >= d.shape[1] else 5))
        for k in range(dec.domain_count):
            m = (dec.labels == k).astype(float)
            color = POSITIVE if dec.signs[k] > 0 else NEGATIVE
            ax.contourf(x, y, m, levels=[0.5, 1.5], colors=[color], alpha=0.55)
        for center, r in circles:
            c = (x[center], y[center])
            ax.add_patch(Circle(c, r, fill=False, lw=0.7, color="k"))
            ax.plot(*c, ".", ms=1.5, color="k")
        ax.contour(x, y, d.mask.astype(float), levels=[0.5], colors="0.3", linewidths=0.6)
        ax.set_aspect("equal")
        ax.set_xticks([])
        ax.set_yticks([])
        if title:
            ax.set_title(title)
        fig.tight_layout()
        _save(fig, path)
