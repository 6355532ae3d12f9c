"""Figures written next to the CSV outputs of the report commands."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_bounds(rows, path, qber: float | None = None, qber_err: float | None = None):
    """Tolerable QBER against dimension for both attacks, with a measured point."""
    d = np.array([r["d"] for r in rows])
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(d, [r["bound_ir"] for r in rows], "o-", ms=3, label="intercept-resend (M=2)")
    ax.plot(d, [r["bound_coherent"] for r in rows], "s-", ms=3, label="cloning crossover")
    if qber is not None:
        ax.errorbar([7], [qber], yerr=qber_err, fmt="k*", ms=9, label="measured QBER")
    ax.set_xlabel("dimension d")
    ax.set_ylabel("error bound")
    ax.set_ylim(0, 0.55)
    ax.legend(frameon=False, fontsize=8)
    _finish(fig, path)


def plot_crosstalk(matrices: dict, path):
    """Conditional detection probabilities, one panel per basis."""
    fig, axes = plt.subplots(1, len(matrices), figsize=(4 * len(matrices), 3.6))
    axes = np.atleast_1d(axes)
    for ax, (basis, m) in zip(axes, matrices.items()):
        im = ax.imshow(m, vmin=0, vmax=1, cmap="viridis")
        ax.set_title(getattr(basis, "name", str(basis)))
        ax.set_xlabel("detected")
        ax.set_ylabel("sent")
        fig.colorbar(im, ax=ax, fraction=0.046)
    _finish(fig, path)
