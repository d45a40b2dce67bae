"""Static figures for the CLI's ``--plot`` flag.

Figures are written with the Agg backend so nothing needs a display.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
STYLE = {
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "savefig.dpi": 150,
    # fixed metadata keeps the bytes reproducible
    "svg.hashsalt": "stepcert",
}


def _figure(width=5.0):
    return plt.subplots(figsize=(width, width * GOLDEN))


def _save(fig, path: Path) -> Path:
    path = Path(path)
    fig.savefig(path, bbox_inches="tight", metadata={"Software": None})
    plt.close(fig)
    return path


def plot_trajectories(rows, path) -> Path:
    """``rows`` are ``(label, norms)`` pairs; norms on a log axis against step."""
    with plt.rc_context(STYLE):
        fig, ax = _figure()
        for label, norms in rows:
            norms = np.asarray(norms, dtype=float)
            ax.semilogy(np.arange(norms.size), np.maximum(norms, 1e-300), lw=1, label=label)
        ax.set_xlabel("iteration")
        ax.set_ylabel("|z_j|")
        if len(rows) <= 10:
            ax.legend(frameon=False, fontsize=7)
        return _save(fig, path)


def plot_expected_costs(result, path) -> Path:
    """Monte-Carlo expected cost over the net, with the ERM picks marked."""
    rows = np.array(result.cost_rows())
    picks = [t["selected"] for t in result.report["per_trial"]]
    with plt.rc_context(STYLE):
        if result.report["method"] == "GD":
            fig, ax = _figure()
            ax.errorbar(rows[:, 0], rows[:, 2], yerr=rows[:, 3], fmt="o-", ms=3, lw=1, label="expected cost")
            rho_picks = np.array([p["rho"] for p in picks])
            uniq, counts = np.unique(rho_picks, return_counts=True)
            idx = np.searchsorted(rows[:, 0], uniq)
            ax.scatter(uniq, rows[idx, 2], s=10 + 40 * counts / counts.max(), c="C3", zorder=3, label="ERM picks")
            ax.set_xlabel("rho")
            ax.set_ylabel("cost")
            ax.legend(frameon=False)
        else:
            rhos, etas = np.unique(rows[:, 0]), np.unique(rows[:, 1])
            grid = rows[:, 2].reshape(rhos.size, etas.size)
            fig, ax = _figure()
            im = ax.imshow(grid.T, origin="lower", aspect="auto",
                           extent=(rhos[0], rhos[-1], etas[0], etas[-1]), cmap="viridis")
            fig.colorbar(im, ax=ax, label="expected cost")
            ax.scatter([p["rho"] for p in picks], [p["eta"] for p in picks], s=6, c="w", marker="x")
            ax.set_xlabel("rho")
            ax.set_ylabel("eta")
            ax.grid(False)
        return _save(fig, path)


def plot_excess(report: dict, path) -> Path:
    excess = np.array([t["excess"] for t in report["per_trial"]])
    with plt.rc_context(STYLE):
        fig, ax = _figure()
        ax.hist(excess, bins=min(30, max(5, excess.size // 5)), color="C0", alpha=0.8)
        ax.axvline(report["tolerance"], color="C3", ls="--", lw=1, label="C + eps + noise")
        ax.set_xlabel("excess expected cost of ERM pick")
        ax.set_ylabel("trials")
        ax.legend(frameon=False)
        return _save(fig, path)


def plot_verify(report: dict, path) -> Path:
    """Worst measured/bound ratio per suite; anything above 1 is a violation."""
    suites = [s for s in report["suites"] if s["draws"] > 0]
    with plt.rc_context(STYLE):
        fig, ax = _figure(6.0)
        names = [s["name"] for s in suites]
        ratios = [s["worst_ratio"] for s in suites]
        colors = ["C3" if s["status"] == "fail" else "C0" for s in suites]
        ax.barh(names, ratios, color=colors)
        ax.axvline(1.0, color="k", lw=0.8)
        ax.set_xlabel("worst measured / bound")
        return _save(fig, path)
