"""Figure rendering for the report paths.

Every experiment report can emit a PNG next to its CSV/JSON output; the
delimited files remain the authoritative record, figures are for eyeballs.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .dynamics import TowerPartition, UlamModel
from .experiments import DeviationResult, ExperimentResult

__all__ = ["scaling_figure", "deviation_figure", "cdf_figure", "tower_figure"]

_DPI = 150


def scaling_figure(result: ExperimentResult, path: str) -> str:
    """Log-log moments vs n with the fitted and target slopes."""
    xs = result.ns if result.regressor == "n" else result.ns * np.log(result.ns)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.loglog(xs, result.moments, "o", label="empirical moment")
    ref = np.exp(result.fit.intercept) * xs**result.fit.slope
    ax.loglog(xs, ref, "-", label=f"fit: slope {result.fit.slope:.3f}")
    anchor = result.moments[0] / xs[0] ** result.target_slope
    ax.loglog(xs, anchor * xs**result.target_slope, "--",
              label=f"target slope {result.target_slope:.3f}")
    ax.set_xlabel("n" if result.regressor == "n" else "n log n")
    ax.set_ylabel(f"||{result.config.statistic}||, p={result.config.p:g}")
    ax.set_title(f"gamma={result.config.gamma:g}, {result.config.replicas} replicas")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def deviation_figure(result: DeviationResult, path: str) -> str:
    """Log-log tail of the normalized statistic with fitted/target slopes."""
    keep = result.tail > 0
    x, t = result.x[keep], result.tail[keep]
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.loglog(x, t, "o", label="empirical tail")
    anchor = t[len(t) // 2] / x[len(t) // 2] ** result.slope
    ax.loglog(x, anchor * x**result.slope, "-", label=f"window slope {result.slope:.3f}")
    anchor2 = t[len(t) // 2] / x[len(t) // 2] ** result.target_slope
    ax.loglog(x, anchor2 * x**result.target_slope, "--",
              label=f"target slope {result.target_slope:.3f}")
    ax.set_xlabel(f"x  (statistic / n^{'%g' % (result.config.gamma if result.config.statistic != 'w1' else result.config.gamma - 1)})")
    ax.set_ylabel("tail probability")
    ax.set_title(f"gamma={result.config.gamma:g}, n={result.n}, {result.config.replicas} replicas")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def cdf_figure(model: UlamModel, path: str) -> str:
    """Invariant CDF on [0, 1] (linear and near-0 log views)."""
    fig, axes = plt.subplots(1, 2, figsize=(9, 4))
    t = np.linspace(0, 1, 2000)
    axes[0].plot(t, model.cdf(t))
    axes[0].set_xlabel("t")
    axes[0].set_ylabel("F(t)")
    axes[0].set_title(f"invariant CDF, gamma={model.gamma:g}, m={model.m}")
    ts = np.geomspace(1e-4, 1, 500)
    axes[1].loglog(ts, np.maximum(model.cdf(ts), 1e-12))
    axes[1].set_xlabel("t")
    axes[1].set_title("near the neutral fixed point")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def tower_figure(tower: TowerPartition, path: str) -> str:
    """Return-time tail vs k with the -1/gamma reference slope."""
    k = np.arange(1, tower.tail.size)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.loglog(k, tower.tail[1:], label="tail mass")
    ref = tower.tail[1] * k ** (-1.0 / tower.gamma)
    ax.loglog(k, ref, "--", label=f"slope -1/gamma = {-1 / tower.gamma:.3f}")
    ax.set_xlabel("k")
    ax.set_ylabel("mass of return time > k")
    ax.set_title(f"gamma={tower.gamma:g}")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path
