"""Piecewise-linear distribution functions on [0, 1] with exact integrals.

The reference distribution for all empirical-process statistics is carried
as a piecewise-linear CDF on a knot grid.  Linearity per segment gives
closed forms for everything the statistics need: F(t), int_x^1 F, int F^2,
and expectations of observables against the induced density.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["PiecewiseCdf", "uniform_cdf"]


@dataclass(frozen=True)
class PiecewiseCdf:
    """Nondecreasing piecewise-linear CDF with F(0) = 0, F(1) = 1."""

    knots: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.knots, dtype=float)
        f = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.size < 2 or t.shape != f.shape:
            raise ValueError("knots and values must be matching 1-d arrays, length >= 2")
        if t[0] != 0.0 or t[-1] != 1.0:
            raise ValueError("knots must span [0, 1]")
        if np.any(np.diff(t) <= 0):
            raise ValueError("knots must be strictly increasing")
        if abs(f[0]) > 1e-12 or abs(f[-1] - 1.0) > 1e-12:
            raise ValueError("CDF must run from 0 at t=0 to 1 at t=1")
        if np.any(np.diff(f) < -1e-12):
            raise ValueError("CDF must be nondecreasing")
        object.__setattr__(self, "knots", t)
        object.__setattr__(self, "values", np.clip(f, 0.0, 1.0))

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < 0.0) or np.any(t_arr > 1.0):
            raise ValueError("CDF argument must lie in [0, 1]")
        out = np.interp(t_arr, self.knots, self.values)
        return float(out) if np.isscalar(t) or t_arr.ndim == 0 else out

    def integral_from(self, x):
        """Exact int_x^1 F(t) dt, vectorized over x in [0, 1]."""
        x_arr = np.atleast_1d(np.asarray(x, dtype=float))
        if np.any(x_arr < 0.0) or np.any(x_arr > 1.0):
            raise ValueError("argument must lie in [0, 1]")
        t, f = self.knots, self.values
        w = np.diff(t)
        seg = 0.5 * w * (f[:-1] + f[1:])  # exact per-segment integral
        suffix = np.concatenate([np.cumsum(seg[::-1])[::-1], [0.0]])
        j = np.clip(np.searchsorted(t, x_arr, side="right") - 1, 0, t.size - 2)
        # remaining piece of segment j, from x to its right edge
        fx = f[j] + (f[j + 1] - f[j]) * (x_arr - t[j]) / (t[j + 1] - t[j])
        piece = 0.5 * (t[j + 1] - x_arr) * (fx + f[j + 1])
        out = suffix[j + 1] + piece
        return float(out[0]) if np.isscalar(x) or np.asarray(x).ndim == 0 else out

    def square_integral(self) -> float:
        """Exact int_0^1 F(t)^2 dt."""
        f0, f1 = self.values[:-1], self.values[1:]
        w = np.diff(self.knots)
        return float(np.sum(w * (f0 * f0 + f0 * f1 + f1 * f1) / 3.0))

    def expect(self, f, points_per_cell: int = 4) -> float:
        """int f dF by composite midpoint inside each knot cell."""
        t = self.knots
        masses = np.diff(self.values)
        k = points_per_cell
        offs = (np.arange(k) + 0.5) / k
        mids = t[:-1, None] + np.diff(t)[:, None] * offs[None, :]
        vals = np.asarray(f(mids.ravel()), dtype=float).reshape(mids.shape)
        return float(np.sum(masses * vals.mean(axis=1)))


def uniform_cdf(n_knots: int = 2) -> PiecewiseCdf:
    """The uniform distribution on [0, 1] (F(t) = t)."""
    t = np.linspace(0.0, 1.0, n_knots)
    return PiecewiseCdf(t, t.copy())
