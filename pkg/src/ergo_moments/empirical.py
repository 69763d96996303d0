"""Empirical-process statistics of a trajectory against a reference CDF.

Central objects: the centered empirical process

    G_k(t) = #{i <= k : x_i <= t} - k F(t),      t in [0, 1],

its L^q([0,1]) norm D_{k,q}, the running maximum of D_{k,q} over k, the
Wasserstein-1 distance between the empirical measure and F, and maxima of
centered partial sums of an observable.

Two routes are provided for the L^2 case and cross-check each other:
a generic midpoint-quadrature evaluator for any q >= 1, and an exact
O(n log n) incremental evaluator based on the expansion

    D_{k,2}^2 = int C_k^2 - 2k int C_k F + k^2 int F^2,

whose three pieces update in O(log n) per added point (the squared-counts
term via an order-statistics tree, the cross term via int_{x}^1 F).
The exact route makes a running maximum over *all* k affordable at large n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .cdf import PiecewiseCdf

__all__ = [
    "EmpiricalStats",
    "empirical_G",
    "d_nq",
    "max_d_kq",
    "d2_profile",
    "d_n2_exact",
    "max_d_k2_exact",
    "wasserstein1",
    "birkhoff_max",
]


def empirical_G(points, F, t):
    """G_n(t) = #{k : x_k <= t} - n F(t); vectorized over t in [0, 1]."""
    xs = np.sort(np.asarray(points, dtype=float))
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0.0) or np.any(t_arr > 1.0):
        raise ValueError("t must lie in [0, 1]")
    counts = np.searchsorted(xs, t_arr, side="right")
    out = counts - xs.size * np.asarray(F(t_arr), dtype=float)
    return float(out) if np.isscalar(t) or t_arr.ndim == 0 else out


def d_nq(points, F, q: float, grid_m: int | None = None) -> float:
    """(int_0^1 |G_n(t)|^q dt)^(1/q) by composite midpoint quadrature.

    The default grid, max(4096, 8n) points, puts at least 8 quadrature nodes
    between consecutive sample jumps on average.
    """
    if q < 1:
        raise ValueError(f"q must be >= 1, got {q}")
    xs = np.sort(np.asarray(points, dtype=float))
    n = xs.size
    if grid_m is None:
        grid_m = max(4096, 8 * n)
    if grid_m < 2:
        raise ValueError(f"grid_m must be >= 2, got {grid_m}")
    t = (np.arange(grid_m) + 0.5) / grid_m
    G = np.searchsorted(xs, t, side="right") - n * np.asarray(F(t), dtype=float)
    return float(np.mean(np.abs(G) ** q) ** (1.0 / q))


def max_d_kq(points, F, q: float, stride: int | None = None) -> float:
    """max over k in {stride, 2 stride, ..., n} u {n} of D_{k,q}.

    Exact maximum when stride = 1; larger strides give a lower bound whose
    gap is controlled by how much D can move per step (at most 1 per added
    point, since |G| changes by at most 1).  Default stride is 1 up to
    n = 4096 and ceil(n / 4096) beyond.
    """
    if stride is not None and stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    pts = np.asarray(points, dtype=float)
    n = pts.size
    if n == 0:
        raise ValueError("points must be nonempty")
    if stride is None:
        stride = 1 if n <= 4096 else math.ceil(n / 4096)
    ks = list(range(stride, n + 1, stride))
    if not ks or ks[-1] != n:
        ks.append(n)
    return max(d_nq(pts[:k], F, q) for k in ks)


@njit(cache=True, nogil=True)
def _d2_profile_kernel(xs, ranks, phi, j2, checkpoints):
    """Exact D_{k,2}^2 for every k, reporting running max and current value
    at each checkpoint.  Order statistics of the growing prefix are kept in
    Fenwick trees over the precomputed global ranks."""
    n = xs.size
    tree_cnt = np.zeros(n + 1)
    tree_sum = np.zeros(n + 1)
    out_max = np.empty(checkpoints.size)
    out_fin = np.empty(checkpoints.size)
    B = 0.0  # int C_k^2 = sum_{i,j<=k} (1 - max(x_i, x_j))
    A = 0.0  # int C_k F  = sum_{i<=k} int_{x_i}^1 F
    total_sum = 0.0
    run_max = -1e300
    ci = 0
    for k in range(1, n + 1):
        xv = xs[k - 1]
        r = ranks[k - 1]
        idx = r
        cnt_le = 0.0
        sum_le = 0.0
        while idx > 0:
            cnt_le += tree_cnt[idx]
            sum_le += tree_sum[idx]
            idx -= idx & (-idx)
        sum_gt = total_sum - sum_le
        B += 2.0 * ((k - 1) - xv * cnt_le - sum_gt) + (1.0 - xv)
        A += phi[k - 1]
        d2 = B - 2.0 * k * A + float(k) * float(k) * j2
        if d2 > run_max:
            run_max = d2
        if ci < checkpoints.size and k == checkpoints[ci]:
            out_max[ci] = run_max
            out_fin[ci] = d2
            ci += 1
        idx = r + 1
        while idx <= n:
            tree_cnt[idx] += 1.0
            tree_sum[idx] += xv
            idx += idx & (-idx)
        total_sum += xv
    return out_max, out_fin


def d2_profile(points, cdf: PiecewiseCdf, checkpoints) -> tuple[np.ndarray, np.ndarray]:
    """Exact (max_{k<=c} D_{k,2}, D_{c,2}) at each checkpoint c.

    One O(n log n) pass over the trajectory; checkpoints must be increasing
    indices in [1, n].
    """
    xs = np.ascontiguousarray(points, dtype=float)
    n = xs.size
    cps = np.asarray(checkpoints, dtype=np.int64)
    if cps.size == 0 or np.any(np.diff(cps) <= 0) or cps[0] < 1 or cps[-1] > n:
        raise ValueError("checkpoints must be increasing indices in [1, n]")
    order = np.argsort(xs, kind="stable")
    ranks = np.empty(n, dtype=np.int64)
    ranks[order] = np.arange(n, dtype=np.int64)
    phi = np.ascontiguousarray(cdf.integral_from(xs))
    j2 = cdf.square_integral()
    out_max, out_fin = _d2_profile_kernel(xs, ranks, phi, j2, cps)
    return np.sqrt(np.maximum(out_max, 0.0)), np.sqrt(np.maximum(out_fin, 0.0))


def d_n2_exact(points, cdf: PiecewiseCdf) -> float:
    """Exact D_{n,2} (no quadrature error)."""
    n = np.asarray(points).size
    return float(d2_profile(points, cdf, [n])[1][0])


def max_d_k2_exact(points, cdf: PiecewiseCdf) -> float:
    """Exact max_{1<=k<=n} D_{k,2} over every prefix."""
    n = np.asarray(points).size
    return float(d2_profile(points, cdf, [n])[0][0])


def wasserstein1(points, cdf: PiecewiseCdf) -> float:
    """Exact int_0^1 |F_n(t) - F(t)| dt.

    Both functions are piecewise linear between the merged breakpoints
    (samples and CDF knots), so every elementary segment integrates in
    closed form, splitting at the root when the difference changes sign.
    """
    xs = np.sort(np.asarray(points, dtype=float))
    if xs.size == 0:
        raise ValueError("points must be nonempty")
    edges = np.union1d(xs, cdf.knots)
    fn = np.searchsorted(xs, edges[:-1], side="right") / xs.size
    fv = cdf(edges)
    d0 = fn - fv[:-1]
    d1 = fn - fv[1:]
    w = np.diff(edges)
    same = d0 * d1 >= 0.0
    denom = np.maximum(np.abs(d0 - d1), 1e-300)
    seg = np.where(same, 0.5 * np.abs(d0 + d1) * w, 0.5 * (d0 * d0 + d1 * d1) / denom * w)
    return float(np.sum(seg))


def birkhoff_max(points, f, nu_f: float) -> float:
    """max_k |sum_{i<=k} (f(x_i) - nu_f)| over all prefixes."""
    vals = np.asarray(f(np.asarray(points, dtype=float)), dtype=float) - nu_f
    return float(np.max(np.abs(np.cumsum(vals))))


@dataclass(frozen=True)
class EmpiricalStats:
    """Per-replica statistic bundle at one sample size."""

    n: int
    q: float
    d_nq: float
    max_d_kq: float
    w1: float
    max_birkhoff: float | None = None

    def __post_init__(self):
        if self.d_nq < 0 or self.max_d_kq < self.d_nq - 1e-9:
            raise ValueError("need 0 <= d_nq <= max_d_kq")
