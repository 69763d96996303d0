"""Intermittent interval map: iteration, return-time partition, invariant CDF.

The map has a neutral fixed point at 0 (left branch x(1 + 2^g x^g) on
[0, 1/2), right branch 2x - 1 on [1/2, 1]), producing polynomial return-time
tails of order 1/g on the reference set (1/2, 1].  The invariant CDF is
obtained by discretizing the transfer operator on an interval grid (exact
cell-to-cell transition masses from the two monotone inverse branches) and
solving for the stationary distribution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse
import scipy.sparse.linalg
from numba import njit
from scipy.optimize import brentq

from .cdf import PiecewiseCdf
from .rng import stream

__all__ = [
    "LsvMap",
    "Trajectory",
    "TowerPartition",
    "UlamModel",
    "lsv_map",
    "iterate",
    "preimage_left",
    "build_tower",
    "build_ulam",
    "invariant_cdf",
    "correlation_decay",
    "holder_bump",
]


@dataclass(frozen=True)
class LsvMap:
    """The interval map with sticky fixed point at 0, parameter gamma in (0,1)."""

    gamma: float

    def __post_init__(self):
        if not (0.0 < self.gamma < 1.0):
            raise ValueError(f"gamma must be in (0, 1), got {self.gamma}")

    def __call__(self, x):
        return lsv_map(self.gamma, x)


def lsv_map(gamma: float, x):
    """One map step; left branch x(1 + 2^g x^g) for x < 1/2, else 2x - 1."""
    if not (0.0 < gamma < 1.0):
        raise ValueError(f"gamma must be in (0, 1), got {gamma}")
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr < 0.0) or np.any(x_arr > 1.0):
        raise ValueError("x must lie in [0, 1]")
    left = x_arr * (1.0 + 2.0**gamma * x_arr**gamma)
    out = np.where(x_arr < 0.5, left, 2.0 * x_arr - 1.0)
    out = np.clip(out, 0.0, 1.0)
    return float(out) if np.isscalar(x) or x_arr.ndim == 0 else out


@njit(cache=True, nogil=True)
def _orbit(x0: float, gamma: float, burn_in: int, n: int) -> np.ndarray:
    c = 2.0**gamma
    x = x0
    for _ in range(burn_in):
        if x < 0.5:
            x = x * (1.0 + c * x**gamma)
        else:
            x = 2.0 * x - 1.0
        if x > 1.0:
            x = 1.0
    out = np.empty(n)
    for i in range(n):
        if x < 0.5:
            x = x * (1.0 + c * x**gamma)
        else:
            x = 2.0 * x - 1.0
        if x > 1.0:
            x = 1.0
        out[i] = x
    return out


@dataclass(frozen=True)
class Trajectory:
    """n iterates of the map after a burn-in, starting from x0 (seeded uniform
    when not given)."""

    gamma: float
    seed: int | None
    burn_in: int
    points: np.ndarray


def iterate(
    gamma: float,
    n: int,
    burn_in: int = 0,
    x0: float | None = None,
    seed: int | None = None,
    replica: int = 0,
) -> Trajectory:
    """Generate the n iterates following `burn_in` discarded ones.

    points[0] is the image of the start, i.e. the first iterate after the
    burn-in block.  When x0 is None the start is drawn uniformly from the
    stream keyed by (seed, replica).
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if burn_in < 0:
        raise ValueError("burn_in must be nonnegative")
    if not (0.0 < gamma < 1.0):
        raise ValueError(f"gamma must be in (0, 1), got {gamma}")
    if x0 is None:
        if seed is None:
            raise ValueError("either x0 or seed must be given")
        x0 = float(stream(seed, replica).random())
    if not (0.0 <= x0 <= 1.0):
        raise ValueError("x0 must lie in [0, 1]")
    pts = _orbit(float(x0), float(gamma), int(burn_in), int(n))
    return Trajectory(gamma=gamma, seed=seed, burn_in=burn_in, points=pts)


def preimage_left(gamma: float, y: float) -> float:
    """The unique x in [0, 1/2] with x(1 + 2^g x^g) = y.

    Solved by bracketed root finding driven to machine precision: the
    preimages decay polynomially, so fixed absolute tolerance would lose all
    significant digits once x underruns it.
    """
    if not (0.0 < gamma < 1.0):
        raise ValueError(f"gamma must be in (0, 1), got {gamma}")
    if not (0.0 <= y <= 1.0):
        raise ValueError("y must lie in [0, 1]")
    if y == 0.0:
        return 0.0
    c = 2.0**gamma
    f = lambda t: t * (1.0 + c * t**gamma) - y
    if f(0.5) <= 0.0:  # y at (or within rounding of) the branch maximum
        return 0.5
    return float(brentq(f, 0.0, 0.5, xtol=1e-300, rtol=4.0 * np.finfo(float).eps))


@dataclass(frozen=True)
class TowerPartition:
    """Return-time partition data of the reference set (1/2, 1].

    x[k] are the successive left-branch preimages of 1 (x[0] = 1), y[k] the
    corresponding right-branch preimages, masses[k-1] the Lebesgue mass of
    the set of points returning in exactly k steps, tail[k] the mass of
    return time > k (tail[k] = x[k]/2 identically).
    """

    gamma: float
    x: np.ndarray
    y: np.ndarray
    masses: np.ndarray
    tail: np.ndarray


def build_tower(gamma: float, K: int) -> TowerPartition:
    """Compute the first K elements of the return-time partition."""
    if K < 2:
        raise ValueError(f"K must be >= 2, got {K}")
    x = np.empty(K + 1)
    x[0] = 1.0
    for k in range(K):
        x[k + 1] = preimage_left(gamma, x[k])
    # y[i] holds y_{i+1} = (x_i + 1)/2, i = 0..K; the set with return time k
    # is (y_{k+1}, y_k], so its mass is (x_{k-1} - x_k)/2
    y = (x + 1.0) / 2.0
    masses = y[:-1] - y[1:]
    tail = x / 2.0  # mass of return time > k, k = 0..K
    return TowerPartition(gamma=gamma, x=x, y=y, masses=masses, tail=tail)


@dataclass(frozen=True)
class UlamModel:
    """Discretized transfer operator on an interval grid and its stationary law.

    P[i, j] is the fraction of cell i mapped into cell j; `stationary` holds
    the invariant cell masses and `cdf` their piecewise-linear CDF.
    """

    gamma: float
    m: int
    edges: np.ndarray
    P: scipy.sparse.csr_matrix
    stationary: np.ndarray
    cdf: PiecewiseCdf


def _ulam_edges(m: int, refine: bool = True) -> np.ndarray:
    """Grid edges on [0, 1]; with refinement the first m/8 cells cover
    [0, 1/64] (the invariant density blows up like x^(-gamma) near 0)."""
    if not refine:
        return np.linspace(0.0, 1.0, m + 1)
    m_fine = m // 8
    fine = np.linspace(0.0, 1.0 / 64.0, m_fine + 1)
    coarse = np.linspace(1.0 / 64.0, 1.0, m - m_fine + 1)
    return np.concatenate([fine[:-1], coarse])


def build_ulam(gamma: float, m: int, refine: bool = True, max_iter: int = 10**6) -> UlamModel:
    """Build the discretized transfer operator and solve for its stationary law.

    Transition masses are exact: both branches are monotone, so the preimage
    of every cell is a pair of intervals whose overlaps with the grid cells
    are closed-form.  The stationary vector comes from a direct sparse solve,
    then is polished by power iterations until the residual ||h - hP||_inf
    drops below 1e-12 (raises after max_iter iterations).
    """
    if m < 64:
        raise ValueError(f"m must be >= 64, got {m}")
    if not (0.0 < gamma < 1.0):
        raise ValueError(f"gamma must be in (0, 1), got {gamma}")
    edges = _ulam_edges(m, refine)
    widths = np.diff(edges)

    # preimage edges of every grid line under each monotone branch
    g_left = np.array([preimage_left(gamma, t) for t in edges])
    g_right = (edges + 1.0) / 2.0

    rows, cols, vals = [], [], []
    for pre in (g_left, g_right):
        for j in range(m):
            a, b = pre[j], pre[j + 1]
            if b <= a:
                continue
            i0 = np.searchsorted(edges, a, side="right") - 1
            i1 = np.searchsorted(edges, b, side="left")
            for i in range(max(i0, 0), min(i1, m)):
                ov = min(b, edges[i + 1]) - max(a, edges[i])
                if ov > 0:
                    rows.append(i)
                    cols.append(j)
                    vals.append(ov)
    P = scipy.sparse.coo_matrix((vals, (rows, cols)), shape=(m, m)).tocsr()
    P = scipy.sparse.diags(1.0 / widths) @ P

    # stationary cell masses: direct solve of h (P - I) = 0 with sum(h) = 1,
    # then power-iteration polish to certify the residual
    A = (P.T - scipy.sparse.identity(m)).tolil()
    A[-1, :] = 1.0
    rhs = np.zeros(m)
    rhs[-1] = 1.0
    h = scipy.sparse.linalg.spsolve(A.tocsc(), rhs)
    h = np.maximum(h, 0.0)
    h /= h.sum()
    for _ in range(max_iter):
        h_next = h @ P
        if np.max(np.abs(h_next - h)) <= 1e-12:
            h = h_next
            break
        h = h_next
    else:
        raise RuntimeError(f"stationary solve did not converge in {max_iter} iterations")
    h = np.maximum(h, 0.0)
    h /= h.sum()

    values = np.concatenate([[0.0], np.cumsum(h)])
    values[-1] = 1.0
    cdf = PiecewiseCdf(edges, values)
    return UlamModel(gamma=gamma, m=m, edges=edges, P=P, stationary=h, cdf=cdf)


def invariant_cdf(model: UlamModel, t):
    """Piecewise-linear interpolation of the stationary CDF."""
    return model.cdf(t)


def holder_bump(width: float = 0.25, plateau: float = 0.125):
    """Lipschitz bump supported on [0, width]: 1 on [0, plateau], linear to 0."""
    if not (0.0 < plateau < width <= 1.0):
        raise ValueError("need 0 < plateau < width <= 1")
    slope = 1.0 / (width - plateau)

    def f(x):
        x_arr = np.asarray(x, dtype=float)
        out = np.clip(1.0 - slope * (x_arr - plateau), 0.0, 1.0)
        return float(out) if np.isscalar(x) or x_arr.ndim == 0 else out

    return f


@dataclass(frozen=True)
class CorrelationDecay:
    """Fitted log-log decay of |Cov(f, g o T^n)| against the lag n."""

    ns: np.ndarray
    cov_abs: np.ndarray
    slope: float
    stderr: float


def correlation_decay(
    gamma: float,
    f,
    g,
    n_list,
    replicas: int = 100,
    length: int = 10**5,
    burn_in: int = 10**4,
    seed: int = 0,
) -> CorrelationDecay:
    """Monte Carlo estimate of the covariance decay of two observables.

    Each replica contributes the time average of f(x_t) g(x_{t+n}) over a
    trajectory of `length` points, centered by its own sample means.  Sample
    centering biases every lag down by Cov(mean f, mean g shifted) -- an
    O(1/L^((1-gamma)/gamma)) term that rivals the covariance at deep lags
    when mixing is slow -- so that term is estimated across replicas and
    added back.  Raises when every covariance is indistinguishable from zero
    (degenerate fit).
    """
    ns = np.asarray(sorted(n_list), dtype=int)
    if ns.size < 2 or np.any(ns < 1):
        raise ValueError("n_list must contain at least two positive lags")
    n_max = int(ns[-1])
    covs = np.zeros((replicas, ns.size))
    mf = np.zeros((replicas, ns.size))
    mg = np.zeros((replicas, ns.size))
    for r in range(replicas):
        x0 = float(stream(seed, r).random())
        pts = _orbit(x0, gamma, burn_in, length + n_max)
        fa = np.asarray(f(pts), dtype=float)
        ga = np.asarray(g(pts), dtype=float)
        for i, n in enumerate(ns):
            a = fa[:length]
            b = ga[n : n + length]
            mf[r, i] = np.mean(a)
            mg[r, i] = np.mean(b)
            covs[r, i] = np.mean(a * b) - mf[r, i] * mg[r, i]
    centering_bias = np.array(
        [np.cov(mf[:, i], mg[:, i], ddof=1)[0, 1] for i in range(ns.size)]
    )
    mean_cov = covs.mean(axis=0) + centering_bias
    se_cov = covs.std(axis=0, ddof=1) / np.sqrt(replicas)
    if np.all(np.abs(mean_cov) <= 3.0 * se_cov):
        raise ValueError("all covariance estimates indistinguishable from zero")
    y = np.abs(mean_cov)
    lx, ly = np.log(ns.astype(float)), np.log(np.maximum(y, 1e-300))
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    dof = max(ns.size - 2, 1)
    stderr = float(np.sqrt(np.sum(resid**2) / dof / np.sum((lx - lx.mean()) ** 2)))
    return CorrelationDecay(ns=ns, cov_abs=y, slope=float(slope), stderr=stderr)
