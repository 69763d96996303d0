"""Closed-form evaluators for the moment, tail, and deviation inequalities.

Each function evaluates the right-hand side of one inequality, usable both as
a calculator and as the reference side of a verification test.  Inequalities
with explicit constants are checked absolutely elsewhere; the Rosenthal-type
bound carries an unspecified universal constant and is implemented with
implied constant 1, so it is only ever compared through fitted exponents.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ThetaSequence",
    "BSequence",
    "TailBound",
    "mz_constant_K",
    "mz_bound",
    "mz_max_bound",
    "martingale_mz_bound",
    "hoeffding_tail",
    "pinelis94_tail",
    "general_tail",
    "rosenthal_bound",
    "deviation_bound",
    "deviation_moment_bound",
    "pick_q_lag",
    "maximal_bound",
]

_E = math.e


@dataclass(frozen=True)
class ThetaSequence:
    """Nonincreasing nonnegative dependence coefficients theta(0), theta(1), ..."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size == 0:
            raise ValueError("theta must be a nonempty 1-d sequence")
        if np.any(v < 0):
            raise ValueError("theta entries must be nonnegative")
        if np.any(np.diff(v) > 1e-12):
            raise ValueError("theta must be nonincreasing")
        object.__setattr__(self, "values", v)

    @classmethod
    def power_law(cls, c: float, exponent: float, n: int) -> "ThetaSequence":
        """theta(k) = c (k+1)^(-exponent) for k = 0..n-1."""
        k = np.arange(n, dtype=float)
        return cls(c * (k + 1.0) ** (-exponent))

    def __len__(self) -> int:
        return self.values.size

    def __getitem__(self, k: int) -> float:
        return float(self.values[k])


@dataclass(frozen=True)
class BSequence:
    """Nonnegative conditional product-moment coefficients b_{1,n}, ..., b_{n,n}."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1:
            raise ValueError("b must be a 1-d sequence")
        if np.any(v < 0):
            raise ValueError("b entries must be nonnegative")
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class TailBound:
    """A tail-probability bound: clamped value, raw unclamped value, regime tag."""

    value: float
    raw: float
    regime: str  # "trivial" | "polynomial" | "exponential"


def _theta_values(theta) -> np.ndarray:
    if isinstance(theta, ThetaSequence):
        return theta.values
    return ThetaSequence(np.asarray(theta, dtype=float)).values


def _b_values(b) -> np.ndarray:
    if isinstance(b, BSequence):
        return b.values
    return BSequence(np.asarray(b, dtype=float)).values


def mz_constant_K(p: float, c_tilde_p: float) -> float:
    """K = sqrt(2/p) sqrt(max(c~_p, p/2)).

    For an L^q space with c~_p = p(max(p, 2q-p)-1) this simplifies to
    sqrt(max(4q-2p, 2p) - 2).
    """
    if p < 2:
        raise ValueError(f"p must be >= 2, got {p}")
    if c_tilde_p <= 0:
        raise ValueError(f"c_tilde_p must be positive, got {c_tilde_p}")
    return math.sqrt(2.0 / p) * math.sqrt(max(c_tilde_p, p / 2.0))


def mz_bound(p: float, c_tilde_p: float, b) -> float:
    """K^p (sum_i b_i)^(p/2): moment bound for |S_n|^p from the b-coefficients."""
    if p < 2:
        raise ValueError(f"p must be >= 2, got {p}")
    bv = _b_values(b)
    if bv.size == 0:
        return 0.0
    K = mz_constant_K(p, c_tilde_p)
    return K**p * float(np.sum(bv)) ** (p / 2.0)


def mz_max_bound(p: float, K: float, M: float, n: int, theta) -> float:
    """C_p M^(p-1) n^(p/2) (sum_{k<n} theta(k)^(2/p))^(p/2) for max_k |S_k|^p,

    with C_p = (1/2)(2pK/(p-1))^p + 2^(3p-4) 3^p p.
    """
    if p < 2:
        raise ValueError(f"p must be >= 2, got {p}")
    if M <= 0:
        raise ValueError(f"M must be positive, got {M}")
    tv = _theta_values(theta)
    if tv.size < n:
        raise ValueError(f"theta must have at least n={n} entries, got {tv.size}")
    C_p = 0.5 * (2.0 * p * K / (p - 1.0)) ** p + 2.0 ** (3.0 * p - 4.0) * 3.0**p * p
    s = float(np.sum(tv[:n] ** (2.0 / p)))
    return C_p * M ** (p - 1.0) * n ** (p / 2.0) * s ** (p / 2.0)


def martingale_mz_bound(p: float, c_p: float, increment_norms) -> float:
    """(c_p/p)^(p/2) (sum_i ||d_i||_p^2)^(p/2) for martingale p-th moments.

    With c_p = p(max(p,q)-1) the prefactor becomes (max(p,q)-1)^(p/2).
    """
    if p < 2:
        raise ValueError(f"p must be >= 2, got {p}")
    norms = np.asarray(increment_norms, dtype=float)
    if np.any(norms < 0):
        raise ValueError("increment norms must be nonnegative")
    if norms.size == 0:
        return 0.0
    return (c_p / p) ** (p / 2.0) * float(np.sum(norms**2)) ** (p / 2.0)


def hoeffding_tail(q: float, b: float, n: int, x: float) -> TailBound:
    """Three-regime tail bound for max_k |M_k|_q of a b-bounded L^q martingale.

      1                                   for x <  b sqrt((q-1) n)
      (b^2 (q-1) n)^(q/2) / x^q           for x in [b sqrt((q-1)n), b sqrt(e(q-1)n))
      e^(-1/2) exp(-x^2 / (2 e b^2 n))    for x >= b sqrt(e(q-1)n)

    Boundaries are left-closed (an x exactly at a threshold takes the right
    regime); the adjacent expressions agree there, so the choice only fixes
    the regime tag.
    """
    _check_tail_args(q, b, n, x)
    thr1 = b * math.sqrt((q - 1.0) * n)
    thr2 = b * math.sqrt(_E * (q - 1.0) * n)
    if x < thr1:
        return TailBound(1.0, 1.0, "trivial")
    if x < thr2:
        raw = (b * b * (q - 1.0) * n) ** (q / 2.0) / x**q
        return TailBound(min(raw, 1.0), raw, "polynomial")
    raw = math.exp(-0.5) * math.exp(-(x * x) / (2.0 * _E * b * b * n))
    return TailBound(min(raw, 1.0), raw, "exponential")


def pinelis94_tail(q: float, b: float, n: int, x: float) -> float:
    """Reference sub-Gaussian bound 2 exp(-x^2 / (2 (q-1) b^2 n))."""
    _check_tail_args(q, b, n, x, allow_zero_x=True)
    return 2.0 * math.exp(-(x * x) / (2.0 * (q - 1.0) * b * b * n))


def general_tail(q: float, b_n: float, n: int, x: float) -> TailBound:
    """Three-regime tail bound for |S_n|_q of a dependent L^q sequence.

    Thresholds b_n sqrt(2(q-1)n) and b_n sqrt(2e(q-1)n); values
    1, (2 b_n^2 (q-1) n)^(q/2) / x^q, e^(-1/2) exp(-x^2/(4 e b_n^2 n)).
    """
    _check_tail_args(q, b_n, n, x)
    thr1 = b_n * math.sqrt(2.0 * (q - 1.0) * n)
    thr2 = b_n * math.sqrt(2.0 * _E * (q - 1.0) * n)
    if x < thr1:
        return TailBound(1.0, 1.0, "trivial")
    if x < thr2:
        raw = (2.0 * b_n * b_n * (q - 1.0) * n) ** (q / 2.0) / x**q
        return TailBound(min(raw, 1.0), raw, "polynomial")
    raw = math.exp(-0.5) * math.exp(-(x * x) / (4.0 * _E * b_n * b_n * n))
    return TailBound(min(raw, 1.0), raw, "exponential")


def _check_tail_args(q, b, n, x, allow_zero_x: bool = False):
    if q < 2:
        raise ValueError(f"q must be >= 2, got {q}")
    if b <= 0:
        raise ValueError(f"scale must be positive, got {b}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if x < 0 or (x == 0 and not allow_zero_x):
        raise ValueError(f"x must be positive, got {x}")


def rosenthal_bound(p: float, x0_moment: float, cond_s2_norms, n: int) -> float:
    """Rosenthal-type bound (implied constant 1):

        n * x0_moment + n (sum_{k=1}^n k^(-1-2 delta/p) a_k^delta)^(p/(2 delta))

    with delta = min(1/2, 1/(p-2)) and a_k the conditional second-moment
    norms ||E_0 |S_k|^2||_{p/2}.  Only exponents of this bound are ever
    compared to data, never its absolute level.
    """
    if p <= 2:
        raise ValueError(f"p must be > 2, got {p}")
    a = np.asarray(cond_s2_norms, dtype=float)
    if a.size != n:
        raise ValueError(f"need n={n} conditional norms, got {a.size}")
    if np.any(a < 0):
        raise ValueError("conditional norms must be nonnegative")
    delta = min(0.5, 1.0 / (p - 2.0))
    k = np.arange(1.0, n + 1.0)
    s = float(np.sum(k ** (-1.0 - 2.0 * delta / p) * a**delta))
    return n * x0_moment + n * s ** (p / (2.0 * delta))


def pick_q_lag(x: float, M: float, n: int) -> int:
    """Lag choice q = min(n, max(1, floor(x/M))) used when optimizing the
    deviation bound over its block length."""
    return int(min(n, max(1, math.floor(x / M))))


def deviation_bound(
    q_lag: int, M: float, x: float, theta, n: int, c_tilde_2: float
) -> TailBound:
    """Deviation bound for P(max_k |S_k| >= 4x) of a bounded dependent sequence:

        (n theta(q)/x) 1_{q<n} + (4 c~_2 K^2 n M / x^2) sum_{k<q} theta(k),

    with K = sqrt(max(c~_2, 1)).  Requires x >= q_lag * M.  The raw value is
    kept alongside the [0,1]-clamped one; the regime tag is not meaningful
    here and is set to "polynomial".
    """
    if not (1 <= q_lag <= n):
        raise ValueError(f"q_lag must be in [1, n], got {q_lag} with n={n}")
    if M <= 0 or x <= 0:
        raise ValueError("M and x must be positive")
    if x < q_lag * M:
        raise ValueError(f"need x >= q_lag*M = {q_lag * M}, got x={x}")
    tv = _theta_values(theta)
    if tv.size < q_lag + (1 if q_lag < n else 0):
        raise ValueError("theta too short for the requested lag")
    K2 = max(c_tilde_2, 1.0)
    first = (n * tv[q_lag] / x) if q_lag < n else 0.0
    second = 4.0 * c_tilde_2 * K2 * n * M / (x * x) * float(np.sum(tv[:q_lag]))
    raw = first + second
    return TailBound(min(raw, 1.0), raw, "polynomial")


def deviation_moment_bound(p: float, M: float, theta, n: int, c_tilde_2: float) -> float:
    """Moment bound for E max_k |S_k|^p with p in [1, 2):

        (4^p p + 4^(p+1) p c~_2 K^2 / (2-p)) M^(p-1) n sum_{k<n} (k+1) theta(k).

    Diverges as p -> 2; rejected for p > 2 - 1e-6.
    """
    if not (1.0 <= p <= 2.0 - 1e-6):
        raise ValueError(f"p must be in [1, 2-1e-6], got {p}")
    if M <= 0:
        raise ValueError(f"M must be positive, got {M}")
    tv = _theta_values(theta)
    if tv.size < n:
        raise ValueError(f"theta must have at least n={n} entries")
    K2 = max(c_tilde_2, 1.0)
    const = 4.0**p * p + 4.0 ** (p + 1.0) * p * c_tilde_2 * K2 / (2.0 - p)
    k = np.arange(n, dtype=float)
    return const * M ** (p - 1.0) * n * float(np.sum((k + 1.0) * tv[:n]))


def maximal_bound(p: float, sn_moment: float, M: float, theta, n: int) -> float:
    """Doob-plus-coupling bound for E max_k |S_k|^p, p > 1:

        (1/2)(2p/(p-1))^p E|S_n|^p
      + 2^(p-1) 3^p p M^(p-1) n sum_{k=0}^{n-2} (k+1)^(p-2) theta(k).
    """
    if p <= 1:
        raise ValueError(f"p must be > 1, got {p}")
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    if M <= 0:
        raise ValueError(f"M must be positive, got {M}")
    if sn_moment < 0:
        raise ValueError("sn_moment must be nonnegative")
    tv = _theta_values(theta)
    if tv.size < n - 1:
        raise ValueError(f"theta must have at least n-1={n - 1} entries")
    k = np.arange(n - 1, dtype=float)
    tail = 2.0 ** (p - 1.0) * 3.0**p * p * M ** (p - 1.0) * n * float(
        np.sum((k + 1.0) ** (p - 2.0) * tv[: n - 1])
    )
    return 0.5 * (2.0 * p / (p - 1.0)) ** p * sn_moment + tail
