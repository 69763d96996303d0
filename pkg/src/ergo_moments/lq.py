"""Weighted finite-dimensional l^q spaces and the p-th power of the norm.

The measure space behind an L^q norm is modelled as a finite set of atoms
with positive masses (quadrature weights), so every integral below is an
exact finite sum and the only numerical error is floating point.

Provides the map psi_p(x) = |x|_q^p, its analytic second directional
derivative, a finite-difference oracle for that derivative, and a randomized
certification of the smoothness constants

    c_p      = p (max(p, q) - 1)         (diagonal directions u = v)
    c~_p     = p (max(p, 2q - p) - 1)    (general direction pairs)

that bound |D^2 psi_p(x)(u,v)| / (|x|^{p-2} |u| |v|).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

__all__ = [
    "LqSpace",
    "SmoothnessReport",
    "norm_q",
    "psi_p",
    "d2_psi_p",
    "finite_diff_d2",
    "finite_diff_d2_extrapolated",
    "smoothness_constants",
    "batch_ratios",
    "check_smoothness",
]


@dataclass(frozen=True)
class LqSpace:
    """Finite weighted model of an L^q space: dim atoms with masses `weights`.

    Vectors are plain float arrays of length `dim`; coordinate i is the value
    on the atom of mass weights[i].
    """

    dim: int
    q: float
    weights: np.ndarray

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if self.q < 2:
            raise ValueError(f"q must be >= 2, got {self.q}")
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (self.dim,):
            raise ValueError(f"weights must have shape ({self.dim},), got {w.shape}")
        if not np.all(w > 0):
            raise ValueError("all weights must be positive")
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, dim: int, q: float) -> "LqSpace":
        """Space with unit atom masses (plain l^q on R^dim)."""
        return cls(dim, float(q), np.ones(dim))

    def check_vector(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"vector has shape {x.shape}, expected ({self.dim},)")
        if not np.all(np.isfinite(x)):
            raise ValueError("vector entries must be finite")
        return x


def norm_q(space: LqSpace, x) -> float:
    """(sum_i w_i |x_i|^q)^(1/q)."""
    x = space.check_vector(x)
    return float(np.sum(space.weights * np.abs(x) ** space.q) ** (1.0 / space.q))


def psi_p(space: LqSpace, p: float, x) -> float:
    """|x|_q^p for p >= 2."""
    if p < 2:
        raise ValueError(f"p must be >= 2, got {p}")
    return norm_q(space, x) ** p


def d2_psi_p(space: LqSpace, p: float, x, h, v) -> float:
    """Second directional derivative of psi_p at x in directions (h, v).

    Closed form (all sums weighted by the atom masses):

        p (q-1) |x|^{p-q}   sum h v |x|^{q-2}
      + p (p-q) |x|^{p-2q} (sum v x |x|^{q-2}) (sum h x |x|^{q-2})

    Symmetric and bilinear in (h, v).  At x = 0 the derivative is defined by
    continuous extension (0 for p > 2); for p = 2 and q > 2 the formula is
    genuinely singular at 0 and a ValueError is raised.
    """
    if p < 2:
        raise ValueError(f"p must be >= 2, got {p}")
    x = space.check_vector(x)
    h = space.check_vector(h)
    v = space.check_vector(v)
    q, w = space.q, space.weights

    ax = np.abs(x)
    nx = float(np.sum(w * ax**q) ** (1.0 / q))
    if nx == 0.0:
        if p > 2:
            return 0.0
        if q == 2:  # psi_2 on a Hilbert space is an exact quadratic
            return 2.0 * float(np.sum(w * h * v))
        raise ValueError("second derivative of |x|^2 is singular at x = 0 for q > 2")

    # |x_i|^(q-2) with the 0^0 = 1 convention at q = 2
    xq2 = ax ** (q - 2.0) if q != 2.0 else np.ones_like(ax)
    t1 = p * (q - 1.0) * nx ** (p - q) * float(np.sum(w * h * v * xq2))
    if p == q:
        return t1
    sv = float(np.sum(w * v * x * xq2))
    sh = float(np.sum(w * h * x * xq2))
    t2 = p * (p - q) * nx ** (p - 2.0 * q) * sv * sh
    return t1 + t2


def finite_diff_d2(space: LqSpace, p: float, x, h, v, eps: float) -> float:
    """Cross second difference (psi(x+eh+ev) - psi(x+eh) - psi(x+ev) + psi(x)) / e^2."""
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    x = space.check_vector(x)
    h = space.check_vector(h)
    v = space.check_vector(v)
    f = lambda y: psi_p(space, p, y)
    return (f(x + eps * h + eps * v) - f(x + eps * h) - f(x + eps * v) + f(x)) / eps**2


def finite_diff_d2_extrapolated(space: LqSpace, p: float, x, h, v, eps: float = 1e-4) -> float:
    """One Richardson level on finite_diff_d2: cancels the O(eps) truncation term."""
    return 2.0 * finite_diff_d2(space, p, x, h, v, eps / 2.0) - finite_diff_d2(
        space, p, x, h, v, eps
    )


def smoothness_constants(p: float, q: float) -> tuple[float, float]:
    """(c_p, c~_p) = (p(max(p,q)-1), p(max(p, 2q-p)-1)) for p, q >= 2."""
    if p < 2 or q < 2:
        raise ValueError(f"need p >= 2 and q >= 2, got p={p}, q={q}")
    c_p = p * (max(p, q) - 1.0)
    c_tilde = p * (max(p, 2.0 * q - p) - 1.0)
    return c_p, c_tilde


@dataclass(frozen=True)
class SmoothnessReport:
    """Result of a randomized sweep of the second-derivative ratio.

    max_ratio is the largest observed |D^2 psi_p(x)(u,v)| / (|x|^{p-2}|u||v|);
    the sweep passes when it does not exceed the claimed constant
    (bound_c_tilde for general pairs, bound_c for the diagonal sweep u = v).
    The bound is attained at u = v = x, so the comparison carries a 1e-9
    relative allowance for floating-point jitter on the equality case.
    """

    p: float
    q: float
    samples: int
    max_ratio: float
    bound_c_tilde: float
    bound_c: float
    max_fd_rel_error: float
    diagonal: bool = False

    @property
    def passed(self) -> bool:
        bound = self.bound_c if self.diagonal else self.bound_c_tilde
        return self.max_ratio <= bound * (1.0 + 1e-9)

    def to_json(self) -> str:
        return json.dumps(
            {
                "p": self.p,
                "q": self.q,
                "samples": self.samples,
                "max_ratio": self.max_ratio,
                "bound_c_tilde": self.bound_c_tilde,
                "bound_c": self.bound_c,
                "max_fd_rel_error": self.max_fd_rel_error,
                "pass": self.passed,
            }
        )


def _ratio(space: LqSpace, p: float, x, u, v) -> float:
    nx, nu, nv = norm_q(space, x), norm_q(space, u), norm_q(space, v)
    if nx == 0.0 or nu == 0.0 or nv == 0.0:
        return 0.0
    return abs(d2_psi_p(space, p, x, u, v)) / (nx ** (p - 2.0) * nu * nv)


def batch_ratios(space: LqSpace, p: float, X: np.ndarray, U: np.ndarray, V: np.ndarray) -> np.ndarray:
    """|D^2 psi_p(x)(u,v)| / (|x|^{p-2}|u||v|) for row-aligned sample batches.

    Vectorized twin of the scalar route (d2_psi_p followed by _ratio); the
    test suite keeps the two in agreement.
    """
    q, w = space.q, space.weights
    aX = np.abs(X)
    nx = np.sum(w * aX**q, axis=1) ** (1.0 / q)
    nu = np.sum(w * np.abs(U) ** q, axis=1) ** (1.0 / q)
    nv = np.sum(w * np.abs(V) ** q, axis=1) ** (1.0 / q)
    xq2 = aX ** (q - 2.0) if q != 2.0 else np.ones_like(aX)
    t = p * (q - 1.0) * nx ** (p - q) * np.sum(w * U * V * xq2, axis=1)
    if p != q:
        sv = np.sum(w * V * X * xq2, axis=1)
        su = np.sum(w * U * X * xq2, axis=1)
        t = t + p * (p - q) * nx ** (p - 2.0 * q) * sv * su
    denom = nx ** (p - 2.0) * nu * nv
    good = denom > 0
    out = np.zeros(X.shape[0])
    out[good] = np.abs(t[good]) / denom[good]
    return out


def _structured_candidates(space: LqSpace, rng: np.random.Generator):
    """Direction triples where the extremal ratio tends to live."""
    d = space.dim
    ones = np.ones(d)
    xs = [ones, rng.standard_normal(d)]
    if d >= 2:
        profile = 1.0 / np.arange(1.0, d + 1.0)
        xs.append(profile)
    triples = []
    for x in xs:
        triples.append((x, x, x))
        signs = rng.choice([-1.0, 1.0], size=d)
        triples.append((x, signs, signs))
        triples.append((x, signs, x))
        for i in range(min(d, 8)):
            e = np.zeros(d)
            e[i] = 1.0
            triples.append((x, e, e))
            triples.append((x, e, signs))
    return triples


def check_smoothness(
    space: LqSpace,
    p: float,
    n_samples: int,
    rng_seed: int = 0,
    diagonal: bool = False,
    fd_samples: int = 64,
    fd_eps: float = 1e-4,
) -> SmoothnessReport:
    """Randomized certification of the second-derivative ratio bound.

    Samples `n_samples` standard-normal triples (x, u, v) plus structured
    candidates (u = v = x, coordinate vectors, sign patterns) and records the
    maximum ratio.  With diagonal=True the sweep restricts to u = v, which is
    bounded by c_p instead of c~_p.

    A side check compares the analytic second derivative to the
    Richardson-extrapolated finite difference on points whose coordinates are
    bounded away from zero (the difference quotient crosses the |x_i|^{q-2}
    kink otherwise) and records the worst relative discrepancy.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(rng_seed)
    c_p, c_tilde = smoothness_constants(p, space.q)
    d = space.dim

    X = rng.standard_normal((n_samples, d))
    U = rng.standard_normal((n_samples, d))
    V = U if diagonal else rng.standard_normal((n_samples, d))
    max_ratio = float(np.max(batch_ratios(space, p, X, U, V)))

    for x, u, v in _structured_candidates(space, rng):
        if diagonal:
            for a in (u, v):
                max_ratio = max(max_ratio, _ratio(space, p, x, a, a))
        else:
            max_ratio = max(max_ratio, _ratio(space, p, x, u, v))

    max_fd = 0.0
    for _ in range(fd_samples):
        x = rng.standard_normal(d)
        # push every coordinate away from zero before normalizing: the
        # finite-difference path must stay clear of the kinks of |x_i|^(q-2)
        # (crossing would need |x_i| < eps (|u_i| + |v_i|), far below the floor)
        x = x + np.where(x >= 0, 0.011, -0.011)
        u = rng.standard_normal(d)
        v = u if diagonal else rng.standard_normal(d)
        # unit-normalize all three: the difference quotient's rounding floor is
        # psi(x) eps^-2 machine-eps and its truncation grows like |u|^2 |v|^2,
        # either of which would swamp the eps^2 D^2 signal at high dimension
        x = x / norm_q(space, x)
        u = u / norm_q(space, u)
        v = v / norm_q(space, v)
        exact = d2_psi_p(space, p, x, u, v)
        approx = finite_diff_d2_extrapolated(space, p, x, u, v, eps=fd_eps)
        err = abs(approx - exact) / max(1.0, abs(exact))
        if err > max_fd:
            max_fd = err

    return SmoothnessReport(
        p=float(p),
        q=float(space.q),
        samples=n_samples,
        max_ratio=max_ratio,
        bound_c_tilde=c_tilde,
        bound_c=c_p,
        max_fd_rel_error=max_fd,
        diagonal=diagonal,
    )
