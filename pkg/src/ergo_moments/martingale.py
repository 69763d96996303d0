"""Synthetic processes with exactly computable conditional structure.

Two instruments back the absolute verification of the moment inequalities:

* bounded l^q-valued martingales with i.i.d. symmetric increments scaled to
  norm exactly b, simulated at scale for Monte Carlo moment and tail checks;

* a small finite-state Markov chain with a centered state embedding, on
  which every conditional expectation is a matrix power, so the
  product-moment coefficients b_{i,n}, the dependence coefficients theta(k),
  and (by exhaustive path enumeration) the conditional moments of |S_n|_q^p
  are computed exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.stats import norm as _norm

from .bounds import BSequence, ThetaSequence, hoeffding_tail, mz_bound, pinelis94_tail
from .lq import LqSpace, smoothness_constants
from .rng import stream

__all__ = [
    "MartingaleConfig",
    "MartingaleSample",
    "MarkovInstrument",
    "ExactConditionals",
    "BoundCheck",
    "simulate_martingale",
    "verify_martingale_mz",
    "verify_hoeffding",
    "sticky_two_state",
    "iid_two_state",
    "exact_conditionals",
    "enumerate_moment",
    "verify_mz_markov",
    "wilson_upper",
]

_SHARD = 1 << 14  # replicas per RNG shard; fixed so results never depend on threading


@dataclass(frozen=True)
class MartingaleConfig:
    """An l^q-valued martingale with n i.i.d. symmetric increments of norm <= b.

    Laws: "rademacher_coords" puts independent signs on every coordinate,
    scaled so |d_i|_q = b exactly; "scaled_uniform" puts uniform(-1,1)
    coordinates under the same scaling, so |d_i|_q <= b.
    """

    dim: int
    q: float
    n: int
    b: float = 1.0
    law: str = "rademacher_coords"

    def __post_init__(self):
        if self.dim < 1 or self.n < 1:
            raise ValueError("dim and n must be >= 1")
        if self.q < 2:
            raise ValueError(f"q must be >= 2, got {self.q}")
        if self.b <= 0:
            raise ValueError(f"b must be positive, got {self.b}")
        if self.law not in ("rademacher_coords", "scaled_uniform"):
            raise ValueError(f"unknown increment law {self.law!r}")

    @property
    def scale(self) -> float:
        """Per-coordinate factor making |d_i|_q = b for unit-size coordinates."""
        return self.b / self.dim ** (1.0 / self.q)


@dataclass(frozen=True)
class MartingaleSample:
    """Per-replica path maximum max_k |M_k|_q and terminal |M_n|_q."""

    config: MartingaleConfig
    max_norm: np.ndarray
    terminal_norm: np.ndarray


@njit(cache=True, nogil=True)
def _path_norms(steps, q):
    """Running q-norm maxima and terminal q-norms of cumulative sums.

    steps: (replicas, n, dim) float64 increments.
    """
    R, n, dim = steps.shape
    max_out = np.empty(R)
    fin_out = np.empty(R)
    for r in range(R):
        acc = np.zeros(dim)
        best = 0.0
        nq = 0.0
        for i in range(n):
            nq = 0.0
            for j in range(dim):
                acc[j] += steps[r, i, j]
                nq += abs(acc[j]) ** q
            if nq > best:
                best = nq
        max_out[r] = best ** (1.0 / q)
        fin_out[r] = nq ** (1.0 / q)
    return max_out, fin_out


def _shard_steps(config: MartingaleConfig, rng: np.random.Generator, count: int) -> np.ndarray:
    if config.law == "rademacher_coords":
        nbits = count * config.n * config.dim
        bits = np.unpackbits(rng.integers(0, 256, size=(nbits + 7) // 8, dtype=np.uint8))
        steps = bits[:nbits].astype(np.float64) * 2.0 - 1.0
    else:
        steps = rng.uniform(-1.0, 1.0, size=count * config.n * config.dim)
    return (config.scale * steps).reshape(count, config.n, config.dim)


def simulate_martingale(config: MartingaleConfig, replicas: int, seed: int = 0) -> MartingaleSample:
    """Simulate the martingale across replicas, shard by shard.

    Shard s draws from the stream keyed by (seed, s); shard size is fixed, so
    output is reproducible independent of scheduling or worker count.
    """
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    max_norm = np.empty(replicas)
    fin_norm = np.empty(replicas)
    done = 0
    shard = 0
    while done < replicas:
        count = min(_SHARD, replicas - done)
        steps = _shard_steps(config, stream(seed, shard), count)
        m, f = _path_norms(steps, config.q)
        max_norm[done : done + count] = m
        fin_norm[done : done + count] = f
        done += count
        shard += 1
    return MartingaleSample(config=config, max_norm=max_norm, terminal_norm=fin_norm)


@dataclass(frozen=True)
class BoundCheck:
    """One verified inequality: observed side, bound side, and the margin."""

    name: str
    lhs: float
    rhs: float
    margin: float
    method: str  # "exact" | "montecarlo"
    replicas: int = 0
    passed: bool = True

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "margin": self.margin,
            "method": self.method,
            "replicas": self.replicas,
            "pass": self.passed,
        }


def verify_martingale_mz(config: MartingaleConfig, p: float, replicas: int, seed: int = 0) -> BoundCheck:
    """Monte Carlo check of E|M_n|_q^p + 3 sigma <= (max(p,q)-1)^(p/2) (n b^2)^(p/2).

    The increment p-norms equal b exactly under the rademacher law (and are
    bounded by b under scaled_uniform), so the bound side is deterministic.
    """
    if p < 2:
        raise ValueError(f"p must be >= 2, got {p}")
    sample = simulate_martingale(config, replicas, seed)
    vals = sample.terminal_norm**p
    mean = float(vals.mean())
    sigma = float(vals.std(ddof=1) / math.sqrt(replicas))
    rhs = (max(p, config.q) - 1.0) ** (p / 2.0) * (config.n * config.b**2) ** (p / 2.0)
    lhs = mean + 3.0 * sigma
    return BoundCheck(
        name=f"martingale_mz p={p} q={config.q} dim={config.dim} n={config.n}",
        lhs=lhs,
        rhs=rhs,
        margin=rhs - lhs,
        method="montecarlo",
        replicas=replicas,
        passed=lhs <= rhs,
    )


def wilson_upper(successes: int, trials: int, level: float = 0.99) -> float:
    """One-sided Wilson upper confidence bound for a binomial proportion."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    z = float(_norm.ppf(level))
    phat = successes / trials
    denom = 1.0 + z * z / trials
    center = phat + z * z / (2.0 * trials)
    rad = z * math.sqrt(phat * (1.0 - phat) / trials + z * z / (4.0 * trials * trials))
    return min(1.0, (center + rad) / denom)


@dataclass(frozen=True)
class HoeffdingReport:
    """Tail verification grid: empirical tail of max_k |M_k|_q vs the bound."""

    config: MartingaleConfig
    replicas: int
    x: np.ndarray
    empirical: np.ndarray
    wilson: np.ndarray
    bound: np.ndarray
    regime: list[str]
    reference: np.ndarray  # the sub-Gaussian comparison bound
    passed: bool

    def to_dict(self) -> dict:
        return {
            "n": self.config.n,
            "q": self.config.q,
            "dim": self.config.dim,
            "b": self.config.b,
            "replicas": self.replicas,
            "rows": [
                {
                    "x": float(x),
                    "empirical": float(e),
                    "wilson_upper": float(w),
                    "bound": float(b),
                    "regime": r,
                    "reference": float(pb),
                }
                for x, e, w, b, r, pb in zip(
                    self.x, self.empirical, self.wilson, self.bound, self.regime, self.reference
                )
            ],
            "pass": self.passed,
        }


def verify_hoeffding(
    config: MartingaleConfig, replicas: int, x_grid=None, seed: int = 0, level: float = 0.99
) -> HoeffdingReport:
    """Check the three-regime tail bound against the simulated path maxima.

    Passes when the Wilson upper confidence bound of the empirical tail stays
    below the bound at every grid point.  The default grid spans all three
    regimes of the bound.
    """
    q, b, n = config.q, config.b, config.n
    if x_grid is None:
        thr1 = b * math.sqrt((q - 1.0) * n)
        thr2 = b * math.sqrt(math.e * (q - 1.0) * n)
        x_grid = np.linspace(0.25 * thr1, 2.2 * thr2, 50)
    x_grid = np.asarray(x_grid, dtype=float)
    sample = simulate_martingale(config, replicas, seed)
    emp = np.array([(sample.max_norm >= x).mean() for x in x_grid])
    wil = np.array(
        [wilson_upper(int((sample.max_norm >= x).sum()), replicas, level) for x in x_grid]
    )
    tb = [hoeffding_tail(q, b, n, float(x)) for x in x_grid]
    bound = np.array([t.value for t in tb])
    regime = [t.regime for t in tb]
    ref = np.array([min(1.0, pinelis94_tail(q, b, n, float(x))) for x in x_grid])
    return HoeffdingReport(
        config=config,
        replicas=replicas,
        x=x_grid,
        empirical=emp,
        wilson=wil,
        bound=bound,
        regime=regime,
        reference=ref,
        passed=bool(np.all(wil <= bound + 1e-15)),
    )


# ---------------------------------------------------------------------------
# Finite-state Markov instrument
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MarkovInstrument:
    """Finite-state chain with a centered l^q-valued state embedding.

    X_i = embedding[state_i]; conditional expectations of X_k given the state
    at time i are rows of P^(k-i) @ embedding, making every coefficient of
    the moment inequalities a finite exact computation.
    """

    transition: np.ndarray
    embedding: np.ndarray
    space: LqSpace
    stationary: np.ndarray = field(init=False)

    def __post_init__(self):
        P = np.asarray(self.transition, dtype=float)
        E = np.asarray(self.embedding, dtype=float)
        s = P.shape[0]
        if P.shape != (s, s) or s < 1 or s > 12:
            raise ValueError("transition must be square with at most 12 states")
        if np.any(P < 0) or np.max(np.abs(P.sum(axis=1) - 1.0)) > 1e-12:
            raise ValueError("transition rows must be nonnegative and sum to 1")
        if E.shape != (s, self.space.dim):
            raise ValueError(f"embedding must have shape ({s}, {self.space.dim})")
        # stationary law: left eigenvector for eigenvalue 1
        w, v = np.linalg.eig(P.T)
        i = int(np.argmin(np.abs(w - 1.0)))
        pi = np.real(v[:, i])
        pi = np.abs(pi) / np.abs(pi).sum()
        if np.max(np.abs(pi @ P - pi)) > 1e-12:
            raise ValueError("stationary law failed to converge")
        center = pi @ E
        if np.max(np.abs(center)) > 1e-12:
            raise ValueError(f"embedding not centered under the stationary law: {center}")
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "embedding", E)
        object.__setattr__(self, "stationary", pi)

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]


def sticky_two_state(stay: float = 0.9, q: float = 2.0) -> MarkovInstrument:
    """Two symmetric states +-1 in dim 1, staying put with probability `stay`."""
    if not (0.0 < stay < 1.0):
        raise ValueError("stay must be in (0, 1)")
    P = np.array([[stay, 1.0 - stay], [1.0 - stay, stay]])
    E = np.array([[1.0], [-1.0]])
    return MarkovInstrument(P, E, LqSpace.uniform(1, q))


def iid_two_state(q: float = 2.0) -> MarkovInstrument:
    """Independent fair signs disguised as a chain (both rows equal)."""
    P = np.full((2, 2), 0.5)
    E = np.array([[1.0], [-1.0]])
    return MarkovInstrument(P, E, LqSpace.uniform(1, q))


@dataclass(frozen=True)
class ExactConditionals:
    """Exact inequality coefficients of the chain.

    b_start[a, i-1] is the coefficient b_{i,n} conditioned on starting state
    a; b_marginal uses the stationary law instead of a point mass; theta[k]
    is the stationary dependence coefficient at lag k (nonincreasing in k).
    """

    p: float
    q: float
    n: int
    b_start: np.ndarray
    b_marginal: BSequence
    theta: ThetaSequence


def _state_norms(inst: MarkovInstrument, rows: np.ndarray) -> np.ndarray:
    """|row|_q per state for an (s, dim) array of vectors."""
    w, q = inst.space.weights, inst.space.q
    return np.sum(w[None, :] * np.abs(rows) ** q, axis=1) ** (1.0 / q)


def exact_conditionals(inst: MarkovInstrument, p: float, n: int) -> ExactConditionals:
    """Exact b_{i,n} (per starting state and marginal) and theta(k), k < n.

    With R_m = P^m E (the conditional mean of the embedding m steps ahead)
    and W_r = sum_{m<=r} R_m:

        b_{i,n}(a) = max_{0<=r<=n-i} ( P^i[a, :] . u_r )^(2/p),
        u_r(s)     = |E[s]|_q^(p/2) |W_r[s]|_q^(p/2),
        theta(k)   = sum_s pi(s) |R_k[s]|_q.
    """
    if p < 2:
        raise ValueError(f"p must be >= 2, got {p}")
    if n < 1:
        raise ValueError("n must be >= 1")
    P, E = inst.transition, inst.embedding
    s = inst.n_states

    R = [E]
    for _ in range(n):
        R.append(P @ R[-1])
    W = np.cumsum(np.stack(R[:n], axis=0), axis=0)  # W[r] = sum_{m<=r} R_m
    norm_e = _state_norms(inst, E)
    u = norm_e[None, :] ** (p / 2.0) * _state_norms(inst, W.reshape(-1, E.shape[1])).reshape(
        n, s
    ) ** (p / 2.0)

    b_start = np.empty((s, n))
    b_marg = np.empty(n)
    Pi = np.eye(s)
    for i in range(1, n + 1):
        Pi = Pi @ P
        r_max = n - i
        vals = Pi @ u[: r_max + 1].T  # (s, r_max+1): E_0 u_r(state_i) per start
        b_start[:, i - 1] = np.max(vals, axis=1) ** (2.0 / p)
        b_marg[i - 1] = np.max(inst.stationary @ u[: r_max + 1].T) ** (2.0 / p)

    theta = np.array([float(inst.stationary @ _state_norms(inst, R[k])) for k in range(n)])
    theta = np.minimum.accumulate(np.maximum(theta, 0.0))  # clip fp jitter, keep monotone
    return ExactConditionals(
        p=float(p),
        q=float(inst.space.q),
        n=n,
        b_start=b_start,
        b_marginal=BSequence(b_marg),
        theta=ThetaSequence(theta),
    )


def enumerate_moment(inst: MarkovInstrument, p: float, n: int, start: int) -> float:
    """Exact E(|S_n|_q^p | state_0 = start) by exhaustive path enumeration."""
    s = inst.n_states
    if s**n > 10**7:
        raise ValueError(f"path count {s}^{n} exceeds the enumeration budget 1e7")
    P, E = inst.transition, inst.embedding
    w, q = inst.space.weights, inst.space.q
    last = np.array([start])
    weights = np.ones(1)
    sums = np.zeros((1, E.shape[1]))
    for _ in range(n):
        m = last.size
        nxt = np.repeat(np.arange(s)[None, :], m, axis=0).ravel()
        weights = (weights[:, None] * P[last]).ravel()
        sums = (sums[:, None, :] + E[None, :, :]).reshape(m * s, E.shape[1])
        last = nxt
    norms = np.sum(w[None, :] * np.abs(sums) ** q, axis=1) ** (1.0 / q)
    return float(np.sum(weights * norms**p))


def _mc_moment(inst: MarkovInstrument, p: float, n: int, start: int, replicas: int, seed: int):
    """Monte Carlo fallback for E(|S_n|_q^p | state_0 = start): mean and stderr."""
    rng = stream(seed, start)
    P, E = inst.transition, inst.embedding
    cum = np.cumsum(P, axis=1)
    states = np.full(replicas, start, dtype=np.int64)
    sums = np.zeros((replicas, E.shape[1]))
    for _ in range(n):
        u = rng.random(replicas)
        states = (u[:, None] > cum[states]).sum(axis=1)
        sums += E[states]
    w, q = inst.space.weights, inst.space.q
    vals = np.sum(w[None, :] * np.abs(sums) ** q, axis=1) ** (p / q)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(replicas))


def verify_mz_markov(
    inst: MarkovInstrument,
    p: float,
    n: int,
    replicas: int = 10**5,
    seed: int = 0,
) -> list[BoundCheck]:
    """Per starting state: E_0 |S_n|_q^p  <=  K^p (sum_i b_{i,n})^(p/2).

    The moment side is exact path enumeration when the path count allows
    (then the check carries only ~1e-10 arithmetic slack), otherwise Monte
    Carlo with a 3-sigma safety margin.
    """
    q = inst.space.q
    c_tilde = smoothness_constants(p, q)[1]
    cond = exact_conditionals(inst, p, n)
    checks = []
    exact = inst.n_states**n <= 10**7
    for a in range(inst.n_states):
        rhs = mz_bound(p, c_tilde, BSequence(cond.b_start[a]))
        if exact:
            lhs = enumerate_moment(inst, p, n, a)
            method = "exact"
            reps = 0
            ok = lhs <= rhs * (1.0 + 1e-10)
        else:
            mean, se = _mc_moment(inst, p, n, a, replicas, seed)
            lhs = mean + 3.0 * se
            method = "montecarlo"
            reps = replicas
            ok = lhs <= rhs
        checks.append(
            BoundCheck(
                name=f"mz_markov start={a} p={p} q={q} n={n}",
                lhs=lhs,
                rhs=rhs,
                margin=rhs - lhs,
                method=method,
                replicas=reps,
                passed=ok,
            )
        )
    return checks
