"""The acceptance gate: one function per criterion, pinned tolerances.

Each criterion returns a CriterionResult; `run_all` executes the requested
subset and prints one pass/fail line per criterion.  The CLI `verify`
subcommand and tests/test_acceptance.py both drive this module, so the gate
has a single implementation.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np

from .bounds import hoeffding_tail, pinelis94_tail
from .cdf import uniform_cdf
from .dynamics import build_tower
from .empirical import d_nq, d_n2_exact, wasserstein1
from .experiments import (
    ExperimentConfig,
    run_deviation,
    run_scaling,
    run_wasserstein,
    spread_check,
    stable_tail_check,
)
from .lq import LqSpace, batch_ratios, check_smoothness
from .martingale import (
    MartingaleConfig,
    iid_two_state,
    sticky_two_state,
    verify_hoeffding,
    verify_martingale_mz,
    verify_mz_markov,
)

__all__ = ["CriterionResult", "run_all", "CRITERIA"]


@dataclass(frozen=True)
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str
    elapsed: float

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] criterion {self.number:2d} ({self.title}): {self.detail} [{self.elapsed:.1f}s]"


def _timed(fn):
    def wrapper(seed: int = 0, threads: int = 1) -> CriterionResult:
        t0 = time.time()
        number, title, passed, detail = fn(seed, threads)
        return CriterionResult(number, title, bool(passed), detail, time.time() - t0)

    return wrapper


_PQ_GRID = [(p, q) for p in (2.0, 3.0, 4.0) for q in (2.0, 3.0, 4.0)]
_DIMS = (2, 16, 64)


@_timed
def criterion_1(seed, threads):
    worst_margin = math.inf
    worst_fd = 0.0
    ok = True
    for p, q in _PQ_GRID:
        for dim in _DIMS:
            rep = check_smoothness(LqSpace.uniform(dim, q), p, 10**4, rng_seed=seed)
            ok &= rep.passed and rep.max_fd_rel_error <= 1e-4
            worst_margin = min(worst_margin, rep.bound_c_tilde - rep.max_ratio)
            worst_fd = max(worst_fd, rep.max_fd_rel_error)
    detail = f"27 sweeps, min bound margin {worst_margin:.3e}, worst fd rel err {worst_fd:.2e}"
    return 1, "second-derivative ratio bound, general directions", ok, detail


@_timed
def criterion_2(seed, threads):
    ok = True
    worst_margin = math.inf
    worst_attain = 0.0
    rng = np.random.default_rng(seed)
    for p, q in _PQ_GRID:
        for dim in _DIMS:
            rep = check_smoothness(LqSpace.uniform(dim, q), p, 10**4, rng_seed=seed, diagonal=True)
            ok &= rep.passed
            worst_margin = min(worst_margin, rep.bound_c - rep.max_ratio)
            if q == 2.0:
                # u = v = x attains the bound p(p-1) exactly
                x = rng.standard_normal((1, dim))
                ratio = batch_ratios(LqSpace.uniform(dim, q), p, x, x, x)[0]
                err = abs(ratio - p * (p - 1.0))
                worst_attain = max(worst_attain, err)
                ok &= err <= 1e-10
    detail = (
        f"27 diagonal sweeps, min bound margin {worst_margin:.3e}, "
        f"tightness witness error {worst_attain:.2e}"
    )
    return 2, "diagonal second-derivative bound and tightness", ok, detail


@_timed
def criterion_3(seed, threads):
    ok = True
    min_margin = math.inf
    count = 0
    for p, q in [(2.0, 4.0), (3.0, 3.0), (4.0, 2.0)]:
        for dim in (1, 4, 8):
            for n in (8, 32):
                chk = verify_martingale_mz(
                    MartingaleConfig(dim=dim, q=q, n=n, b=1.0), p=p, replicas=10**6, seed=seed
                )
                ok &= chk.passed
                min_margin = min(min_margin, chk.margin / chk.rhs)
                count += 1
    detail = f"{count} configs x 1e6 replicas, min relative margin {min_margin:.3f}"
    return 3, "martingale moment bound, Monte Carlo + 3 sigma", ok, detail


@_timed
def criterion_4(seed, threads):
    ok = True
    min_margin = math.inf
    count = 0
    for p, q in [(2.0, 2.0), (3.0, 3.0)]:
        for make in (sticky_two_state, iid_two_state):
            inst = make(0.9, q) if make is sticky_two_state else make(q)
            for n in (8, 16):
                for chk in verify_mz_markov(inst, p=p, n=n):
                    ok &= chk.passed and chk.method == "exact"
                    min_margin = min(min_margin, chk.margin / chk.rhs)
                    count += 1
    detail = f"{count} exact enumerations, min relative margin {min_margin:.3f}"
    return 4, "conditional moment bound on the exact chain", ok, detail


@_timed
def criterion_5(seed, threads):
    ok = True
    worst = math.inf
    for n in (64, 256):
        rep = verify_hoeffding(
            MartingaleConfig(dim=8, q=4.0, n=n, b=1.0), replicas=10**6, seed=seed
        )
        ok &= rep.passed
        worst = min(worst, float(np.min(rep.bound - rep.wilson)))
    # deterministic dominance of the three-regime bound over the sub-Gaussian one
    dom = True
    for q in (4.0, 6.0, 10.0):
        for n in (10, 1000):
            for b in (0.5, 1.0, 2.0):
                xs = np.linspace(1e-9, 10.0 * b * math.sqrt(n), 10**4)
                hv = np.array([hoeffding_tail(q, b, n, float(x)).value for x in xs])
                pv = np.array([pinelis94_tail(q, b, n, float(x)) for x in xs])
                dom &= bool(np.all(hv <= pv + 1e-15))
    ok &= dom
    detail = f"2 tail grids x 1e6 replicas, worst wilson margin {worst:.2e}, dominance {dom}"
    return 5, "martingale tail bound and dominance", ok, detail


@_timed
def criterion_6(seed, threads):
    ok = True
    details = []
    for gamma in (0.25, 0.5, 0.75):
        tower = build_tower(gamma, 10**4)
        k = np.arange(1, 10**4 + 1)
        sel = k >= 100
        slope = np.polyfit(np.log(k[sel]), np.log(tower.tail[1:][sel]), 1)[0]
        ratio = tower.x[-1] / (0.5 * (gamma * 10**4) ** (-1.0 / gamma))
        ok &= abs(slope + 1.0 / gamma) <= 0.05 and 0.95 <= ratio <= 1.05
        details.append(f"g={gamma:g}: slope {slope:.3f}, ratio {ratio:.4f}")
    return 6, "return-time tail exponent and asymptotics", ok, "; ".join(details)


@_timed
def criterion_7(seed, threads):
    cfg = ExperimentConfig(
        gamma=0.25, q=2.0, p=6.0, n_grid=tuple(2**k for k in range(8, 15)),
        replicas=200, master_seed=seed, statistic="max_d_kq", threads=threads,
    )
    res = run_scaling(cfg)
    ok = abs(res.fit.slope - 0.5) <= 0.05
    detail = f"slope {res.fit.slope:.4f} vs 0.5 +- 0.05, ci [{res.fit.ci_low:.3f}, {res.fit.ci_high:.3f}], r2 {res.fit.r2:.4f}"
    return 7, "sqrt(n) scaling of the max empirical norm", ok, detail


@_timed
def criterion_8(seed, threads):
    cfg = ExperimentConfig(
        gamma=0.75, q=2.0, n_grid=(2**14,), replicas=2000,
        master_seed=seed, statistic="max_d_kq", threads=threads, tolerance=0.15,
    )
    res = run_deviation(cfg)
    ok = res.passed  # two-sided |slope + 1/gamma| <= 0.15, as stated
    detail = (
        f"window slope {res.slope:.4f} (global {res.slope_global:.4f}) vs -4/3 +- 0.15; "
        f"one-sided (the bound's own direction) {'holds' if res.passed_upper else 'violated'}"
    )
    return 8, "deviation tail exponent at n = 2^14", ok, detail


@_timed
def criterion_9(seed, threads):
    hill = stable_tail_check(0.75, n=2**14, replicas=2000, seed=seed, threads=threads)
    spread = spread_check(0.5, (2**12, 2**14), replicas=500, seed=seed, threads=threads)
    iqr_ok = all(0.05 <= v <= 20.0 for v in spread.values())
    ok = hill.passed and iqr_ok
    detail = (
        f"hill {hill.index:.3f} vs 4/3 +- 0.3; "
        + "; ".join(f"IQR(n={n}) {v:.3f}" for n, v in spread.items())
    )
    return 9, "stable tail index and boundary nondegeneracy", ok, detail


@_timed
def criterion_10(seed, threads):
    cfg = ExperimentConfig(
        gamma=0.25, q=2.0, p=6.0, n_grid=tuple(2**k for k in range(8, 15)),
        replicas=200, master_seed=seed, statistic="w1", threads=threads, tolerance=0.3,
    )
    res = run_wasserstein(cfg)
    slope_ok = abs(res.fit.slope - (-3.0)) <= 0.3
    # pathwise domination against the exact final-prefix L^2 norm on the same
    # trajectories (identical replica streams)
    cfg_d = replace(cfg, statistic="d_nq")
    from .experiments import _collect_samples

    d_samples = _collect_samples(cfg_d)
    gap = float(np.max(res.samples - d_samples / np.asarray(cfg.n_grid)[None, :]))
    path_ok = gap <= 1e-3
    ok = slope_ok and path_ok
    detail = f"slope {res.fit.slope:.4f} vs -3 +- 0.3; max (W1 - D/n) = {gap:.2e}"
    return 10, "Wasserstein moment rate and pathwise domination", ok, detail


@_timed
def criterion_11(seed, threads):
    rng = np.random.default_rng(seed)
    U = uniform_cdf()
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 1001))
        pts = rng.random(n)
        a = d_nq(pts, U, 1.0)
        b = n * wasserstein1(pts, U)
        worst = max(worst, abs(a - b) / max(b, 1e-12))
    closed = abs(d_nq([0.5], U, 2.0) - math.sqrt(1.0 / 12.0))
    exact = abs(d_n2_exact([0.5], U) - math.sqrt(1.0 / 12.0))
    ok = worst <= 1e-3 and closed <= 1e-4 and exact <= 1e-12
    detail = f"100 samples, worst q=1 rel gap {worst:.2e}; closed-form gap {closed:.2e} (exact route {exact:.1e})"
    return 11, "quadrature vs exact-integral oracle equivalence", ok, detail


CRITERIA = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
    10: criterion_10,
    11: criterion_11,
}


def run_all(numbers=None, seed: int = 0, threads: int = 1, echo=print) -> list[CriterionResult]:
    """Run the requested criteria (all by default), printing one line each."""
    results = []
    for num in sorted(numbers or CRITERIA):
        res = CRITERIA[num](seed=seed, threads=threads)
        results.append(res)
        if echo is not None:
            echo(res.line())
    return results
