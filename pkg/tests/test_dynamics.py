import math

import numpy as np
import pytest

from ergo_moments.dynamics import (
    LsvMap,
    build_tower,
    build_ulam,
    correlation_decay,
    holder_bump,
    invariant_cdf,
    iterate,
    lsv_map,
    preimage_left,
)


class TestMap:
    def test_fixed_point_and_branches(self):
        assert lsv_map(0.5, 0.0) == 0.0
        assert lsv_map(0.3, 0.75) == pytest.approx(0.5)
        assert lsv_map(0.3, 0.5) == 0.0
        assert lsv_map(0.3, 1.0) == 1.0

    def test_left_branch_value(self):
        # 0.25 (1 + sqrt(2) sqrt(0.25))
        want = 0.25 * (1.0 + math.sqrt(2.0) * 0.5)
        assert lsv_map(0.5, 0.25) == pytest.approx(want, rel=1e-12)
        assert want == pytest.approx(0.4267766953, abs=1e-9)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            lsv_map(0.5, -0.1)
        with pytest.raises(ValueError):
            lsv_map(0.5, 1.1)
        with pytest.raises(ValueError):
            LsvMap(1.0)

    def test_maps_into_unit_interval(self, rng):
        xs = rng.random(1000)
        for g in (0.1, 0.5, 0.9):
            ys = lsv_map(g, xs)
            assert np.all((ys >= 0.0) & (ys <= 1.0))

    def test_left_branch_increasing_to_one(self):
        xs = np.linspace(0.0, 0.5 - 1e-12, 500)
        ys = lsv_map(0.6, xs)
        assert np.all(np.diff(ys) > 0)
        assert ys[-1] == pytest.approx(1.0, abs=1e-9)


class TestIterate:
    def test_single_step(self):
        tr = iterate(0.5, n=1, burn_in=0, x0=0.75)
        assert tr.points.tolist() == [0.5]

    def test_burn_in_composition(self):
        a = iterate(0.5, n=20, burn_in=7, x0=0.3)
        b = iterate(0.5, n=27, burn_in=0, x0=0.3)
        assert np.array_equal(a.points, b.points[7:])

    def test_seed_reproducible(self):
        a = iterate(0.5, n=50, burn_in=10, seed=4, replica=2)
        b = iterate(0.5, n=50, burn_in=10, seed=4, replica=2)
        assert np.array_equal(a.points, b.points)
        c = iterate(0.5, n=50, burn_in=10, seed=4, replica=3)
        assert not np.array_equal(a.points, c.points)

    def test_occupation_matches_invariant_measure(self, ulam_025):
        tr = iterate(0.25, n=10**7, burn_in=10**4, seed=7)
        occ = float(np.mean(tr.points > 0.5))
        want = 1.0 - ulam_025.cdf(0.5)
        assert occ == pytest.approx(want, abs=2e-3)

    def test_validation(self):
        with pytest.raises(ValueError):
            iterate(0.5, n=0, x0=0.1)
        with pytest.raises(ValueError):
            iterate(0.5, n=1)  # neither x0 nor seed


class TestPreimage:
    def test_zero(self):
        assert preimage_left(0.5, 0.0) == 0.0

    @pytest.mark.parametrize("g", [0.1, 0.25, 0.5, 0.75, 0.9])
    def test_round_trip(self, g):
        ys = np.linspace(0.0, 1.0, 1001)[:-1]
        c = 2.0**g
        for y in ys:
            x = preimage_left(g, float(y))
            assert x * (1.0 + c * x**g) == pytest.approx(y, abs=1e-12)
        # y = 1 maps to the branch endpoint 1/2
        x = preimage_left(g, 1.0)
        assert x * (1.0 + c * x**g) == pytest.approx(1.0, abs=1e-12)

    def test_near_degenerate_gamma(self):
        # at gamma = 1 the branch is x(1+2x), whose preimage of 1 is 1/2
        assert preimage_left(0.999, 1.0) == pytest.approx(0.5, abs=1e-3)


class TestTower:
    def test_tail_identity_exact(self):
        tower = build_tower(0.5, 200)
        assert np.max(np.abs(tower.tail - tower.x / 2.0)) == 0.0

    def test_mass_conservation(self):
        for g in (0.25, 0.75):
            tower = build_tower(g, 500)
            assert tower.masses.sum() + tower.tail[-1] == pytest.approx(0.5, abs=1e-12)
            assert np.all(tower.masses > 0)

    def test_sequences_monotone(self):
        tower = build_tower(0.5, 100)
        assert np.all(np.diff(tower.x) < 0)
        assert np.all(np.diff(tower.y) < 0)
        assert tower.x[0] == 1.0 and tower.y[0] == 1.0
        assert np.all((tower.y > 0.5) & (tower.y <= 1.0))

    def test_tail_exponent(self):
        tower = build_tower(0.5, 10**4)
        k = np.arange(1, 10**4 + 1)
        sel = k >= 100
        slope = np.polyfit(np.log(k[sel]), np.log(tower.tail[1:][sel]), 1)[0]
        assert slope == pytest.approx(-2.0, abs=0.05)

    @pytest.mark.parametrize("g", [0.25, 0.5, 0.75])
    def test_asymptotic_ratio(self, g):
        tower = build_tower(g, 10**4)
        ratio = tower.x[-1] / (0.5 * (g * 10**4) ** (-1.0 / g))
        assert 0.95 <= ratio <= 1.05

    def test_weighted_mass_sum_converges(self):
        # sum_k k * mass_k stabilizes: the summand is ~ 2 k^-2 at gamma = 1/2,
        # so the last decade adds about 2(1/10^3 - 1/10^4) ~ 1.8e-3
        tower = build_tower(0.5, 10**4)
        k = np.arange(1, 10**4 + 1)
        partial = np.cumsum(k * tower.masses)
        assert partial[-1] - partial[10**3 - 1] < 2e-3

    def test_validation(self):
        with pytest.raises(ValueError):
            build_tower(0.5, 1)


class TestUlam:
    def test_rows_stochastic(self, ulam_small):
        rowsums = np.asarray(ulam_small.P.sum(axis=1)).ravel()
        assert np.max(np.abs(rowsums - 1.0)) <= 1e-12

    def test_stationarity_residual(self, ulam_small):
        h = ulam_small.stationary
        assert np.max(np.abs(h @ ulam_small.P - h)) <= 1e-10

    def test_cdf_endpoints_and_monotonicity(self, ulam_small):
        F = ulam_small.cdf
        assert F(0.0) == 0.0 and F(1.0) == pytest.approx(1.0)
        ts = np.linspace(0.0, 1.0, 400)
        assert np.all(np.diff(F(ts)) >= -1e-15)

    def test_invariant_cdf_wrapper(self, ulam_small):
        assert invariant_cdf(ulam_small, 0.0) == 0.0
        with pytest.raises(ValueError):
            invariant_cdf(ulam_small, 1.5)

    def test_grid_refinement_self_consistency(self, ulam_025):
        finer = build_ulam(0.25, 8192)
        ts = np.linspace(0.0, 1.0, 10**4)
        assert np.max(np.abs(ulam_025.cdf(ts) - finer.cdf(ts))) <= 5e-3

    def test_cdf_matches_long_trajectory(self, ulam_025):
        tr = iterate(0.25, n=10**7, burn_in=10**4, seed=13)
        ts = np.linspace(0.0, 1.0, 4001)
        xs = np.sort(tr.points)
        emp = np.searchsorted(xs, ts, side="right") / xs.size
        assert np.max(np.abs(emp - ulam_025.cdf(ts))) <= 3e-3

    def test_validation(self):
        with pytest.raises(ValueError):
            build_ulam(0.5, 32)


class TestCorrelationDecay:
    def test_constant_observable_degenerate(self):
        one = lambda x: np.ones_like(np.asarray(x, dtype=float))
        with pytest.raises(ValueError):
            correlation_decay(0.5, one, one, [2, 4, 8], replicas=40, length=2000, seed=1)

    def test_short_range_summable(self):
        f = holder_bump()
        r = correlation_decay(
            0.25, f, f, [4, 8, 16, 32, 64, 128, 256], replicas=120, length=2 * 10**5, seed=3
        )
        assert r.slope <= -1.0

    def test_long_range_rate(self):
        # the covariance bound decays like n^(-(1-g)/g) = n^(-1/3); the
        # desk-scale estimate decays at least that fast but stays polynomial
        f = holder_bump()
        r = correlation_decay(
            0.75, f, f, [16, 64, 256, 1024, 4096], replicas=250, length=10**6, seed=3
        )
        assert r.slope <= -1.0 / 3.0 + 0.1
        assert r.slope >= -0.75  # far from the short-range regime
        assert np.all(r.cov_abs > 0)

    def test_lag_validation(self):
        f = holder_bump()
        with pytest.raises(ValueError):
            correlation_decay(0.5, f, f, [5], replicas=40, length=1000)
