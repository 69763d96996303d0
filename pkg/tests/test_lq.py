import json
import math

import numpy as np
import pytest

from ergo_moments.lq import (
    LqSpace,
    batch_ratios,
    check_smoothness,
    d2_psi_p,
    finite_diff_d2,
    finite_diff_d2_extrapolated,
    norm_q,
    psi_p,
    smoothness_constants,
)


def test_norm_zero_vector():
    sp = LqSpace.uniform(4, 3.0)
    assert norm_q(sp, np.zeros(4)) == 0.0


def test_norm_euclidean_hand_value():
    sp = LqSpace.uniform(2, 2.0)
    assert norm_q(sp, [3.0, 4.0]) == pytest.approx(5.0, abs=0)


def test_norm_matches_extended_precision_resummation(rng):
    sp = LqSpace(64, 3.0, rng.uniform(0.25, 2.0, 64))
    x = rng.standard_normal(64)
    got = norm_q(sp, x)
    # oracle: compensated summation of the weighted powers
    want = math.fsum(w * abs(v) ** 3 for w, v in zip(sp.weights, x)) ** (1.0 / 3.0)
    assert got == pytest.approx(want, rel=1e-13)


def test_norm_dimension_mismatch():
    sp = LqSpace.uniform(3, 2.0)
    with pytest.raises(ValueError):
        norm_q(sp, [1.0, 2.0])


def test_space_validation():
    with pytest.raises(ValueError):
        LqSpace.uniform(4, 1.5)
    with pytest.raises(ValueError):
        LqSpace(2, 2.0, np.array([1.0, 0.0]))
    with pytest.raises(ValueError):
        LqSpace(0, 2.0, np.array([]))


def test_psi_values():
    sp = LqSpace.uniform(2, 2.0)
    assert psi_p(sp, 2.0, [0.0, 0.0]) == 0.0
    assert psi_p(sp, 2.0, [3.0, 4.0]) == pytest.approx(25.0)
    assert psi_p(sp, 3.0, [3.0, 4.0]) == pytest.approx(125.0)
    with pytest.raises(ValueError):
        psi_p(sp, 1.5, [1.0, 1.0])


class TestSecondDerivative:
    def test_diagonal_collapse_h_v_x(self, rng):
        # both integrals collapse to |x|_q^q, leaving p(p-1)|x|^p
        for p, q, d in [(2.0, 2.0, 3), (3.0, 2.0, 4), (4.0, 3.0, 8), (2.0, 4.0, 6)]:
            sp = LqSpace(d, q, rng.uniform(0.5, 2.0, d))
            x = rng.standard_normal(d)
            want = p * (p - 1.0) * norm_q(sp, x) ** p
            assert d2_psi_p(sp, p, x, x, x) == pytest.approx(want, rel=1e-12)

    def test_p_equals_q_single_term(self, rng):
        q = 3.0
        sp = LqSpace.uniform(5, q)
        x, h, v = rng.standard_normal((3, 5))
        got = d2_psi_p(sp, q, x, h, v)
        want = q * (q - 1.0) * float(np.sum(h * v * np.abs(x) ** (q - 2.0)))
        assert got == pytest.approx(want, rel=1e-12)

    def test_matches_finite_difference(self, rng):
        sp = LqSpace.uniform(16, 3.0)
        x = rng.standard_normal(16)
        x += np.where(x >= 0, 0.02, -0.02)
        h, v = rng.standard_normal((2, 16))
        got = d2_psi_p(sp, 4.0, x, h, v)
        fd = finite_diff_d2_extrapolated(sp, 4.0, x, h, v, eps=1e-4)
        assert fd == pytest.approx(got, rel=1e-5)

    def test_zero_vector_rules(self):
        sp4 = LqSpace.uniform(3, 4.0)
        assert d2_psi_p(sp4, 3.0, np.zeros(3), np.ones(3), np.ones(3)) == 0.0
        with pytest.raises(ValueError):
            d2_psi_p(sp4, 2.0, np.zeros(3), np.ones(3), np.ones(3))
        sp2 = LqSpace(3, 2.0, np.array([1.0, 2.0, 3.0]))
        h = np.array([1.0, 0.5, -1.0])
        v = np.array([2.0, 1.0, 1.0])
        want = 2.0 * float(np.sum(sp2.weights * h * v))
        assert d2_psi_p(sp2, 2.0, np.zeros(3), h, v) == pytest.approx(want)

    def test_bilinearity(self, rng):
        sp = LqSpace.uniform(6, 3.0)
        x = rng.standard_normal(6)
        h1, h2, v = rng.standard_normal((3, 6))
        a, b = 0.7, -1.3
        lhs = d2_psi_p(sp, 3.5, x, a * h1 + b * h2, v)
        rhs = a * d2_psi_p(sp, 3.5, x, h1, v) + b * d2_psi_p(sp, 3.5, x, h2, v)
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_symmetry_exact(self, rng):
        sp = LqSpace.uniform(5, 4.0)
        x, h, v = rng.standard_normal((3, 5))
        assert d2_psi_p(sp, 3.0, x, h, v) == d2_psi_p(sp, 3.0, x, v, h)

    def test_diagonal_nonnegative(self, rng):
        for _ in range(50):
            p = rng.uniform(2.0, 5.0)
            q = rng.uniform(2.0, 5.0)
            sp = LqSpace.uniform(8, q)
            x, u = rng.standard_normal((2, 8))
            assert d2_psi_p(sp, p, x, u, u) >= 0.0

    def test_homogeneity(self, rng):
        sp = LqSpace.uniform(4, 3.0)
        p = 3.5
        x, h, v = rng.standard_normal((3, 4))
        lam = 1.7
        got = d2_psi_p(sp, p, lam * x, lam * h, lam * v)
        want = lam**p * d2_psi_p(sp, p, x, h, v)
        assert got == pytest.approx(want, rel=1e-12)

    def test_diagonal_bound(self, rng):
        for p, q in [(2.0, 2.0), (3.0, 2.0), (2.0, 4.0), (4.0, 3.0)]:
            sp = LqSpace.uniform(8, q)
            c_p, _ = smoothness_constants(p, q)
            for _ in range(200):
                x, u = rng.standard_normal((2, 8))
                lhs = abs(d2_psi_p(sp, p, x, u, u))
                rhs = c_p * norm_q(sp, x) ** (p - 2.0) * norm_q(sp, u) ** 2
                assert lhs <= rhs * (1.0 + 1e-9)


class TestFiniteDifference:
    def test_zero_direction(self, rng):
        sp = LqSpace.uniform(4, 3.0)
        x, v = rng.standard_normal((2, 4))
        assert finite_diff_d2(sp, 3.0, x, np.zeros(4), v, 1e-3) == 0.0

    def test_exact_for_quadratic(self, rng):
        # psi_2 on q = 2 is a quadratic form: the difference quotient has no
        # truncation error at any step (only eps^-2-amplified rounding)
        sp = LqSpace(4, 2.0, rng.uniform(0.5, 2.0, 4))
        x, h, v = rng.standard_normal((3, 4))
        want = 2.0 * float(np.sum(sp.weights * h * v))
        for eps in (1e-1, 1e-2, 1e-3):
            got = finite_diff_d2(sp, 2.0, x, h, v, eps)
            assert got == pytest.approx(want, rel=1e-8)

    def test_richardson_agreement(self, rng):
        sp = LqSpace.uniform(8, 4.0)
        x = rng.standard_normal(8)
        x += np.where(x >= 0, 0.02, -0.02)
        h, v = rng.standard_normal((2, 8))
        got = finite_diff_d2_extrapolated(sp, 3.0, x, h, v, 1e-4)
        assert got == pytest.approx(d2_psi_p(sp, 3.0, x, h, v), rel=1e-5)

    def test_eps_validation(self):
        sp = LqSpace.uniform(2, 2.0)
        with pytest.raises(ValueError):
            finite_diff_d2(sp, 2.0, [1.0, 1.0], [1.0, 0.0], [0.0, 1.0], 0.0)


def test_smoothness_constants_values():
    assert smoothness_constants(2.0, 2.0) == (2.0, 2.0)
    assert smoothness_constants(4.0, 3.0) == (12.0, 12.0)
    assert smoothness_constants(2.0, 4.0) == (6.0, 10.0)
    with pytest.raises(ValueError):
        smoothness_constants(1.0, 2.0)


def test_batch_ratios_match_scalar_route(rng):
    sp = LqSpace(6, 3.0, rng.uniform(0.5, 2.0, 6))
    p = 4.0
    X, U, V = rng.standard_normal((3, 40, 6))
    batch = batch_ratios(sp, p, X, U, V)
    for i in range(40):
        d2 = abs(d2_psi_p(sp, p, X[i], U[i], V[i]))
        denom = norm_q(sp, X[i]) ** (p - 2.0) * norm_q(sp, U[i]) * norm_q(sp, V[i])
        assert batch[i] == pytest.approx(d2 / denom, rel=1e-12)


class TestCheckSmoothness:
    def test_hilbert_ratio_attained_at_x(self, rng):
        # u = v = x gives exactly p(p-1) whatever the dimension
        for p in (2.0, 3.0, 4.5):
            sp = LqSpace.uniform(6, 2.0)
            x = rng.standard_normal((1, 6))
            assert batch_ratios(sp, p, x, x, x)[0] == pytest.approx(p * (p - 1.0), abs=1e-10)

    def test_hilbert_sweep_within_bound(self):
        rep = check_smoothness(LqSpace.uniform(8, 2.0), 3.0, 10**4, rng_seed=1)
        assert rep.passed
        assert rep.max_ratio <= 6.0 * (1.0 + 1e-9)
        assert rep.max_ratio == pytest.approx(6.0, rel=1e-6)  # attained at u=v=x

    def test_q4_p2_sweep(self):
        rep = check_smoothness(LqSpace.uniform(6, 4.0), 2.0, 10**4, rng_seed=2)
        assert rep.passed
        assert rep.bound_c_tilde == 10.0
        # convexity makes the Hessian PSD, so Cauchy-Schwarz caps the
        # off-diagonal ratio by the diagonal constant 6 already
        assert rep.max_ratio <= 6.0 * (1.0 + 1e-9)

    def test_fd_discrepancy_recorded(self):
        rep = check_smoothness(LqSpace.uniform(4, 3.0), 3.0, 500, rng_seed=3)
        assert 0.0 <= rep.max_fd_rel_error <= 1e-4

    def test_report_json_keys(self):
        rep = check_smoothness(LqSpace.uniform(3, 2.0), 2.0, 100, rng_seed=0)
        data = json.loads(rep.to_json())
        assert set(data) == {
            "p", "q", "samples", "max_ratio", "bound_c_tilde", "bound_c",
            "max_fd_rel_error", "pass",
        }
        assert data["pass"] is True

    def test_seed_reproducible(self):
        a = check_smoothness(LqSpace.uniform(5, 3.0), 2.5, 300, rng_seed=9)
        b = check_smoothness(LqSpace.uniform(5, 3.0), 2.5, 300, rng_seed=9)
        assert a.max_ratio == b.max_ratio and a.max_fd_rel_error == b.max_fd_rel_error
