import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import ALL, tiny_dp, variant
from qtdp.core import AssumptionError, r_bar, r_hat
from qtdp.models import build_rs_growth
from qtdp.q_transform import apply_S, greedy_policy, recover_value, solve_fixed_point
from qtdp.risk_sensitive import (RiskParams, apply_S_rs, apply_W, entropic_expectation,
                                 is_increasing_in_state, r_hat_rs, sigma_value_rs,
                                 solve_fixed_point_rs, verify_monotone_assumptions)
from qtdp.stochastics import lognormal_quadrature
from qtdp.weighted_norm import certify_assumption_three, kappa_norm


@pytest.fixture(scope="module")
def growth():
    return build_rs_growth(ALL["rs_growth"])


def increasing_table(dp, rng, scale=1.0):
    x = np.array(dp.state_labels)
    base = np.cumsum(rng.exponential(size=x.size)) * scale
    return base[np.argsort(np.argsort(x))][:, None] + np.zeros(dp.feasible.shape)


def test_risk_params():
    with pytest.raises(ValueError):
        RiskParams(0.0)


def test_entropic_examples():
    assert entropic_expectation([0, 1, 0], [5.0, 2.0, -1.0], 3.0, 0.9) == pytest.approx(1.8, abs=1e-15)
    assert entropic_expectation([0.2, 0.8], [4.0, 4.0], 7.0, 0.5) == pytest.approx(2.0, abs=1e-15)
    mu, sigma, gamma = 0.0, 0.1, 2.0
    q = lognormal_quadrature(mu, sigma, 15)
    got = entropic_expectation(q.weights, np.log(q.nodes), gamma, 0.95)
    assert abs(got - 0.95 * (mu - gamma * sigma ** 2 / 2)) <= 1e-6
    assert np.isneginf(entropic_expectation([0.5, 0.5], [1.0, -np.inf], 1.0))
    assert entropic_expectation([1.0, 0.0], [1.0, -np.inf], 1.0) == 1.0


def test_entropic_large_values_stable():
    out = entropic_expectation([0.5, 0.5], [1e4, 1e4 + 1], 50.0)
    assert np.isfinite(out) and 1e4 <= out <= 1e4 + 1


def test_apply_S_rs_discounting_zero_reward():
    dp = tiny_dp(np.zeros((3, 2)), np.full((3, 2, 3), 1 / 3))
    np.testing.assert_allclose(apply_S_rs(dp, np.full((3, 2), 4.0), RiskParams(2.0)), 0.9 * 4.0,
                               rtol=1e-15)


def test_deterministic_kernel_matches_additive(rng):
    n, m = 4, 3
    K = np.zeros((n, m, n))
    K[np.arange(n)[:, None], np.arange(m)[None, :], rng.integers(n, size=(n, m))] = 1
    dp = tiny_dp(rng.normal(size=(n, m)), K)
    g = rng.normal(size=(n, m))
    for gamma in (0.01, 1.0, 30.0):
        np.testing.assert_allclose(apply_S_rs(dp, g, RiskParams(gamma)), apply_S(dp, g),
                                   rtol=1e-13, atol=1e-13)


def test_small_gamma_close_to_additive(growth):
    dp, _, _ = growth
    g = np.zeros(dp.feasible.shape)
    diff = np.abs(apply_S_rs(dp, g, RiskParams(1e-6)) - apply_S(dp, g))[dp.feasible]
    assert diff.max() <= 1e-4
    rh = r_hat_rs(dp, RiskParams(1e-6)) - r_hat(dp)
    assert np.abs(rh[dp.feasible]).max() <= 1e-4


def test_r_hat_rs_constant():
    dp = tiny_dp(np.full((3, 1), 2.5), np.full((3, 1, 3), 1 / 3))
    np.testing.assert_allclose(r_hat_rs(dp, RiskParams(4.0))[:, 0], 2.5, rtol=1e-15)


def test_r_hat_rs_growth_lower_bound(growth):
    dp, params, _ = growth
    rh = r_hat_rs(dp, params)[dp.feasible]
    assert rh.min() >= 0.0 - params.gamma * 0.1 ** 2 / 2 - 1e-12


def test_monotone_flags(growth):
    dp, _, _ = growth
    s = verify_monotone_assumptions(dp)
    assert s.holds and s.to_dict()["upper_sets"] == "all"


def test_monotone_reward_decreasing_detected():
    K = np.full((3, 1, 3), 1 / 3)
    dp = tiny_dp([[3.0], [2.0], [1.0]], K, state_labels=[0.0, 1.0, 2.0])
    s = verify_monotone_assumptions(dp)
    assert not s.reward_increasing and s.kernel_monotone and s.feasibility_nested


def test_monotone_kernel_violation_detected():
    K = np.zeros((2, 1, 2))
    K[0, 0, 1] = 1      # low state jumps high
    K[1, 0, 0] = 1      # high state jumps low
    dp = tiny_dp([[0.0], [1.0]], K, state_labels=[0.0, 1.0])
    s = verify_monotone_assumptions(dp)
    assert not s.kernel_monotone and s.reward_increasing


def test_monotone_feasibility_violation_detected():
    F = np.array([[True, True], [True, False]])
    dp = tiny_dp(np.zeros((2, 2)), np.full((2, 2, 2), 0.5), feasible=F, state_labels=[0.0, 1.0])
    assert not verify_monotone_assumptions(dp).feasibility_nested


def test_solve_rs_zero_reward():
    dp = tiny_dp(np.zeros((3, 2)), np.full((3, 2, 3), 1 / 3))
    g, rep = solve_fixed_point_rs(dp, RiskParams(3.0), g0=2.0)
    assert np.abs(g).max() <= 1e-10 and rep.metadata["gamma"] == 3.0


def test_solve_rs_growth_weighted(growth):
    dp, params, kappa = growth
    cert = certify_assumption_three(dp, kappa)
    assert cert.holds and cert.alpha <= kappa.spec["alpha"] + 1e-12
    g, rep = solve_fixed_point_rs(dp, params, kappa=kappa)
    assert rep.norm == "kappa"
    assert rep.measured_modulus <= cert.modulus + 1e-9
    d = np.array(rep.distances)
    assert np.all(d[1:] <= cert.modulus * d[:-1] + 1e-12)
    assert is_increasing_in_state(dp, g)
    # fixed point relation through W and the value
    v = recover_value(dp, g)
    np.testing.assert_allclose(apply_W(dp, v, params)[dp.feasible], g[dp.feasible], atol=1e-9)
    greedy_policy(dp, g)


def test_solve_rs_small_gamma_matches_additive(growth):
    dp, _, kappa = growth
    g_rs, _ = solve_fixed_point_rs(dp, RiskParams(1e-6), kappa=kappa)
    g_add, _ = solve_fixed_point(dp)
    assert kappa_norm(g_rs - g_add, kappa, dp.feasible) <= 1e-4


def test_solve_rs_rejects_non_monotone(growth):
    dp, params, kappa = growth
    g0 = -increasing_table(dp, np.random.default_rng(0))
    with pytest.raises(AssumptionError):
        solve_fixed_point_rs(dp, params, kappa=kappa, g0=g0)
    K = np.zeros((2, 1, 2))
    K[0, 0, 1] = K[1, 0, 0] = 1
    bad = tiny_dp([[0.0], [1.0]], K, state_labels=[0.0, 1.0])
    with pytest.raises(AssumptionError):
        solve_fixed_point_rs(bad, 1.0, kappa=np.ones(2))


def test_sigma_value_rs_horizon_zero(growth):
    dp, params, _ = growth
    sigma = np.zeros(dp.n_states, dtype=int)
    v, _ = sigma_value_rs(dp, sigma, params, 0)
    np.testing.assert_array_equal(v, r_bar(dp))


def test_sigma_value_rs_deterministic():
    K = np.zeros((3, 1, 3))
    K[0, 0, 1] = K[1, 0, 2] = K[2, 0, 0] = 1
    dp = tiny_dp([[1.0], [-2.0], [0.5]], K, beta=0.8)
    sigma = np.zeros(3, dtype=int)
    P = K[:, 0]
    v = dp.reward[:, 0].copy()
    for _ in range(25):
        v = dp.reward[:, 0] + 0.8 * P @ v
    for gamma in (0.1, 5.0):
        got, tail = sigma_value_rs(dp, sigma, RiskParams(gamma), 25)
        np.testing.assert_allclose(got, v, rtol=1e-12)
        assert tail >= 0


def micro_growth():
    cfg = variant(ALL["rs_growth"], grids={"x": {"values": [0.5, 1.5]}, "a": {"values": [0.0, 0.4, 0.8]}},
                  shocks={"eps": {"type": "lognormal", "mu": 0.0, "sigma": 0.1, "n_nodes": 2}})
    return build_rs_growth(cfg)


def test_micro_growth_enumeration():
    dp, params, kappa = micro_growth()
    assert dp.n_states == 4
    g, rep = solve_fixed_point_rs(dp, params, tol=1e-11)
    v = recover_value(dp, g)
    H = 400
    best = np.full(dp.n_states, -np.inf)
    tails = []
    choices = [np.flatnonzero(row) for row in dp.feasible]
    for sigma in itertools.product(*choices):
        val, tail = sigma_value_rs(dp, np.array(sigma), params, H)
        best = np.maximum(best, val)
        tails.append(tail)
    assert np.max(np.abs(best - v)) <= max(tails) + 1e-8
    sig = greedy_policy(dp, g)
    vg, _ = sigma_value_rs(dp, sig, params, H)
    assert np.max(np.abs(vg - v)) <= max(tails) + 1e-8


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_rs_operator_properties(seed):
    dp, params, kappa = build_rs_growth(ALL["rs_growth"]) if seed % 2 else micro_growth()
    rng = np.random.default_rng(seed)
    F = dp.feasible
    g1 = rng.normal(size=F.shape) * 2
    g2 = g1 + np.abs(rng.normal(size=F.shape))
    S1 = apply_S_rs(dp, g1, params)
    S2 = apply_S_rs(dp, g2, params)
    K = float(rng.uniform(0, 20))
    np.testing.assert_allclose(apply_S_rs(dp, g1 + K, params)[F], S1[F] + dp.beta * K, atol=1e-10)
    assert np.all(S1[F] <= S2[F] + 1e-12)
    assert np.all(S1[F] <= apply_S(dp, g1)[F] + 1e-12)
    assert np.all(apply_S_rs(dp, g1, RiskParams(2 * params.gamma))[F] <= S1[F] + 1e-12)


def test_fkg_subadditivity(growth):
    dp, params, _ = growth
    rng = np.random.default_rng(11)
    F = dp.feasible
    for _ in range(100):
        h1 = increasing_table(dp, rng, rng.uniform(0.01, 3))[:, 0]
        h2 = increasing_table(dp, rng, rng.uniform(0.01, 3))[:, 0]
        lhs = apply_W(dp, h1 + h2, params)[F]
        rhs = apply_W(dp, h1, params)[F] + apply_W(dp, h2, params)[F]
        assert np.all(lhs <= rhs + 1e-12 * (1 + np.abs(rhs)))


def test_monotone_invariance(growth):
    dp, params, _ = growth
    rng = np.random.default_rng(5)
    for _ in range(20):
        g = increasing_table(dp, rng, rng.uniform(0.1, 2))
        assert is_increasing_in_state(dp, apply_S_rs(dp, g, params))
