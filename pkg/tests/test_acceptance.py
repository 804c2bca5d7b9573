"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line.

The table is printed at the end of the pytest run (see ``conftest.py``).
"""

import json
import time

import numpy as np
import pytest

from conftest import ALL, CONFIG_DIR, tiny_dp, variant
from qtdp import oracle
from qtdp.core import expect, r_bar, r_hat
from qtdp.models import build_model, build_optimal_savings, build_rs_growth
from qtdp.q_transform import (DEFAULT_TOL, apply_S, greedy_policy, recover_value,
                              solve_fixed_point, sup_norm)
from qtdp.risk_sensitive import (RiskParams, apply_S_rs, apply_W, r_hat_rs,
                                 solve_fixed_point_rs, verify_monotone_assumptions)
from qtdp.weighted_norm import (auto_weight_linear, kappa_norm, value_upper_bound,
                                solve_fixed_point_weighted)

RESULTS: dict[int, tuple[str, bool, str]] = {}
FIXTURES = list(ALL)


def record(n: int, name: str, ok: bool, detail: str) -> None:
    RESULTS[n] = (name, bool(ok), detail)
    print(f"{'PASS' if ok else 'FAIL'} [{n:2d}] {name}: {detail}")
    assert ok, detail


def load(name):
    return build_model(json.loads((CONFIG_DIR / f"{name}.json").read_text()))


@pytest.fixture(scope="module")
def models():
    return {name: build_model(cfg) for name, cfg in ALL.items()}


@pytest.fixture(scope="module")
def solutions(models):
    return {name: solve_fixed_point(bm.dp) for name, bm in models.items()}


def test_01_contraction(models):
    worst, slowest = -np.inf, 0.0
    for name, bm in models.items():
        dp = bm.dp
        rng = np.random.default_rng(2024)
        finite = dp.reward[dp.feasible]
        scale = max(1.0, float(np.abs(finite[np.isfinite(finite)]).max()))
        t0 = time.perf_counter()
        for _ in range(100):
            g1 = np.where(dp.feasible, scale * (rng.normal(size=dp.feasible.shape) + rng.normal()), 0)
            g2 = np.where(dp.feasible, scale * (rng.normal(size=dp.feasible.shape) + rng.normal()), 0)
            lhs = sup_norm(dp, apply_S(dp, g1) - apply_S(dp, g2))
            worst = max(worst, lhs - dp.beta * sup_norm(dp, g1 - g2))
        slowest = max(slowest, time.perf_counter() - t0)
        assert dp.n_states <= 2000
    record(1, "contraction on six fixtures", worst <= 1e-9 and slowest <= 10,
           f"max(||Sg1-Sg2|| - beta||g1-g2||) = {worst:.2e}, slowest model {slowest:.2f}s")


def test_02_geometric_rate(solutions):
    excess = -np.inf
    for name, (g, rep) in solutions.items():
        d = np.array(rep.distances)
        excess = max(excess, float(np.max(d[1:] - rep.modulus * d[:-1], initial=-np.inf)))
    lin = load("linear_savings").dp
    weight, cert = auto_weight_linear(lin, 1.0, 2.0)
    _, wrep = solve_fixed_point_weighted(lin, weight, certificate=cert)
    d = np.array(wrep.distances)
    w_excess = float(np.max(d[1:] - cert.modulus * d[:-1]))
    record(2, "geometric rate (sup and kappa norms)", excess <= 1e-12 and w_excess <= 1e-12,
           f"max(d_k+1 - beta d_k) = {excess:.2e}; weighted max(d_k+1 - alpha beta d_k) = "
           f"{w_excess:.2e} at alpha beta = {cert.modulus:.4f}")


def test_03_uniqueness(models):
    worst = 0.0
    for name, bm in models.items():
        sols = [solve_fixed_point(bm.dp, g0=c) for c in (0.0, 10.0, -10.0)]
        err = max(rep.certified_error for _, rep in sols)
        for g, _ in sols[1:]:
            gap = sup_norm(bm.dp, g - sols[0][0])
            worst = max(worst, gap / (2 * err) if err > 0 else (np.inf if gap > 0 else 0.0))
    record(3, "unique fixed point from g0 in {0, 10, -10}", worst <= 1,
           f"max gap / (2 x certified error) = {worst:.3f}")


def test_04_bellman_recovery(models, solutions):
    worst = 0.0
    for name, (g, rep) in solutions.items():
        dp = models[name].dp
        v = recover_value(dp, g)
        cont = dp.beta * expect(dp.pair_kernel, v)
        worst = max(worst, float(np.max(np.abs(g[dp.feasible] - cont))))
    record(4, "Bellman recovery g* = beta P v*", worst <= 10 * DEFAULT_TOL,
           f"max |g* - beta P v| = {worst:.2e} (limit {10 * DEFAULT_TOL:.0e})")


def micro_instances():
    yield "micro_savings", load("micro_savings").dp
    rng = np.random.default_rng(7)
    for i in range(20):
        n, m = int(rng.integers(2, 7)), int(rng.integers(1, 5))
        F = rng.random((n, m)) < 0.7
        F[np.arange(n), rng.integers(m, size=n)] = True
        beta = float(rng.uniform(0.5, 0.95))
        yield f"random_{i}", tiny_dp(rng.normal(size=(n, m)) * 3,
                                     rng.dirichlet(np.ones(n) * 0.5, size=(n, m)), beta, F)


def test_05_policy_optimality():
    t0 = time.perf_counter()
    worst, count = -np.inf, 0
    for name, dp in micro_instances():
        assert dp.n_states <= 6 and dp.feasible.sum(axis=1).max() <= 4 and dp.beta <= 0.95
        g, rep = solve_fixed_point(dp)
        res = oracle.enumeration_check(dp, recover_value(dp, g), greedy_policy(dp, g), 300)
        slack = res["tail"] + 1e-8
        worst = max(worst, res["greedy_gap"] - slack, res["discrepancy"] - rep.certified_error - slack)
        count += res["evaluated"]
    elapsed = time.perf_counter() - t0
    record(5, "greedy policy optimal by enumeration", worst <= 0 and elapsed <= 60,
           f"{count} policies on 21 instances, max excess over tail + 1e-8 = {worst:.2e}, "
           f"{elapsed:.1f}s")


def test_06_unbounded_below():
    cfg = variant(ALL["savings"], grids__c_floor_frac=1e-8)
    dp = build_optimal_savings(cfg)
    g, _ = solve_fixed_point(dp)
    min_r = float(dp.reward[dp.feasible].min())
    rb, rh = r_bar(dp), r_hat(dp)[dp.feasible]
    bound = dp.beta * (rb.max() + abs(rh.min())) / (1 - dp.beta)
    norm = sup_norm(dp, g)
    record(6, "bounded g* with rewards unbounded below", min_r <= -1e7 and norm <= bound,
           f"min r = {min_r:.2e}, ||g*|| = {norm:.4f} <= {bound:.4f}")


def test_07_closed_form(config_dir):
    bm = load("cake_eating")
    dp = bm.dp
    assert dp.n_states == 200
    g, _ = solve_fixed_point(dp)
    R = oracle.cake_eating_params(bm.config)
    res = oracle.cake_eating_comparison(dp, recover_value(dp, g), greedy_policy(dp, g), R)
    resid = oracle.cake_eating_residual(dp.beta, R, np.geomspace(0.1, 10, 50))
    record(7, "cake eating closed form",
           res["max_policy_steps"] <= 2 and res["max_value_ratio"] <= 10 and resid <= 1e-10,
           f"policy within {res['max_policy_steps']:.2f} grid steps, value within "
           f"{res['max_value_ratio']:.3f} x local grid error, closed-form residual {resid:.1e}")


def test_08_reservation_wage(models, solutions):
    dp = models["job_search"].dp
    g, _ = solutions["job_search"]
    W = np.asarray(dp.meta["wage_nodes"])[0]
    p = np.asarray(dp.meta["wage_weights"])
    c = ALL["job_search"]["extras"]["c"]
    w_oracle = oracle.reservation_wage(np.log, dp.beta, W, p, c)
    sigma = greedy_policy(dp, g)[:dp.meta["n_search"]]
    wages = np.array([dp.state_labels[x][1] for x in range(dp.meta["n_search"])])
    w_solver = wages[sigma == 0].min()
    nodes = np.sort(W)
    steps = abs(int(np.searchsorted(nodes, w_solver)) - int(np.searchsorted(nodes, w_oracle)))
    record(8, "reservation wage", steps <= 1,
           f"solver threshold {w_solver:.4f}, oracle {w_oracle:.4f}, {steps} node(s) apart")


def test_09_weighted():
    dp = load("linear_savings").dp
    weight, cert = auto_weight_linear(dp, 1.0, 2.0)
    k = weight.kappa
    F = dp.feasible
    rng = np.random.default_rng(9)
    ratio = 0.0
    for _ in range(100):
        g1 = rng.normal(size=F.shape) * k[:, None] * 10
        g2 = rng.normal(size=F.shape) * k[:, None] * 10
        ratio = max(ratio, kappa_norm(apply_S(dp, g1) - apply_S(dp, g2), k, F)
                    / kappa_norm(g1 - g2, k, F))
    g, rep = solve_fixed_point_weighted(dp, weight, certificate=cert)
    v = recover_value(dp, g)
    excess = float(np.max(v - value_upper_bound(cert, k)))
    ok = cert.holds and ratio <= cert.modulus + 1e-9 and rep.measured_modulus <= cert.modulus + 1e-9 \
        and excess <= 0
    record(9, "weighted contraction on linear savings", ok,
           f"q = {weight.spec.get('q')}, alpha beta = {cert.modulus:.4f}, measured kappa-modulus "
           f"{max(ratio, rep.measured_modulus):.4f}, max(v - d kappa/(1-alpha beta)) = {excess:.2f}")


def test_10_risk_sensitive():
    dp, params, kappa = build_rs_growth(ALL["rs_growth"])
    F = dp.feasible
    mu, sigma = 0.0, 0.1
    floor = mu - params.gamma * sigma ** 2 / 2
    rh_min = float(np.min(r_hat_rs(dp, params)[F]))
    rng = np.random.default_rng(10)
    disc = 0.0
    for _ in range(20):
        g = rng.normal(size=F.shape)
        K = float(rng.uniform(0, 20))
        disc = max(disc, float(np.max(np.abs(apply_S_rs(dp, g + K, params)[F]
                                              - apply_S_rs(dp, g, params)[F] - dp.beta * K))))
    g_rs, _ = solve_fixed_point_rs(dp, RiskParams(1e-6), kappa=kappa)
    g_add, _ = solve_fixed_point(dp)
    close = kappa_norm(g_rs - g_add, kappa, F)
    x = np.array(dp.state_labels, dtype=float)
    rank = np.argsort(np.argsort(x))
    fkg = -np.inf
    for _ in range(100):
        h1 = np.cumsum(rng.exponential(size=x.size))[rank] * rng.uniform(0.01, 3)
        h2 = np.cumsum(rng.exponential(size=x.size))[rank] * rng.uniform(0.01, 3)
        rhs = apply_W(dp, h1, params)[F] + apply_W(dp, h2, params)[F]
        fkg = max(fkg, float(np.max(apply_W(dp, h1 + h2, params)[F] - rhs
                                    - 1e-12 * (1 + np.abs(rhs)))))
    mono = verify_monotone_assumptions(dp).holds
    ok = rh_min >= floor - 1e-12 and disc <= 1e-10 and close <= 1e-4 and fkg <= 0 and mono
    record(10, "risk-sensitive growth", ok,
           f"min r_hat_rs = {rh_min:.5f} >= {floor:.5f}, discounting error {disc:.1e}, "
           f"small-gamma gap {close:.1e}, FKG max excess {fkg:.1e}")


def test_11_oracle_independence():
    worst, details = -np.inf, []
    for name, cfg in ALL.items():
        bm = build_model(variant(cfg, beta=0.9))
        dp = bm.dp
        g, rep = solve_fixed_point(dp)
        v = recover_value(dp, g)
        vt, tail = oracle.truncated_bellman(dp, 500)
        mask = np.isfinite(v)
        gap = float(np.max(np.abs(vt[mask] - v[mask])))
        worst = max(worst, gap - tail - 1e-8)
        details.append(f"{name} {gap:.1e}")
    record(11, "truncated Bellman oracle at horizon 500", worst <= 0,
           "gaps: " + ", ".join(details))
