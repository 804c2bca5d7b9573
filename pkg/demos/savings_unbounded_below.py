"""CRRA savings with utility unbounded below.

Consumption near zero makes rewards arbitrarily negative, so value iteration
on v has no bounded space to live in.  The transformed function g = beta E v
stays bounded: its norm is controlled by sup r_bar and inf r_hat.
"""

import numpy as np

from _common import config
from qtdp import build_optimal_savings, check_assumption_one, greedy_policy, recover_value, \
    solve_fixed_point
from qtdp.core import r_bar, r_hat

cfg = config("savings")
cfg["grids"]["c_floor_frac"] = 1e-8
dp = build_optimal_savings(cfg)

rep = check_assumption_one(dp)
print(f"states {dp.n_states}, actions {dp.n_actions}, feasible pairs {dp.n_pairs}")
print(f"min reward {dp.reward[dp.feasible].min():.3e}")
print(f"sup r_bar = {rep.sup_rbar:.4f}, inf r_hat = {rep.inf_rhat:.4f}")

g, conv = solve_fixed_point(dp)
bound = dp.beta * (r_bar(dp).max() + abs(r_hat(dp)[dp.feasible].min())) / (1 - dp.beta)
print(f"{conv.iterations} iterations, certified error {conv.certified_error:.1e}")
print(f"||g*|| = {np.abs(g[dp.feasible]).max():.4f} <= {bound:.4f}")

v = recover_value(dp, g)
sigma = greedy_policy(dp, g)
w = np.array([s[0] for s in dp.state_labels])
c = np.array(dp.action_labels)[sigma]
n = dp.n_states // 2
print("\n   wealth   c (low z)  c (high z)   v (low z)")
for i in range(0, n, 6):
    print(f"{w[i]:9.3f} {c[i]:10.4f} {c[n + i]:11.4f} {v[i]:11.3f}")
