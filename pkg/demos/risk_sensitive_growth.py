"""Risk-sensitive optimal growth.

The entropic certainty equivalent replaces the expectation.  Larger risk
aversion lowers the value; tiny risk aversion recovers the additive problem.
With log utility and small shocks the savings rule barely moves on this grid.
"""

import numpy as np

from _common import config
from qtdp import build_rs_growth, greedy_policy, recover_value, solve_fixed_point
from qtdp.risk_sensitive import RiskParams, solve_fixed_point_rs
from qtdp.weighted_norm import kappa_norm

dp, params, kappa = build_rs_growth(config("rs_growth"))
x = np.array(dp.state_labels, dtype=float)
a = np.array(dp.action_labels, dtype=float)
g_add, _ = solve_fixed_point(dp)
v_add = recover_value(dp, g_add)
print(f"alpha = {kappa.spec['alpha']:.4f}, beta = {dp.beta}")

rows = []
for gamma in (1e-6, 0.5, 2.0, 8.0):
    g, rep = solve_fixed_point_rs(dp, RiskParams(gamma), kappa=kappa)
    v = recover_value(dp, g)
    s = a[greedy_policy(dp, g)]
    gap = kappa_norm(g - g_add, kappa, dp.feasible)
    rows.append((gamma, v, s))
    print(f"gamma {gamma:8.0e}: {rep.iterations:4d} iterations, kappa-distance to additive {gap:.2e}")

i = np.searchsorted(x, 5.0)
print(f"\nat x = {x[i]:.3f}: additive value {v_add[i]:.4f}")
for gamma, v, s in rows:
    print(f"  gamma {gamma:8.0e}: value {v[i]:9.4f}, saving {s[i]:.4f}")
