"""Deterministic cake eating against its closed form.

With log utility and w' = R (w - c), the optimal rule is c = (1 - beta) w.
The discretised problem should reproduce it up to grid error.
"""

import numpy as np

from _common import config
from qtdp import build_optimal_savings, greedy_policy, recover_value, solve_fixed_point
from qtdp.oracle import cake_eating_closed_form, cake_eating_comparison

cfg = config("cake_eating")
R = cfg["extras"]["R"]
dp = build_optimal_savings(cfg)
g, conv = solve_fixed_point(dp)
v = recover_value(dp, g)
sigma = greedy_policy(dp, g)

w = np.array([s[0] for s in dp.state_labels])
c = np.array(dp.action_labels)[sigma]
v_cf, c_cf = cake_eating_closed_form(dp.beta, R, w)
res = cake_eating_comparison(dp, v, sigma, R)

print(f"beta = {dp.beta}, R = {R:.4f}, {dp.n_states} wealth nodes, {conv.iterations} iterations")
print(f"policy error {res['max_policy_steps']:.2f} grid steps, "
      f"value error {res['max_value_ratio']:.3f} x one-cell variation")
print("\n  wealth    c grid    c exact    v grid    v exact")
for i in range(0, dp.n_states, 25):
    print(f"{w[i]:8.3f} {c[i]:9.4f} {c_cf[i]:10.4f} {v[i]:9.3f} {v_cf[i]:10.3f}")
