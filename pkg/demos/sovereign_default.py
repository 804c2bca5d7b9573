"""Sovereign default with exclusion after default.

Defaulting sends the economy to autarky, whose value solves a linear system.
The solver's excluded-state values must match it, and the greedy choice
repays exactly where repaying is worth at least as much as defaulting.
"""

import numpy as np

from _common import config
from qtdp import CrraUtility, build_optimal_default, greedy_policy, recover_value, solve_fixed_point
from qtdp.oracle import excluded_value

cfg = config("default")
dp = build_optimal_default(cfg)
g, conv = solve_fixed_point(dp)
v = recover_value(dp, g)
sigma = greedy_policy(dp, g)
n_act, nw, ny = dp.meta["n_active"], dp.meta["n_w"], dp.meta["n_y"]

vd = excluded_value(cfg["chain"]["transition"], dp.meta["income_nodes"], dp.meta["income_weights"],
                    CrraUtility(cfg["utility"]["gamma"]), dp.beta)
print(f"{dp.n_states} states, {conv.iterations} iterations")
print(f"excluded values vs linear solve: max gap {np.abs(v[n_act:] - vd.ravel()).max():.1e}")

share = (sigma[:n_act] == 0).reshape(-1, nw).mean(axis=0)
w = np.array([dp.state_labels[i][1] for i in range(nw)])
print("\n  assets  default share over (y, z)")
for wi, s in zip(w, share):
    print(f"{wi:8.3f}  {s:5.2f}")
