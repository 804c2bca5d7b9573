"""Job search and the reservation wage.

The searcher accepts wage w forever or takes outside income c and draws again.
The greedy policy of the transformed fixed point is a threshold rule, and its
threshold matches the scalar reservation-value equation.
"""

import numpy as np

from _common import config
from qtdp import build_job_search, greedy_policy, solve_fixed_point
from qtdp.oracle import reservation_value, reservation_wage

cfg = config("job_search")
dp = build_job_search(cfg)
g, _ = solve_fixed_point(dp)
n = dp.meta["n_search"]
sigma = greedy_policy(dp, g)[:n]
wages = np.array([dp.state_labels[x][1] for x in range(n)])

W = np.asarray(dp.meta["wage_nodes"])[0]
p = np.asarray(dp.meta["wage_weights"])
c = cfg["extras"]["c"]
h = reservation_value(np.log, dp.beta, W, p, c)
print(f"continuation value: solver {g[0, 1]:.8f}, scalar equation {h:.8f}")
print(f"reservation wage: solver {wages[sigma == 0].min():.4f}, "
      f"oracle {reservation_wage(np.log, dp.beta, W, p, c):.4f}")
for wi, a in zip(wages, sigma):
    print(f"  w = {wi:7.4f}  {'accept' if a == 0 else 'reject'}")
