"""Linear utility: rewards unbounded above.

Sup-norm arguments fail once wealth can grow without bound.  A weight
kappa(w) = (w + q)^p restores a contraction in the weighted norm, with
modulus alpha * beta < 1 when the return is not explosive.
"""

import numpy as np

from _common import config
from qtdp import auto_weight_linear, build_model, value_upper_bound, recover_value, \
    solve_fixed_point_weighted
from qtdp.weighted_norm import CertificateError

for name in ("linear_savings", "linear_savings_explosive"):
    dp = build_model(config(name)).dp
    print(f"\n{name}")
    try:
        weight, cert = auto_weight_linear(dp, 1.0, 2.0)
    except CertificateError as exc:
        print(f"  no weight found: {exc}")
        continue
    g, rep = solve_fixed_point_weighted(dp, weight, certificate=cert)
    v = recover_value(dp, g)
    print(f"  q = {weight.spec['q']}, alpha = {cert.alpha:.5f}, alpha beta = {cert.modulus:.5f}")
    print(f"  measured modulus {rep.measured_modulus:.4f} in {rep.iterations} iterations")
    print(f"  max v / (d kappa / (1 - alpha beta)) = {np.max(v / value_upper_bound(cert, weight.kappa)):.4f}")
