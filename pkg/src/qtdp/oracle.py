"""Independent references for checking the solvers.

Nothing here calls the operator code in :mod:`qtdp.q_transform`; expectations
and maxima are recomputed from the raw kernel so that agreement is evidence.
"""

from __future__ import annotations

import itertools
from typing import Callable, Iterator

import numpy as np
from scipy.optimize import minimize_scalar

from .core import DynamicProgram

NEG_FLOOR = -1e15
ENUMERATION_LIMIT = 10 ** 6


def truncated_bellman(dp: DynamicProgram, horizon: int, floor: float = NEG_FLOOR
                      ) -> tuple[np.ndarray, float]:
    """Backward induction ``v_{k+1} = max_a {r + beta P v_k}`` from ``v_0 = 0``.

    ``-inf`` rewards are clipped to ``floor``.  Returns ``v_horizon`` and the
    bound ``beta**horizon * max|r_bar| / (1 - beta)`` on its distance to the
    infinite-horizon value.
    """
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    r = np.where(dp.feasible, np.maximum(dp.reward, floor), np.nan)
    v = np.zeros(dp.n_states)
    for _ in range(horizon):
        cont = np.tensordot(dp.kernel, v, axes=([2], [0]))
        v = np.nanmax(r + dp.beta * cont, axis=1)
    rb = dp.reward.max(axis=1)
    rb = rb[np.isfinite(rb)]
    tail = dp.beta ** horizon * (float(np.max(np.abs(rb))) if rb.size else 0.0) / (1 - dp.beta)
    return v, tail


def policy_count(dp: DynamicProgram) -> int:
    return int(np.prod([int(n) for n in dp.feasible.sum(axis=1)], dtype=object))


def enumerate_policies(dp: DynamicProgram, limit: int = ENUMERATION_LIMIT) -> Iterator[np.ndarray]:
    """Yield every stationary feasible policy in lexicographic order."""
    if policy_count(dp) > limit:
        raise ValueError(f"{policy_count(dp)} policies exceed the enumeration limit {limit}")
    choices = [np.flatnonzero(row) for row in dp.feasible]
    for combo in itertools.product(*choices):
        yield np.array(combo, dtype=int)


def policy_value_exact(dp: DynamicProgram, sigma) -> np.ndarray:
    """Solve ``(I - beta P_sigma) v = r_sigma`` for a policy with finite rewards."""
    sigma = np.asarray(sigma, dtype=int)
    idx = np.arange(dp.n_states)
    r = dp.reward[idx, sigma]
    if not np.isfinite(r).all():
        raise ValueError("exact policy evaluation needs finite rewards")
    A = np.eye(dp.n_states) - dp.beta * dp.kernel[idx, sigma]
    return np.linalg.solve(A, r)


def cake_eating_closed_form(beta: float, R: float, w_grid) -> tuple[np.ndarray, np.ndarray]:
    """Log-utility cake eating with ``w' = R (w - c)``.

    ``v(w) = log((1-beta) w)/(1-beta) + beta log(beta R)/(1-beta)^2`` and
    ``c(w) = (1-beta) w``.
    """
    if not 0 < beta < 1 or R <= 0:
        raise ValueError("need 0 < beta < 1 and R > 0")
    w = np.asarray(w_grid, dtype=float)
    v = np.log((1 - beta) * w) / (1 - beta) + beta * np.log(beta * R) / (1 - beta) ** 2
    return v, (1 - beta) * w


def cake_eating_residual(beta: float, R: float, w_grid) -> float:
    """Max gap between the closed form and ``max_c {log c + beta v(R(w - c))}``."""
    def v(w):
        return cake_eating_closed_form(beta, R, np.atleast_1d(w))[0][0]

    gaps = []
    for w in np.asarray(w_grid, dtype=float):
        res = minimize_scalar(lambda c: -(np.log(c) + beta * v(R * (w - c))),
                              bounds=(1e-12 * w, w * (1 - 1e-12)), method="bounded",
                              options={"xatol": 1e-14 * w})
        gaps.append(abs(-res.fun - v(w)))
    return float(max(gaps))


def reservation_value(u: Callable, beta: float, wage_nodes, wage_weights, outside_option: float,
                      tol: float = 1e-12) -> float:
    """Scalar fixed point ``h = beta * sum_i p_i max{u(w_i)/(1-beta), u(c) + h}`` by bisection."""
    A = np.array([u(w) for w in np.atleast_1d(wage_nodes)]) / (1 - beta)
    p = np.asarray(wage_weights, dtype=float)
    uc = u(outside_option)

    def f(h):
        return beta * p @ np.maximum(A, uc + h) - h

    scale = (abs(uc) + np.max(np.abs(A))) / (1 - beta) + 1.0
    lo, hi = -scale, scale
    for _ in range(60):
        if f(lo) >= 0 >= f(hi):
            break
        lo, hi = 2 * lo, 2 * hi
    else:
        raise ValueError("could not bracket the reservation value")
    while hi - lo > tol * max(1.0, abs(lo)):
        mid = 0.5 * (lo + hi)
        if f(mid) >= 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def reservation_wage(u: Callable, beta: float, wage_nodes, wage_weights, outside_option: float) -> float:
    """Smallest wage node at which accepting weakly beats continuing (``inf`` if none)."""
    h = reservation_value(u, beta, wage_nodes, wage_weights, outside_option)
    nodes = np.sort(np.atleast_1d(np.asarray(wage_nodes, dtype=float)))
    accept = [w for w in nodes if u(w) / (1 - beta) >= u(outside_option) + h]
    return float(accept[0]) if accept else float("inf")


def excluded_value(transition, income_nodes, income_weights, u: Callable, beta: float) -> np.ndarray:
    """Lifetime utility of consuming income forever, solved as one linear system.

    ``income_nodes[z, j]`` is income in chain state ``z`` at shock node ``j``.
    Returns ``v[z, j]`` solving ``v = u(y) + beta * E_z v(y', z')``.
    """
    Pz = np.atleast_2d(np.asarray(transition, dtype=float))
    Y = np.atleast_2d(np.asarray(income_nodes, dtype=float))
    p = np.asarray(income_weights, dtype=float)
    nz, nj = Y.shape
    n = nz * nj
    T = np.zeros((n, n))
    for z in range(nz):
        for j in range(nj):
            for z2 in range(nz):
                for j2 in range(nj):
                    T[z * nj + j, z2 * nj + j2] = Pz[z, z2] * p[j2]
    uy = np.array([u(y) for y in Y.ravel()])
    return np.linalg.solve(np.eye(n) - beta * T, uy).reshape(nz, nj)


def enumeration_check(dp: DynamicProgram, v_star, sigma_star, horizon: int,
                      limit: int = ENUMERATION_LIMIT, floor: float = NEG_FLOOR) -> dict:
    """Brute-force optimality check over all stationary policies.

    Each policy is evaluated for ``horizon + 1`` periods with ``-inf`` rewards
    clipped to ``floor``.  Returns the largest gap between the pointwise best
    truncated value and ``v_star``, the gap for ``sigma_star`` alone, and the
    truncation bound ``beta**(horizon+1) * M / (1 - beta)`` with ``M`` the
    largest finite reward magnitude.
    """
    r = np.where(dp.feasible, np.maximum(dp.reward, floor), np.nan)
    idx = np.arange(dp.n_states)

    def value(sigma):
        rs, P = r[idx, sigma], dp.kernel[idx, sigma]
        v = rs.copy()
        for _ in range(horizon):
            v = rs + dp.beta * (P @ v)
        return v

    best = np.full(dp.n_states, -np.inf)
    n = 0
    for sigma in enumerate_policies(dp, limit):
        best = np.maximum(best, value(sigma))
        n += 1
    v_star = np.asarray(v_star, dtype=float)
    mask = np.isfinite(v_star)
    finite = dp.reward[dp.feasible]
    finite = finite[np.isfinite(finite)]
    M = float(np.max(np.abs(finite))) if finite.size else 0.0
    return {"discrepancy": float(np.max(np.abs(best[mask] - v_star[mask]))),
            "greedy_gap": float(np.max(np.abs(value(np.asarray(sigma_star))[mask] - best[mask]))),
            "tail": dp.beta ** (horizon + 1) * M / (1 - dp.beta), "evaluated": n}


def cake_eating_params(config) -> float | None:
    """Gross return ``R`` if ``config`` is deterministic log-utility cake eating, else ``None``."""
    u = config.utility or {}
    log_u = u.get("type") == "log" or (u.get("type", "crra") == "crra" and float(u.get("gamma", 1.0)) == 1.0)
    chain = config.chain
    zero_income = chain is not None and len(chain["values"]) == 1 and float(chain["values"][0]) == 0.0
    shocks = config.shocks or {}
    income = shocks.get("income")
    ret = shocks.get("return")
    deterministic = (income is None or income.get("type") == "constant") and \
        (ret is None or ret.get("type") == "constant")
    if config.kind != "savings" or not log_u or not zero_income or not deterministic:
        return None
    if ret is not None:
        return float(ret.get("value", config.extras.get("R", 1.0)))
    return float(config.extras.get("R", 1.0))


def cake_eating_comparison(dp: DynamicProgram, v, sigma, R: float) -> dict:
    """Grid distance between a solved cake-eating model and the closed form.

    Policy error is measured in consumption-grid steps between the chosen
    node and ``(1-beta) w``; value error is divided by the local grid error,
    the one-cell variation ``|v(w_{i+1}) - v(w_i)|`` of the closed form.
    """
    w = np.array([s[0] if isinstance(s, (tuple, list)) else s for s in dp.state_labels], dtype=float)
    c = np.array([a[0] if isinstance(a, (tuple, list)) else a for a in dp.action_labels], dtype=float)
    vc, cc = cake_eating_closed_form(dp.beta, R, w)
    order = np.argsort(w)
    local = np.empty_like(w)
    dv = np.abs(np.diff(vc[order]))
    local[order] = np.r_[dv, dv[-1]]
    steps = np.abs(np.asarray(sigma) - np.interp(cc, c, np.arange(c.size)))
    err = np.abs(np.asarray(v) - vc)
    ratio = err / local
    return {"max_policy_steps": float(steps.max()), "max_value_ratio": float(ratio.max()),
            "max_value_error": float(err.max()), "R": R, "beta": dp.beta}
