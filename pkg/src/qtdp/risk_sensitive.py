"""Risk-sensitive (entropic) preferences.

Continuation values are aggregated by the certainty equivalent

    W v(x, a) = -(beta / gamma) * log E_{x,a} exp(-gamma * v(x'))

and the transformed operator is ``S = W M`` with ``M g(x) = max_a {r + g}``.
In the sup norm ``S`` contracts with modulus ``beta``; with a weight ``kappa``
it contracts with modulus ``alpha * beta`` on action-value functions that are
increasing in the state, provided rewards, feasibility and the kernel are
monotone in the state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import AssumptionError, AssumptionOneReport, DynamicProgram, r_bar
from .q_transform import (DEFAULT_MAX_ITER, DEFAULT_TOL, _to_table, as_q, iterate_to_fixed_point,
                          max_reward_plus, policy_reward_and_kernel, sup_norm, zeros_like_q)
from .weighted_norm import _kappa, kappa_norm, require_certificate


@dataclass(frozen=True)
class RiskParams:
    gamma: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("risk-sensitivity gamma must be positive")


def _gamma(params) -> float:
    return params.gamma if isinstance(params, RiskParams) else RiskParams(float(params)).gamma


def entropic_expectation(dist, values, gamma: float, beta: float = 1.0):
    """``-(beta/gamma) * log sum_i dist_i * exp(-gamma * values_i)``.

    ``dist`` may be a probability vector or a matrix of row distributions.
    The largest exponent on each row's support is factored out and the sum
    is formed as ``log1p(mean(expm1(.)))``, which keeps small ``gamma`` and
    constant shifts accurate.  Positive mass on ``-inf`` gives ``-inf``.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    P = np.asarray(dist, dtype=float)
    vector = P.ndim == 1
    P = np.atleast_2d(P)
    v = np.asarray(values, dtype=float)
    support = P > 0
    neg = np.isneginf(v)
    dead = (support & neg[None, :]).any(axis=1)
    s = np.where(neg, 0.0, -gamma * v)
    s_max = np.where(support, s[None, :], -np.inf).max(axis=1)
    shifted = np.where(support, np.expm1(np.minimum(s[None, :] - s_max[:, None], 0.0)), 0.0)
    mass = P.sum(axis=1)
    log_mean = np.log1p((P * shifted).sum(axis=1) / mass)
    out = -(beta / gamma) * (s_max + log_mean)
    out = np.where(dead, -np.inf, out)
    return float(out[0]) if vector else out


def apply_W(dp: DynamicProgram, h, params) -> np.ndarray:
    """Certainty-equivalent operator on a per-state function, as a state-action table."""
    vals = entropic_expectation(dp.pair_kernel, h, _gamma(params), dp.beta)
    return _to_table(dp, vals)


def r_hat_rs(dp: DynamicProgram, params) -> np.ndarray:
    """``-(1/gamma) log E_{x,a} exp(-gamma r_bar(x'))`` on feasible pairs (``nan`` elsewhere)."""
    out = np.full(dp.feasible.shape, np.nan)
    out[dp.feasible] = entropic_expectation(dp.pair_kernel, r_bar(dp), _gamma(params), 1.0)
    return out


def check_assumption_one_rs(dp: DynamicProgram, params) -> AssumptionOneReport:
    sup_rbar = float(r_bar(dp).max())
    inf_rhat = float(np.min(r_hat_rs(dp, params)[dp.feasible]))
    return AssumptionOneReport(sup_rbar, inf_rhat, bool(np.isfinite(sup_rbar) and np.isfinite(inf_rhat)))


def _require_rs(dp, params):
    rep = check_assumption_one_rs(dp, params)
    if not rep.holds:
        raise AssumptionError(f"risk-sensitive r_hat is not bounded below (inf={rep.inf_rhat})")


def apply_S_rs(dp: DynamicProgram, g: np.ndarray, params) -> np.ndarray:
    """Risk-sensitive transformed Bellman operator ``W M g``."""
    m = max_reward_plus(dp, g)
    vals = entropic_expectation(dp.pair_kernel, m, _gamma(params), dp.beta)
    if np.isneginf(vals).any():
        raise AssumptionError("continuation value is -inf at a reachable state")
    return _to_table(dp, vals)


# ---------------------------------------------------------------------------
# Order structure

def _coords(dp: DynamicProgram) -> np.ndarray:
    if dp.state_labels is None:
        return np.arange(dp.n_states, dtype=float)[:, None]
    rows = [np.atleast_1d(np.asarray(s, dtype=float)) for s in dp.state_labels]
    X = np.vstack(rows)
    cols = dp.meta.get("order_coordinates")
    return X if cols is None else X[:, list(cols)]


def successor_pairs(dp: DynamicProgram) -> np.ndarray:
    """Pairs ``(i, j)`` with ``x_i <= x_j`` one grid step apart in one coordinate.

    States are compared in the coordinatewise (product) order of their
    labels; on a product grid these pairs generate the whole order.
    """
    X = _coords(dp)
    pairs = []
    for c in range(X.shape[1]):
        others = np.delete(X, c, axis=1)
        keys = {}
        for i, row in enumerate(map(tuple, others)):
            keys.setdefault(row, []).append(i)
        for members in keys.values():
            members = sorted(members, key=lambda i: X[i, c])
            for a, b in zip(members, members[1:]):
                if X[b, c] > X[a, c]:
                    pairs.append((a, b))
    return np.array(pairs, dtype=int).reshape(-1, 2)


def _upper_set_matrix(dp: DynamicProgram) -> np.ndarray:
    X = _coords(dp)
    # U[y, x'] = 1 when x' >= y coordinatewise
    return (X[None, :, :] >= X[:, None, :]).all(axis=2).astype(float)


@dataclass
class MonotoneStructure:
    """Outcome of the monotonicity checks behind the weighted risk-sensitive solver."""

    reward_increasing: bool
    kernel_monotone: bool
    feasibility_nested: bool
    n_coordinates: int
    details: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.reward_increasing and self.kernel_monotone and self.feasibility_nested

    def to_dict(self) -> dict:
        out = {"reward_increasing": self.reward_increasing,
               "kernel_monotone": self.kernel_monotone,
               "feasibility_nested": self.feasibility_nested,
               "holds": self.holds,
               "upper_sets": "all" if self.n_coordinates == 1 else "principal"}
        out.update(self.details)
        return out


def verify_monotone_assumptions(dp: DynamicProgram, atol: float = 1e-12) -> MonotoneStructure:
    """Check reward monotonicity, nested feasibility and stochastic monotonicity on the grid.

    For a single ordered coordinate the kernel check is exact first-order
    dominance; with several coordinates only principal upper sets are tested.
    """
    pairs = successor_pairs(dp)
    F, R = dp.feasible, dp.reward
    nested = True
    rew = True
    kern = True
    bad = {}
    if pairs.size:
        lo, hi = pairs[:, 0], pairs[:, 1]
        nested = bool(np.all(~F[lo] | F[hi]))
        both = F[lo] & F[hi]
        rew = bool(np.all(~both | (R[hi] >= R[lo])))
        U = _upper_set_matrix(dp)
        surv = dp.kernel @ U.T          # (n, m, n): mass on each principal upper set
        gap = surv[hi] - surv[lo]        # (pairs, m, n)
        gap = np.where(both[:, :, None], gap, 0.0)
        worst = float(gap.min()) if gap.size else 0.0
        kern = worst >= -atol
        bad["worst_dominance_gap"] = worst
    bad["n_successor_pairs"] = int(pairs.shape[0])
    return MonotoneStructure(rew, kern, nested, _coords(dp).shape[1], bad)


def is_increasing_in_state(dp: DynamicProgram, g: np.ndarray, rtol: float = 1e-10) -> bool:
    pairs = successor_pairs(dp)
    if not pairs.size:
        return True
    lo, hi = pairs[:, 0], pairs[:, 1]
    both = dp.feasible[lo] & dp.feasible[hi]
    slack = rtol * max(1.0, float(np.max(np.abs(g[dp.feasible]))))
    return bool(np.all(~both | (g[hi] >= g[lo] - slack)))


def solve_fixed_point_rs(dp: DynamicProgram, params, kappa=None, g0=None,
                         tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                         certificate=None):
    """Fixed point of the risk-sensitive operator.

    Without ``kappa``: sup-norm iteration with modulus ``beta``.  With
    ``kappa``: the weighted certificate and the monotone structure must hold,
    distances are measured in the ``kappa`` norm with modulus ``alpha*beta``,
    and every iterate must stay increasing in the state (an error otherwise).
    """
    gamma = _gamma(params)
    _require_rs(dp, gamma)
    g0 = zeros_like_q(dp) if g0 is None else as_q(dp, g0)
    meta = {"gamma": gamma}
    step = lambda g: apply_S_rs(dp, g, gamma)  # noqa: E731
    if kappa is None:
        return iterate_to_fixed_point(step, lambda g: sup_norm(dp, g), g0, dp.beta, tol,
                                      max_iter, metadata=meta)
    cert = require_certificate(dp, kappa, certificate)
    structure = verify_monotone_assumptions(dp)
    if not structure.holds:
        raise AssumptionError(f"monotone structure fails: {structure.to_dict()}")
    if not is_increasing_in_state(dp, g0):
        raise AssumptionError("initial guess is not increasing in the state")

    def check(g, k):
        if not is_increasing_in_state(dp, g):
            raise AssumptionError(f"iterate {k} left the class of increasing functions")

    k = _kappa(kappa)
    meta.update(alpha=cert.alpha, d=cert.d)
    return iterate_to_fixed_point(step, lambda g: kappa_norm(g, k, dp.feasible), g0,
                                  cert.modulus, tol, max_iter, check=check,
                                  norm_name="kappa", metadata=meta)


def sigma_value_rs(dp: DynamicProgram, sigma, params, horizon: int) -> tuple[np.ndarray, float]:
    """``T_sigma^horizon r_bar`` with ``T_sigma v = r_sigma + W v`` along ``sigma``.

    The tail bound is ``beta**horizon * ||T_sigma r_bar - r_bar|| / (1 - beta)``.
    """
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    gamma = _gamma(params)
    r_sig, P_sig = policy_reward_and_kernel(dp, sigma)

    def T(v):
        return r_sig + entropic_expectation(P_sig, v, gamma, dp.beta)

    rb = r_bar(dp)
    step = T(rb) - rb
    step = step[np.isfinite(step)]
    ell = float(np.max(np.abs(step))) if step.size else 0.0
    v = rb.copy()
    for _ in range(horizon):
        v = T(v)
    return v, dp.beta ** horizon * ell / (1 - dp.beta)
