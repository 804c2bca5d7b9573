"""The transformed Bellman operator on action-value functions.

An action-value function ``g`` is stored as a float array of shape
``(n_states, n_actions)``; only entries at feasible pairs are meaningful and
the solvers keep the others at zero.  The operator is

    (S g)(x, a) = beta * E_{x,a} max_{a' feasible at x'} { r(x', a') + g(x', a') }

and is a contraction of modulus ``beta`` in the sup norm over feasible pairs
whenever ``r_bar`` is bounded above and ``r_hat`` bounded below.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import AssumptionError, DynamicProgram, expect, r_bar

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 100_000


@dataclass
class ConvergenceReport:
    """Iteration log of a fixed-point solve."""

    iterations: int
    distances: list[float]
    measured_modulus: float
    certified_error: float
    stop_reason: str
    modulus: float
    norm: str = "sup"
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "iterations": self.iterations,
            "distances": [float(d) for d in self.distances],
            "measured_modulus": float(self.measured_modulus),
            "certified_error": float(self.certified_error),
            "stop_reason": self.stop_reason,
            "modulus": float(self.modulus),
            "norm": self.norm,
        }
        out.update(self.metadata)
        return out


def zeros_like_q(dp: DynamicProgram) -> np.ndarray:
    return np.zeros((dp.n_states, dp.n_actions))


def as_q(dp: DynamicProgram, g) -> np.ndarray:
    """Coerce scalars or tables to an action-value table (infeasible entries zeroed)."""
    g = np.broadcast_to(np.asarray(g, dtype=float), (dp.n_states, dp.n_actions))
    if not np.isfinite(g[dp.feasible]).all():
        raise ValueError("action-value functions must be finite on feasible pairs")
    return np.where(dp.feasible, g, 0.0)


def sup_norm(dp: DynamicProgram, g: np.ndarray) -> float:
    """Sup norm over feasible pairs."""
    return float(np.max(np.abs(g[dp.feasible])))


def require_assumption_one(dp: DynamicProgram) -> None:
    rep = dp.assumption_one
    if not rep.holds:
        raise AssumptionError(
            f"r_bar must be bounded above and r_hat bounded below "
            f"(sup r_bar={rep.sup_rbar}, inf r_hat={rep.inf_rhat})")


def max_reward_plus(dp: DynamicProgram, g: np.ndarray) -> np.ndarray:
    """``M g(x) = max_a {r(x, a) + g(x, a)}``; ``-inf`` where every reward is ``-inf``."""
    return np.where(dp.feasible, dp.reward + g, -np.inf).max(axis=1)


def _to_table(dp: DynamicProgram, pair_values: np.ndarray) -> np.ndarray:
    out = np.zeros((dp.n_states, dp.n_actions))
    out[dp.feasible] = pair_values
    return out


def apply_S(dp: DynamicProgram, g: np.ndarray) -> np.ndarray:
    """One application of the transformed Bellman operator."""
    require_assumption_one(dp)
    m = max_reward_plus(dp, g)
    vals = expect(dp.pair_kernel, m)
    if np.isneginf(vals).any():
        raise AssumptionError("continuation value is -inf at a reachable state")
    return _to_table(dp, dp.beta * vals)


def _measured_modulus(distances, scales) -> float:
    # Ratios of steps near rounding level say nothing about the operator.
    best = 0.0
    for k in range(len(distances) - 1):
        dk = distances[k]
        if dk > 0 and dk >= 1e-3 * max(1.0, scales[k]):
            best = max(best, distances[k + 1] / dk)
    return best


def iterate_to_fixed_point(step: Callable[[np.ndarray], np.ndarray],
                           norm: Callable[[np.ndarray], float],
                           g0: np.ndarray, modulus: float, tol: float, max_iter: int,
                           check: Callable[[np.ndarray, int], None] | None = None,
                           norm_name: str = "sup", metadata: dict | None = None):
    """Plain successive approximation with a contraction-based stopping rule.

    Stops once a step is at most ``tol * (1 - modulus) / modulus``, so that the
    returned iterate is within ``tol`` of the fixed point.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not 0 < modulus < 1:
        raise AssumptionError(f"contraction modulus {modulus} is not in (0, 1)")
    threshold = tol * (1 - modulus) / modulus
    g = g0
    distances: list[float] = []
    scales: list[float] = []
    stop = "max_iter"
    for k in range(max_iter):
        g_new = step(g)
        if check is not None:
            check(g_new, k)
        d = norm(g_new - g)
        distances.append(d)
        scales.append(norm(g_new))
        g = g_new
        if d <= threshold:
            stop = "tolerance"
            break
    last = distances[-1] if distances else 0.0
    report = ConvergenceReport(
        iterations=len(distances),
        distances=distances,
        measured_modulus=_measured_modulus(distances, scales),
        certified_error=modulus * last / (1 - modulus),
        stop_reason=stop,
        modulus=modulus,
        norm=norm_name,
        metadata=dict(metadata or {}),
    )
    log.info("fixed point: %d iterations, last step %.3e, stop=%s",
             report.iterations, last, stop)
    if stop == "max_iter":
        log.warning("max_iter=%d reached before tolerance %.1e", max_iter, tol)
    return g, report


def solve_fixed_point(dp: DynamicProgram, g0=None, tol: float = DEFAULT_TOL,
                      max_iter: int = DEFAULT_MAX_ITER):
    """Iterate ``S`` from ``g0`` (default zero) to its unique bounded fixed point.

    Returns
    -------
    g : ndarray
        Final iterate; within ``tol`` of the fixed point in sup norm when
        ``report.stop_reason == "tolerance"``.
    report : ConvergenceReport
    """
    require_assumption_one(dp)
    g0 = zeros_like_q(dp) if g0 is None else as_q(dp, g0)
    return iterate_to_fixed_point(lambda g: apply_S(dp, g), lambda g: sup_norm(dp, g),
                                  g0, dp.beta, tol, max_iter)


def greedy_policy(dp: DynamicProgram, g: np.ndarray) -> np.ndarray:
    """Per-state action maximising ``r + g``; ties go to the lowest action index."""
    vals = np.where(dp.feasible, dp.reward + g, -np.inf)
    dead = np.isneginf(vals).all(axis=1)
    if dead.any():
        raise AssumptionError(
            f"every feasible action has reward -inf at states {np.flatnonzero(dead)[:10].tolist()}")
    return vals.argmax(axis=1)


def recover_value(dp: DynamicProgram, g: np.ndarray) -> np.ndarray:
    """Value function ``v(x) = max_a {r(x, a) + g(x, a)}`` (may be ``-inf``)."""
    return max_reward_plus(dp, g)


def measure_contraction(dp: DynamicProgram, trials: int = 100, seed: int = 0,
                        operator: Callable | None = None, norm: Callable | None = None,
                        sampler: Callable | None = None) -> float:
    """Largest observed ``||S g1 - S g2|| / ||g1 - g2||`` over random pairs.

    ``operator``, ``norm`` and ``sampler(rng)`` default to the additive
    operator, the sup norm and Gaussian tables with random level shifts.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    require_assumption_one(dp)
    op = operator or (lambda g: apply_S(dp, g))
    nrm = norm or (lambda g: sup_norm(dp, g))
    rng = np.random.default_rng(seed)
    finite = dp.reward[dp.feasible]
    finite = finite[np.isfinite(finite)]
    scale = max(1.0, float(np.max(np.abs(finite))) if finite.size else 1.0)

    def default_sampler(rng):
        return scale * (rng.normal(size=dp.feasible.shape) + rng.normal())

    draw = sampler or default_sampler
    worst = 0.0
    for _ in range(trials):
        g1 = as_q(dp, draw(rng))
        g2 = as_q(dp, draw(rng))
        den = nrm(g1 - g2)
        if den == 0:
            continue
        worst = max(worst, nrm(op(g1) - op(g2)) / den)
    return worst


def policy_reward_and_kernel(dp: DynamicProgram, sigma) -> tuple[np.ndarray, np.ndarray]:
    sigma = np.asarray(sigma, dtype=int)
    states = np.arange(dp.n_states)
    if sigma.shape != (dp.n_states,) or not dp.feasible[states, sigma].all():
        raise ValueError("policy must pick a feasible action at every state")
    return dp.reward[states, sigma], dp.kernel[states, sigma]


def sigma_value(dp: DynamicProgram, sigma, horizon: int) -> tuple[np.ndarray, float]:
    """Discounted reward of following ``sigma`` for periods ``0..horizon``.

    Returns the truncated sum and a bound on the omitted tail,
    ``beta**(horizon+1) * B / (1 - beta)`` with ``B`` the largest finite reward
    magnitude among ``r_bar`` and the policy's own rewards.
    """
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    r_sig, P_sig = policy_reward_and_kernel(dp, sigma)
    v = r_sig.copy()
    for _ in range(horizon):
        v = r_sig + dp.beta * expect(P_sig, v)
    return v, _tail(dp, r_sig, horizon + 1)


def _tail(dp: DynamicProgram, r_sig: np.ndarray, power: int) -> float:
    mags = np.abs(np.concatenate([r_bar(dp), r_sig]))
    mags = mags[np.isfinite(mags)]
    bound = float(mags.max()) if mags.size else 0.0
    return dp.beta ** power * bound / (1 - dp.beta)
