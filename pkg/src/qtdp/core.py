"""Finite dynamic programs: data model, derived reward bounds, serialization.

A :class:`DynamicProgram` lives on finite state and action grids.  Rewards are
extended reals: ``-inf`` is a legal reward (e.g. CRRA utility at zero
consumption), ``+inf`` and ``nan`` are not.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Sequence

import numpy as np

MODEL_VERSION = "qtdp-model-v1"

KERNEL_ATOL = 1e-12


class ModelError(ValueError):
    """Raised when a dynamic program violates its construction invariants."""


class AssumptionError(RuntimeError):
    """Raised when a solver is asked to run on a model without the needed certificate."""


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class DynamicProgram:
    """A discounted decision problem on finite grids.

    Parameters
    ----------
    feasible : (n_states, n_actions) bool array
        ``feasible[x, a]`` is true when action ``a`` is admissible at ``x``.
    reward : (n_states, n_actions) float array
        Flow reward.  ``-inf`` allowed; entries at infeasible pairs are ignored.
    kernel : (n_states, n_actions, n_states) float array
        Transition probabilities; rows at feasible pairs must sum to one.
    beta : float
        Discount factor in (0, 1).
    state_labels, action_labels : optional sequences
        Semantic coordinates, e.g. ``(w, z)`` tuples, used for reporting and by
        routines that need an order on states.
    meta : dict
        Free-form model metadata (builder kind, analytic constants, ...).
    """

    feasible: np.ndarray
    reward: np.ndarray
    kernel: np.ndarray
    beta: float
    state_labels: Sequence[Any] | None = None
    action_labels: Sequence[Any] | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        feasible = np.asarray(self.feasible, dtype=bool)
        reward = np.asarray(self.reward, dtype=float)
        kernel = np.asarray(self.kernel, dtype=float)
        if feasible.ndim != 2:
            raise ModelError("feasible must be a 2-d table")
        n, m = feasible.shape
        if n < 1 or m < 1:
            raise ModelError("need at least one state and one action")
        if reward.shape != (n, m):
            raise ModelError(f"reward has shape {reward.shape}, expected {(n, m)}")
        if kernel.shape != (n, m, n):
            raise ModelError(f"kernel has shape {kernel.shape}, expected {(n, m, n)}")
        if not 0.0 < float(self.beta) < 1.0:
            raise ModelError(f"beta must lie in (0, 1), got {self.beta}")
        if not feasible.any(axis=1).all():
            bad = np.flatnonzero(~feasible.any(axis=1))
            raise ModelError(f"states without a feasible action: {bad[:10].tolist()}")
        r = reward[feasible]
        if np.isnan(r).any():
            raise ModelError("reward contains NaN at a feasible pair")
        if np.isposinf(r).any():
            raise ModelError("reward contains +inf at a feasible pair")
        p = kernel[feasible]
        if not np.isfinite(p).all() or (p < 0).any():
            raise ModelError("kernel entries must be finite and nonnegative")
        err = np.abs(p.sum(axis=1) - 1.0)
        if err.max() > KERNEL_ATOL:
            raise ModelError(f"kernel rows must sum to one (max error {err.max():.3e})")
        if self.state_labels is not None and len(self.state_labels) != n:
            raise ModelError("state_labels length does not match n_states")
        if self.action_labels is not None and len(self.action_labels) != m:
            raise ModelError("action_labels length does not match n_actions")

        # Infeasible rewards are normalised to -inf so that row maxima ignore them.
        reward = np.where(feasible, reward, -np.inf)
        object.__setattr__(self, "feasible", _readonly(feasible))
        object.__setattr__(self, "reward", _readonly(reward))
        object.__setattr__(self, "kernel", _readonly(kernel))
        object.__setattr__(self, "beta", float(self.beta))

    @property
    def n_states(self) -> int:
        return self.feasible.shape[0]

    @property
    def n_actions(self) -> int:
        return self.feasible.shape[1]

    @cached_property
    def pair_index(self) -> tuple[np.ndarray, np.ndarray]:
        """Row-major ``(states, actions)`` index arrays of the feasible pairs."""
        xs, as_ = np.nonzero(self.feasible)
        return _readonly(xs), _readonly(as_)

    @cached_property
    def pair_kernel(self) -> np.ndarray:
        """Kernel rows restricted to feasible pairs, shape ``(n_pairs, n_states)``."""
        return _readonly(self.kernel[self.feasible])

    @property
    def n_pairs(self) -> int:
        return int(self.pair_index[0].size)

    @cached_property
    def assumption_one(self) -> "AssumptionOneReport":
        return check_assumption_one(self)


def feasible_pairs(dp: DynamicProgram) -> list[tuple[int, int]]:
    """All ``(state, action)`` pairs with ``feasible[state, action]`` true, row-major."""
    xs, as_ = dp.pair_index
    return list(zip(xs.tolist(), as_.tolist()))


def expect(probs: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Expectation ``probs @ values`` in extended-real arithmetic.

    Any positive mass on a ``-inf`` value makes the expectation ``-inf``; zero
    mass on ``-inf`` contributes nothing.
    """
    values = np.asarray(values, dtype=float)
    neg = np.isneginf(values)
    if not neg.any():
        return probs @ values
    out = probs @ np.where(neg, 0.0, values)
    hit = (probs[..., neg] > 0).any(axis=-1)
    return np.where(hit, -np.inf, out)


def r_bar(dp: DynamicProgram) -> np.ndarray:
    """Per-state maximal reward ``max_{a feasible} r(x, a)``."""
    return dp.reward.max(axis=1)


def r_hat(dp: DynamicProgram) -> np.ndarray:
    """Expected next-period maximal reward, as an ``(n_states, n_actions)`` table.

    Infeasible entries are ``nan``.
    """
    out = np.full(dp.feasible.shape, np.nan)
    out[dp.feasible] = expect(dp.pair_kernel, r_bar(dp))
    return out


@dataclass(frozen=True)
class AssumptionOneReport:
    sup_rbar: float
    inf_rhat: float
    holds: bool

    def to_dict(self) -> dict:
        return {"sup_rbar": _enc(self.sup_rbar), "inf_rhat": _enc(self.inf_rhat), "holds": self.holds}


def check_assumption_one(dp: DynamicProgram) -> AssumptionOneReport:
    """``r_bar`` bounded above and ``r_hat`` bounded below on the grid."""
    sup_rbar = float(r_bar(dp).max())
    inf_rhat = float(np.min(r_hat(dp)[dp.feasible]))
    holds = np.isfinite(sup_rbar) and np.isfinite(inf_rhat)
    return AssumptionOneReport(sup_rbar, inf_rhat, bool(holds))


# ---------------------------------------------------------------------------
# JSON serialization

def _enc(v: float):
    if np.isneginf(v):
        return "-inf"
    if np.isposinf(v):
        return "inf"
    return float(v)


def _dec(v) -> float:
    if isinstance(v, str):
        return float(v)
    return float(v)


def _label(v):
    if isinstance(v, (tuple, list)):
        return [_label(u) for u in v]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    return v


def to_json_dict(dp: DynamicProgram, exogenous: dict | None = None) -> dict:
    doc = {
        "version": MODEL_VERSION,
        "n_states": dp.n_states,
        "n_actions": dp.n_actions,
        "beta": dp.beta,
        "feasible": dp.feasible.astype(int).ravel().tolist(),
        "reward": [_enc(v) if f else "-inf" for v, f in zip(dp.reward.ravel(), dp.feasible.ravel())],
        "kernel": dp.kernel.ravel().tolist(),
    }
    if dp.state_labels is not None:
        doc["state_labels"] = [_label(s) for s in dp.state_labels]
    if dp.action_labels is not None:
        doc["action_labels"] = [_label(s) for s in dp.action_labels]
    if exogenous:
        doc["exogenous"] = exogenous
    return doc


def from_json_dict(doc: dict) -> DynamicProgram:
    if doc.get("version") != MODEL_VERSION:
        raise ModelError(f"unsupported model version {doc.get('version')!r}")
    n, m = int(doc["n_states"]), int(doc["n_actions"])
    feasible = np.asarray(doc["feasible"], dtype=int).reshape(n, m).astype(bool)
    reward = np.array([_dec(v) for v in np.ravel(np.asarray(doc["reward"], dtype=object))]).reshape(n, m)
    kernel = np.asarray(doc["kernel"], dtype=float).reshape(n, m, n)

    def labels(key):
        raw = doc.get(key)
        if raw is None:
            return None
        return [tuple(v) if isinstance(v, list) else v for v in raw]

    return DynamicProgram(feasible, reward, kernel, doc["beta"],
                          labels("state_labels"), labels("action_labels"))


def save_model(dp: DynamicProgram, path, exogenous: dict | None = None) -> None:
    with open(path, "w") as fh:
        json.dump(to_json_dict(dp, exogenous), fh)


def load_model(path) -> DynamicProgram:
    with open(path) as fh:
        return from_json_dict(json.load(fh))
