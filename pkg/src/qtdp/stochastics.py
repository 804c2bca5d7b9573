"""Exogenous randomness: finite Markov chains, shock quadratures, grid kernels."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial.hermite import hermgauss
from numpy.polynomial.legendre import leggauss

from .core import ModelError

DEFAULT_NODES = 11


@dataclass(frozen=True, eq=False)
class MarkovChain:
    """Finite Markov chain with a real value attached to each state."""

    transition: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        P = np.atleast_2d(np.asarray(self.transition, dtype=float))
        v = np.atleast_1d(np.asarray(self.values, dtype=float))
        if P.shape != (v.size, v.size):
            raise ModelError(f"transition shape {P.shape} does not match {v.size} values")
        if (P < 0).any() or np.abs(P.sum(axis=1) - 1).max() > 1e-12:
            raise ModelError("transition rows must be probability vectors")
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.size

    @classmethod
    def constant(cls, value: float = 1.0) -> "MarkovChain":
        return cls(np.ones((1, 1)), np.array([value]))

    def to_dict(self) -> dict:
        return {"transition": self.transition.tolist(), "values": self.values.tolist()}


@dataclass(frozen=True, eq=False)
class ShockQuadrature:
    """Discrete approximation of an iid shock.

    ``nodes`` has shape ``(n,)`` for a scalar shock or ``(n, d)`` for a product
    of ``d`` independent components.
    """

    nodes: np.ndarray
    weights: np.ndarray
    description: str = "discrete"

    def __post_init__(self):
        x = np.asarray(self.nodes, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if x.ndim == 0:
            x = x[None]
        w = np.atleast_1d(w)
        if x.shape[0] != w.size or w.size == 0:
            raise ModelError("nodes and weights must have matching nonzero length")
        if not np.isfinite(x).all():
            raise ModelError("quadrature nodes must be finite")
        if (w < 0).any() or abs(w.sum() - 1) > 1e-12:
            raise ModelError("quadrature weights must be a probability vector")
        object.__setattr__(self, "nodes", x)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.weights.size

    @property
    def dim(self) -> int:
        return 1 if self.nodes.ndim == 1 else self.nodes.shape[1]

    def mean(self) -> np.ndarray | float:
        return self.weights @ self.nodes

    def to_dict(self) -> dict:
        return {"description": self.description, "nodes": self.nodes.tolist(),
                "weights": self.weights.tolist()}


def _normalise(w):
    w = np.asarray(w, dtype=float)
    return w / w.sum()


def normal_quadrature(mu: float, sigma: float, n_nodes: int = DEFAULT_NODES) -> ShockQuadrature:
    """Gauss-Hermite rule for ``N(mu, sigma^2)``."""
    if n_nodes < 1:
        raise ValueError("n_nodes must be at least 1")
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if sigma == 0:
        return ShockQuadrature(np.array([float(mu)]), np.ones(1), "normal")
    t, w = hermgauss(n_nodes)
    return ShockQuadrature(mu + sigma * np.sqrt(2.0) * t, _normalise(w), "normal")


def lognormal_quadrature(mu: float, sigma: float, n_nodes: int = DEFAULT_NODES) -> ShockQuadrature:
    """Gauss-Hermite rule for ``LN(mu, sigma^2)``: nodes ``exp(mu + sigma*sqrt(2)*t)``.

    ``sigma == 0`` gives the degenerate one-point distribution at ``exp(mu)``.
    """
    q = normal_quadrature(mu, sigma, n_nodes)
    return ShockQuadrature(np.exp(q.nodes), q.weights, "lognormal")


def uniform_quadrature(low: float, high: float, n_nodes: int = DEFAULT_NODES) -> ShockQuadrature:
    """Gauss-Legendre rule for ``U(low, high)``."""
    if n_nodes < 1:
        raise ValueError("n_nodes must be at least 1")
    if not high > low:
        raise ValueError("need high > low")
    t, w = leggauss(n_nodes)
    return ShockQuadrature(low + (high - low) * (t + 1) / 2, _normalise(w), "uniform")


def discrete_quadrature(nodes, weights=None) -> ShockQuadrature:
    nodes = np.atleast_1d(np.asarray(nodes, dtype=float))
    if weights is None:
        weights = np.full(nodes.shape[0], 1.0 / nodes.shape[0])
    return ShockQuadrature(nodes, _normalise(weights), "discrete-list")


def constant_shock(value: float = 1.0) -> ShockQuadrature:
    return ShockQuadrature(np.array([float(value)]), np.ones(1), "constant")


def product_quadrature(*quads: ShockQuadrature) -> ShockQuadrature:
    """Independent product of scalar quadratures; nodes have shape ``(n, d)``."""
    if not quads:
        raise ValueError("need at least one quadrature")
    grids = np.meshgrid(*[q.nodes for q in quads], indexing="ij")
    wgrids = np.meshgrid(*[q.weights for q in quads], indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=1)
    weights = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    desc = "product(" + ",".join(q.description for q in quads) + ")"
    return ShockQuadrature(nodes, _normalise(weights), desc)


def quadrature_from_spec(spec: dict | None, default: float = 1.0) -> ShockQuadrature:
    """Build a quadrature from a config entry such as
    ``{"type": "lognormal", "mu": 0, "sigma": 0.1, "n_nodes": 11}``."""
    if spec is None:
        return constant_shock(default)
    kind = spec.get("type", "constant")
    n = int(spec.get("n_nodes", DEFAULT_NODES))
    if kind == "lognormal":
        return lognormal_quadrature(float(spec["mu"]), float(spec["sigma"]), n)
    if kind == "normal":
        return normal_quadrature(float(spec["mu"]), float(spec["sigma"]), n)
    if kind == "uniform":
        return uniform_quadrature(float(spec["low"]), float(spec["high"]), n)
    if kind in ("discrete", "discrete-list"):
        return discrete_quadrature(spec["nodes"], spec.get("weights"))
    if kind == "constant":
        return constant_shock(float(spec.get("value", default)))
    raise ModelError(f"unknown shock type {kind!r}")


# ---------------------------------------------------------------------------
# Grid projection

def _check_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("grid must be a nonempty 1-d array")
    if grid.size > 1 and not (np.diff(grid) > 0).all():
        raise ValueError("grid must be strictly increasing")
    return grid


def project_weights(values, grid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised lottery projection.

    Returns ``(lo, hi, w_hi)``: each value is split into mass ``1 - w_hi`` on
    ``grid[lo]`` and ``w_hi`` on ``grid[hi]``.  Values outside the grid are
    clamped to the nearest endpoint.
    """
    grid = _check_grid(grid)
    v = np.asarray(values, dtype=float)
    if np.isnan(v).any():
        raise ModelError("law of motion produced NaN")
    n = grid.size
    if n == 1:
        z = np.zeros(v.shape, dtype=np.intp)
        return z, z, np.zeros(v.shape)
    vc = np.clip(v, grid[0], grid[-1])
    hi = np.clip(np.searchsorted(grid, vc, side="left"), 1, n - 1)
    lo = hi - 1
    w_hi = (vc - grid[lo]) / (grid[hi] - grid[lo])
    # exact hits on the lower node carry no mass on the upper one
    w_hi = np.clip(w_hi, 0.0, 1.0)
    return lo, hi, w_hi


def project_to_grid(value: float, grid) -> dict[int, float]:
    """Split ``value`` across the bracketing grid points with mean-preserving weights.

    >>> project_to_grid(0.25, [0.0, 1.0])
    {0: 0.75, 1: 0.25}
    """
    lo, hi, w = project_weights(np.array([value]), grid)
    lo, hi, w = int(lo[0]), int(hi[0]), float(w[0])
    out: dict[int, float] = {}
    if 1.0 - w > 0:
        out[lo] = 1.0 - w
    if w > 0:
        out[hi] = out.get(hi, 0.0) + w
    return out


LawOfMotion = Callable[[np.ndarray, np.ndarray, int, int, np.ndarray], np.ndarray]


def compose_kernel(state_grid, action_grid, chain: MarkovChain, shock: ShockQuadrature,
                   law_of_motion: LawOfMotion) -> np.ndarray:
    """Transition kernel on the product grid ``(z, w)``.

    States are ordered z-major: index ``iz * len(state_grid) + iw``.  The law of
    motion is called as ``law_of_motion(w, a, z, z_next, xi)`` with ``w`` of
    shape ``(n_w, 1)``, ``a = action_grid[None, ...]``, integer chain indices
    and one quadrature node ``xi``; it returns next-period endogenous values
    broadcastable to ``(n_w, n_a)``.

    Returns
    -------
    kernel : ndarray, shape (n_z * n_w, n_a, n_z * n_w)
    """
    w_grid = _check_grid(state_grid)
    a_grid = np.asarray(action_grid, dtype=float)
    n_w, n_a, n_z = w_grid.size, a_grid.shape[0], chain.n
    K = np.zeros((n_z * n_w, n_a, n_z * n_w))
    w_col = w_grid[:, None]
    a_row = a_grid[None, ...]
    rows = np.arange(n_w)[:, None]
    cols = np.arange(n_a)[None, :]
    for iz in range(n_z):
        block = K[iz * n_w:(iz + 1) * n_w]
        for jz in range(n_z):
            pz = chain.transition[iz, jz]
            if pz == 0:
                continue
            for xi, pw in zip(shock.nodes, shock.weights):
                if pw == 0:
                    continue
                nxt = np.broadcast_to(law_of_motion(w_col, a_row, iz, jz, xi), (n_w, n_a))
                lo, hi, w_hi = project_weights(nxt, w_grid)
                mass = pz * pw
                np.add.at(block, (rows, cols, jz * n_w + lo), mass * (1 - w_hi))
                np.add.at(block, (rows, cols, jz * n_w + hi), mass * w_hi)
    return K


def law_minimum(state_grid, action_grid, chain: MarkovChain, shock: ShockQuadrature,
                law_of_motion: LawOfMotion) -> np.ndarray:
    """Smallest next-period value over positive-probability ``(z', xi)``, shape ``(n_z * n_w, n_a)``.

    Same calling convention as :func:`compose_kernel`; used to keep next
    states on the grid instead of clamping them.
    """
    w_grid = _check_grid(state_grid)
    a_grid = np.asarray(action_grid, dtype=float)
    n_w, n_a, n_z = w_grid.size, a_grid.shape[0], chain.n
    out = np.full((n_z * n_w, n_a), np.inf)
    for iz in range(n_z):
        block = out[iz * n_w:(iz + 1) * n_w]
        for jz in range(n_z):
            if chain.transition[iz, jz] == 0:
                continue
            for xi, pw in zip(shock.nodes, shock.weights):
                if pw > 0:
                    nxt = np.broadcast_to(law_of_motion(w_grid[:, None], a_grid[None, ...], iz, jz, xi),
                                          (n_w, n_a))
                    np.minimum(block, nxt, out=block)
    return out
