"""Builders for the example applications.

Every builder takes a config (a :class:`ModelConfig` or the equivalent dict
read from a ``qtdp-config-v1`` JSON file) and returns a
:class:`~qtdp.core.DynamicProgram`.  Exogenous states are ordered z-major.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .core import DynamicProgram, ModelError
from .risk_sensitive import RiskParams
from .stochastics import (MarkovChain, ShockQuadrature, compose_kernel, law_minimum,
                          product_quadrature, quadrature_from_spec)
from .weighted_norm import WeightFunction

CONFIG_VERSION = "qtdp-config-v1"
KINDS = ("savings", "default", "job_search", "savings_labor", "portfolio", "rs_growth")


class ConfigError(ValueError):
    pass


@dataclass
class CrraUtility:
    """``c**(1-gamma)/(1-gamma)``, ``log c`` at ``gamma == 1``; ``u(0) = -inf`` when ``gamma >= 1``."""

    gamma_u: float

    def __post_init__(self):
        if not self.gamma_u > 0:
            raise ConfigError("CRRA coefficient must be positive")

    @property
    def bounded_below_at_zero(self) -> bool:
        return self.gamma_u < 1

    def __call__(self, c):
        c = np.asarray(c, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.gamma_u == 1:
                out = np.log(c)
            else:
                out = c ** (1 - self.gamma_u) / (1 - self.gamma_u)
        out = np.where(c > 0, out, -np.inf if self.gamma_u >= 1 else 0.0)
        out = np.where(c < 0, -np.inf, out)
        return out if out.ndim else float(out)


@dataclass
class LinearUtility:
    """``u(c) = slope * c``; unbounded above, used for the weighted-norm example."""

    slope: float = 1.0
    bounded_below_at_zero = True

    def __call__(self, c):
        c = np.asarray(c, dtype=float)
        out = np.where(c < 0, -np.inf, self.slope * c)
        return out if out.ndim else float(out)


def utility_from_spec(spec: dict | None):
    spec = spec or {}
    kind = spec.get("type", "crra")
    if kind == "crra":
        return CrraUtility(float(spec.get("gamma", 1.0)))
    if kind == "log":
        return CrraUtility(1.0)
    if kind == "linear":
        return LinearUtility(float(spec.get("slope", 1.0)))
    raise ConfigError(f"unknown utility type {kind!r}")


@dataclass
class ModelConfig:
    kind: str
    beta: float
    utility: dict = field(default_factory=dict)
    grids: dict = field(default_factory=dict)
    chain: dict | None = None
    shocks: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)
    solver: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown model kind {self.kind!r}; expected one of {KINDS}")
        if not 0 < float(self.beta) < 1:
            raise ConfigError("beta must lie in (0, 1)")

    @classmethod
    def from_dict(cls, doc: dict) -> "ModelConfig":
        if doc.get("version", CONFIG_VERSION) != CONFIG_VERSION:
            raise ConfigError(f"unsupported config version {doc.get('version')!r}")
        try:
            return cls(kind=doc["kind"], beta=float(doc["beta"]), utility=doc.get("utility", {}),
                       grids=doc.get("grids", {}), chain=doc.get("chain"),
                       shocks=doc.get("shocks", {}), extras=doc.get("extras", {}),
                       solver=doc.get("solver"))
        except KeyError as exc:
            raise ConfigError(f"missing config field {exc}") from None

    def to_dict(self) -> dict:
        out = {"version": CONFIG_VERSION, "kind": self.kind, "beta": self.beta,
               "utility": self.utility, "grids": self.grids, "chain": self.chain,
               "shocks": self.shocks, "extras": self.extras}
        if self.solver:
            out["solver"] = self.solver
        return out


def load_config(path) -> ModelConfig:
    with open(path) as fh:
        return ModelConfig.from_dict(json.load(fh))


def _cfg(config) -> ModelConfig:
    return config if isinstance(config, ModelConfig) else ModelConfig.from_dict(config)


def make_grid(spec) -> np.ndarray:
    """``{"values": [...]}`` or ``{"min", "max", "n", "spacing": "linear"|"log"}``."""
    if spec is None:
        raise ConfigError("missing grid specification")
    if isinstance(spec, (list, tuple)):
        spec = {"values": spec}
    if "values" in spec:
        g = np.unique(np.asarray(spec["values"], dtype=float))
    else:
        lo, hi, n = float(spec["min"]), float(spec["max"]), int(spec["n"])
        if n < 2 or not hi > lo:
            raise ConfigError("continuous grids need n >= 2 and max > min")
        if spec.get("spacing", "linear") == "log":
            if lo <= 0:
                raise ConfigError("log-spaced grids need a positive minimum")
            g = np.geomspace(lo, hi, n)
        else:
            g = np.linspace(lo, hi, n)
    return g


def chain_from_spec(spec) -> MarkovChain:
    if spec is None:
        return MarkovChain.constant(1.0)
    return MarkovChain(np.asarray(spec["transition"], dtype=float),
                       np.asarray(spec["values"], dtype=float))


def _consumption_grid(grids: dict, w_grid: np.ndarray, u, extra=()) -> np.ndarray:
    if "c" in grids:
        return make_grid(grids["c"])
    pos = w_grid[w_grid > 0]
    floor = float(grids.get("c_floor_frac", 1e-3)) * (pos.min() if pos.size else 1.0)
    vals = [floor, *pos, *extra]
    if u.bounded_below_at_zero or (w_grid <= 0).any():
        vals.append(0.0)
    return np.unique(np.asarray(vals, dtype=float))


def _feasible_leq(a, b):
    return a <= b + 1e-12 * np.maximum(1.0, np.abs(b))


def _lower_boundary(grids: dict, feasible, w, c, chain, shock, law):
    """``grids.lower``: ``"clamp"`` (default) projects low next states onto ``w[0]``;
    ``"restrict"`` drops actions that could leave the grid from below."""
    mode = grids.get("lower", "clamp")
    if mode == "clamp":
        return feasible
    if mode != "restrict":
        raise ConfigError(f"grids.lower must be 'clamp' or 'restrict', got {mode!r}")
    low = law_minimum(w, c, chain, shock, law)
    return feasible & (low >= w[0] - 1e-12 * max(1.0, abs(w[0])))


@dataclass
class BuiltModel:
    dp: DynamicProgram
    config: ModelConfig
    risk: RiskParams | None = None
    kappa: WeightFunction | None = None
    exogenous: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Optimal savings

def _savings_shock(cfg: ModelConfig) -> ShockQuadrature:
    income = quadrature_from_spec(cfg.shocks.get("income"), 1.0)
    ret = quadrature_from_spec(cfg.shocks.get("return"), float(cfg.extras.get("R", 1.0)))
    return product_quadrature(income, ret)


def _income_stats(chain: MarkovChain, income: ShockQuadrature, ret: ShockQuadrature) -> dict:
    mean_y = chain.transition @ chain.values * float(income.mean())
    return {"mean_return": float(ret.mean()), "max_mean_income": float(mean_y.max()),
            "min_income": float(chain.values.min() * income.nodes.min())}


def build_optimal_savings(config) -> DynamicProgram:
    """State ``(w, z)``, action consumption ``c <= w``, ``w' = R'(w - c) + y'``.

    Income is ``y' = chain.values[z'] * xi_y`` and the gross return ``R'`` is
    an iid draw (``shocks.return``; constant ``extras.R`` by default).
    """
    cfg = _cfg(config)
    u = utility_from_spec(cfg.utility)
    w = make_grid(cfg.grids.get("w"))
    c = _consumption_grid(cfg.grids, w, u)
    chain = chain_from_spec(cfg.chain)
    shock = _savings_shock(cfg)

    def law(w_, a, z, z_next, xi):
        return xi[1] * (w_ - a) + chain.values[z_next] * xi[0]

    K = compose_kernel(w, c, chain, shock, law)
    nz, nw = chain.n, w.size
    W = np.tile(w, nz)
    feasible = _feasible_leq(c[None, :], W[:, None])
    feasible = _lower_boundary(cfg.grids, feasible, w, c, chain, shock, law)
    reward = np.broadcast_to(u(c)[None, :], feasible.shape)
    labels = [(float(wi), iz) for iz in range(nz) for wi in w]
    income = quadrature_from_spec(cfg.shocks.get("income"), 1.0)
    ret = quadrature_from_spec(cfg.shocks.get("return"), float(cfg.extras.get("R", 1.0)))
    meta = {"kind": "savings", "wealth_coordinate": 0, "order_coordinates": [0],
            **_income_stats(chain, income, ret)}
    return DynamicProgram(feasible, reward, K, cfg.beta, labels, [float(x) for x in c], meta)


# ---------------------------------------------------------------------------
# Optimal default

def build_optimal_default(config) -> DynamicProgram:
    """Sovereign default with permanent exclusion.

    Active states ``(w, y, z)`` come first (z-major, then income node, then
    asset), followed by excluded states ``(y, z)``.  Action 0 is default
    (and the only action when excluded); action ``1 + j`` repays and picks
    next assets ``w_grid[j]``.
    """
    cfg = _cfg(config)
    u = utility_from_spec(cfg.utility)
    b = float(cfg.extras.get("b", 0.0))
    R = float(cfg.extras.get("R", 1.0))
    if b <= 0 or R <= 0:
        raise ConfigError("default model needs b > 0 and R > 0")
    w = make_grid(cfg.grids.get("w"))
    if w.min() < -b - 1e-12:
        raise ConfigError("asset grid must not go below -b")
    chain = chain_from_spec(cfg.chain)
    inc = quadrature_from_spec(cfg.shocks.get("income"), 1.0)
    Y = chain.values[:, None] * inc.nodes[None, :]          # (nz, ny)
    if (Y <= 0).any():
        raise ConfigError("income nodes must be positive")
    nz, ny, nw = chain.n, inc.n, w.size
    n_act, n_exc = nz * ny * nw, nz * ny
    n, m = n_act + n_exc, 1 + nw

    def act(z, j, i):
        return (z * ny + j) * nw + i

    def exc(z, j):
        return n_act + z * ny + j

    feasible = np.zeros((n, m), dtype=bool)
    reward = np.full((n, m), -np.inf)
    K = np.zeros((n, m, n))
    labels: list[Any] = [None] * n
    for z in range(nz):
        # next-period income/chain distribution, shared by every row in z
        nxt = np.array([chain.transition[z, z2] * inc.weights[j2]
                        for z2 in range(nz) for j2 in range(ny)])
        for j in range(ny):
            y = Y[z, j]
            e = exc(z, j)
            labels[e] = ("excluded", 0.0, float(y), z)
            feasible[e, 0] = True
            reward[e, 0] = u(y)
            K[e, 0, n_act:] = nxt
            for i in range(nw):
                s = act(z, j, i)
                labels[s] = ("active", float(w[i]), float(y), z)
                feasible[s, 0] = True
                reward[s, 0] = u(y)
                K[s, 0, n_act:] = nxt
                ok = _feasible_leq(w, R * (w[i] + y))
                feasible[s, 1:] = ok
                reward[s, 1:] = np.where(ok, u(np.maximum(w[i] + y - w / R, 0.0)), -np.inf)
                for i2 in np.flatnonzero(ok):
                    cols = [act(z2, j2, i2) for z2 in range(nz) for j2 in range(ny)]
                    K[s, 1 + i2, cols] = nxt
    actions = [("default",)] + [("repay", float(x)) for x in w]
    meta = {"kind": "default", "n_active": n_act, "n_w": nw, "n_y": ny, "n_z": nz,
            "income_nodes": Y.tolist(), "income_weights": inc.weights.tolist()}
    return DynamicProgram(feasible, reward, K, cfg.beta, labels, actions, meta)


# ---------------------------------------------------------------------------
# Job search

def build_job_search(config) -> DynamicProgram:
    """McCall search with absorbing employment.

    Searching states ``(w, c, z)`` are the wage and outside-option quadrature
    nodes; employed states ``(w, z)`` pay ``u(w)`` forever.  Action 0 accepts
    (pays ``u(w)`` now and moves to employment), action 1 continues (pays
    ``u(c)`` and redraws).
    """
    cfg = _cfg(config)
    u = utility_from_spec(cfg.utility)
    chain = chain_from_spec(cfg.chain)
    wq = quadrature_from_spec(cfg.shocks.get("wage"), 1.0)
    cq = quadrature_from_spec(cfg.shocks.get("outside"), float(cfg.extras.get("c", 1.0)))
    c_scale = np.broadcast_to(np.asarray(cfg.extras.get("outside_scale", 1.0), dtype=float), (chain.n,))
    Wz = chain.values[:, None] * wq.nodes[None, :]       # (nz, nw)
    Cz = c_scale[:, None] * cq.nodes[None, :]            # (nz, nc)
    nz, nw, nc = chain.n, wq.n, cq.n
    n_s = nz * nw * nc
    n = n_s + nz * nw

    def srch(z, i, k):
        return (z * nw + i) * nc + k

    def emp(z, i):
        return n_s + z * nw + i

    nxt = np.zeros((nz, n))
    for z in range(nz):
        for z2 in range(nz):
            for i2 in range(nw):
                for k2 in range(nc):
                    nxt[z, srch(z2, i2, k2)] = chain.transition[z, z2] * wq.weights[i2] * cq.weights[k2]

    feasible = np.zeros((n, 2), dtype=bool)
    reward = np.full((n, 2), -np.inf)
    K = np.zeros((n, 2, n))
    labels: list[Any] = [None] * n
    for z in range(nz):
        for i in range(nw):
            e = emp(z, i)
            labels[e] = ("employed", float(Wz[z, i]), 0.0, z)
            feasible[e, 0] = True
            reward[e, 0] = u(Wz[z, i])
            K[e, 0, e] = 1.0
            for k in range(nc):
                s = srch(z, i, k)
                labels[s] = ("search", float(Wz[z, i]), float(Cz[z, k]), z)
                feasible[s] = True
                reward[s, 0] = u(Wz[z, i])
                reward[s, 1] = u(Cz[z, k])
                K[s, 0, e] = 1.0
                K[s, 1] = nxt[z]
    meta = {"kind": "job_search", "n_search": n_s, "n_w": nw, "n_c": nc, "n_z": nz,
            "wage_nodes": Wz.tolist(), "wage_weights": wq.weights.tolist(),
            "outside_nodes": Cz.tolist()}
    return DynamicProgram(feasible, reward, K, cfg.beta, labels, [("accept",), ("continue",)], meta)


# ---------------------------------------------------------------------------
# Savings with endogenous labour

def build_savings_labor(config) -> DynamicProgram:
    """State ``(w, z)`` with wage ``y = chain.values[z]``; action ``(c, l)``.

    Feasible when ``c <= w + y l``; reward ``u(c) - chi * l**eta``; next
    wealth ``R'(w - c + y l)``.
    """
    cfg = _cfg(config)
    u = utility_from_spec(cfg.utility)
    chi = float(cfg.extras.get("chi", 1.0))
    eta = float(cfg.extras.get("eta", 1.0))
    w = make_grid(cfg.grids.get("w"))
    lg = make_grid(cfg.grids.get("l", {"values": [0.0, 0.5, 1.0]}))
    if lg.min() < 0 or lg.max() > 1:
        raise ConfigError("labour grid must lie in [0, 1]")
    chain = chain_from_spec(cfg.chain)
    budget = (w[:, None, None] + chain.values[None, :, None] * lg[None, None, :]).ravel()
    c = _consumption_grid(cfg.grids, w, u, extra=budget[budget > 0])
    ret = quadrature_from_spec(cfg.shocks.get("return"), float(cfg.extras.get("R", 1.0)))
    C, L = np.meshgrid(c, lg, indexing="ij")
    A = np.stack([C.ravel(), L.ravel()], axis=1)          # action index = ic * n_l + il

    def law(w_, a, z, z_next, xi):
        return xi * (w_ - a[..., 0] + chain.values[z] * a[..., 1])

    K = compose_kernel(w, A, chain, ret, law)
    nz, nw = chain.n, w.size
    Wv = np.tile(w, nz)
    Yv = np.repeat(chain.values, nw)
    feasible = _feasible_leq(A[None, :, 0], Wv[:, None] + Yv[:, None] * A[None, :, 1])
    feasible = _lower_boundary(cfg.grids, feasible, w, A, chain, ret, law)
    reward = np.broadcast_to((u(A[:, 0]) - chi * A[:, 1] ** eta)[None, :], feasible.shape)
    labels = [(float(wi), iz) for iz in range(nz) for wi in w]
    meta = {"kind": "savings_labor", "wealth_coordinate": 0, "order_coordinates": [0],
            "wages": chain.values.tolist(), "chi": chi, "eta": eta}
    return DynamicProgram(feasible, reward, K, cfg.beta, labels,
                          [(float(a), float(b)) for a, b in A], meta)


# ---------------------------------------------------------------------------
# Consumption-portfolio

def build_portfolio(config) -> DynamicProgram:
    """State ``(w, z)``, action ``(c, theta)`` with ``theta`` from the finite list ``Theta(z)``.

    ``extras.assets`` lists one return spec per asset (independent iid
    draws); ``extras.portfolios[z]`` lists admissible weight vectors.  Next
    wealth is ``(theta . R')(w - c) + y'``.
    """
    cfg = _cfg(config)
    u = utility_from_spec(cfg.utility)
    w = make_grid(cfg.grids.get("w"))
    c = _consumption_grid(cfg.grids, w, u)
    chain = chain_from_spec(cfg.chain)
    assets = [quadrature_from_spec(s) for s in cfg.extras.get("assets", [])]
    if not assets:
        raise ConfigError("portfolio model needs at least one asset")
    ports = cfg.extras.get("portfolios")
    if ports is None:
        raise ConfigError("portfolio model needs extras.portfolios")
    if len(ports) == 1 and chain.n > 1:
        ports = ports * chain.n
    if len(ports) != chain.n or any(len(p) == 0 for p in ports):
        raise ConfigError("need a nonempty portfolio list for every chain state")
    J, Kmax = len(assets), max(len(p) for p in ports)
    theta = np.zeros((chain.n, Kmax, J))
    allowed = np.zeros((chain.n, Kmax), dtype=bool)
    for z, plist in enumerate(ports):
        for k, th in enumerate(plist):
            th = np.asarray(th, dtype=float)
            if th.shape != (J,):
                raise ConfigError("portfolio weights must have one entry per asset")
            theta[z, k] = th
            allowed[z, k] = True
    income = quadrature_from_spec(cfg.shocks.get("income"), 1.0)
    shock = product_quadrature(income, *assets)
    ic = np.repeat(np.arange(c.size), Kmax)
    ik = np.tile(np.arange(Kmax), c.size)                  # action index = ic * Kmax + k
    A = np.stack([c[ic], ik], axis=1)

    def law(w_, a, z, z_next, xi):
        gross = theta[z][a[..., 1].astype(int)] @ xi[1:]
        return gross * (w_ - a[..., 0]) + chain.values[z_next] * xi[0]

    K = compose_kernel(w, A, chain, shock, law)
    nz, nw = chain.n, w.size
    Wv = np.tile(w, nz)
    feasible = _feasible_leq(A[None, :, 0], Wv[:, None]) & np.repeat(allowed, nw, axis=0)[:, ik]
    feasible = _lower_boundary(cfg.grids, feasible, w, A, chain, shock, law)
    reward = np.broadcast_to(u(A[:, 0])[None, :], feasible.shape)
    labels = [(float(wi), iz) for iz in range(nz) for wi in w]
    meta = {"kind": "portfolio", "wealth_coordinate": 0, "order_coordinates": [0],
            "portfolios": theta.tolist()}
    return DynamicProgram(feasible, reward, K, cfg.beta, labels,
                          [(float(c[i]), int(k)) for i, k in zip(ic, ik)], meta)


# ---------------------------------------------------------------------------
# Risk-sensitive optimal growth

def growth_alpha(eta: float, beta: float) -> float:
    """Growth factor for the weight: midpoint of ``(1, 1/beta)`` if ``eta <= 1``, else ``eta``."""
    if eta <= 0:
        raise ConfigError("eta must be positive")
    if eta <= 1:
        return 0.5 * (1 + 1 / beta)
    if beta >= 1 / eta:
        raise ConfigError(f"need beta < 1/eta = {1 / eta:.4f} when eta > 1 (got beta={beta})")
    return eta


def build_rs_growth(config) -> tuple[DynamicProgram, RiskParams, WeightFunction]:
    """Capital ``x``, investment ``a <= x``, reward ``u(x - a)``, ``x' = eta a + eps'``.

    The state grid contains every shock node.  Returns the program, the
    risk parameters and the weight ``x + mean(eps)/(alpha - 1)`` (rescaled to
    be at least one).
    """
    cfg = _cfg(config)
    u = utility_from_spec(cfg.utility)
    eta = float(cfg.extras.get("eta", 1.0))
    alpha = growth_alpha(eta, cfg.beta)
    gamma = cfg.extras.get("risk_gamma")
    if gamma is None:
        raise ConfigError("rs_growth needs extras.risk_gamma")
    eps = quadrature_from_spec(cfg.shocks.get("eps", {"type": "lognormal", "mu": 0.0, "sigma": 0.1}))
    if (eps.nodes <= 0).any():
        raise ConfigError("productivity shocks must be positive")
    xg = make_grid(cfg.grids.get("x"))
    x = np.unique(np.concatenate([xg, eps.nodes, [min(xg.min(), eps.nodes.min())]]))
    a_spec = cfg.grids.get("a", {"n": xg.size})
    a = make_grid(a_spec) if "values" in a_spec or "min" in a_spec else np.linspace(0.0, x.max(), int(a_spec["n"]))
    floor = float(cfg.grids.get("c_floor_frac", 1e-3)) * x.min()
    chain = MarkovChain.constant(1.0)

    def law(x_, a_, z, z_next, xi):
        return eta * a_ + xi + 0.0 * x_

    K = compose_kernel(x, a, chain, eps, law)
    feasible = a[None, :] <= x[:, None] - floor
    reward = u(np.maximum(x[:, None] - a[None, :], 0.0))
    eps_bar = float(eps.mean())
    kap = x + eps_bar / (alpha - 1)
    scale = max(1.0, 1.0 / kap.min())
    weight = WeightFunction(scale * kap, {"type": "growth", "alpha": alpha, "eps_bar": eps_bar,
                                          "scale": scale})
    meta = {"kind": "rs_growth", "wealth_coordinate": 0, "eta": eta, "alpha_rule": alpha,
            "eps_bar": eps_bar}
    dp = DynamicProgram(feasible, reward, K, cfg.beta, [float(v) for v in x],
                        [float(v) for v in a], meta)
    return dp, RiskParams(float(gamma)), weight


# ---------------------------------------------------------------------------

def build_model(config) -> BuiltModel:
    """Dispatch on ``config.kind``."""
    cfg = _cfg(config)
    if cfg.kind == "rs_growth":
        dp, risk, kappa = build_rs_growth(cfg)
        return BuiltModel(dp, cfg, risk, kappa)
    builder = {"savings": build_optimal_savings, "default": build_optimal_default,
               "job_search": build_job_search, "savings_labor": build_savings_labor,
               "portfolio": build_portfolio}[cfg.kind]
    dp = builder(cfg)
    risk = cfg.extras.get("risk_gamma")
    return BuiltModel(dp, cfg, RiskParams(float(risk)) if risk is not None else None)
