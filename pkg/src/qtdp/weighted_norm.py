"""Weighted sup norms for rewards that are unbounded above.

With a weight ``kappa >= 1`` satisfying ``r_bar <= d * kappa`` and
``E_{x,a} kappa(x') <= alpha * kappa(x)`` with ``alpha * beta < 1``, the same
operator ``S`` is a contraction of modulus ``alpha * beta`` in
``||g||_kappa = max |g(x, a)| / kappa(x)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import KERNEL_ATOL, AssumptionError, DynamicProgram, ModelError, r_bar
from .q_transform import (DEFAULT_MAX_ITER, DEFAULT_TOL, apply_S, as_q,
                          iterate_to_fixed_point, require_assumption_one, zeros_like_q)

Q_CAP = 2.0 ** 40


@dataclass(frozen=True, eq=False)
class WeightFunction:
    kappa: np.ndarray
    spec: dict = field(default_factory=dict)

    def __post_init__(self):
        k = np.asarray(self.kappa, dtype=float)
        if k.ndim != 1 or not np.isfinite(k).all() or (k < 1).any():
            raise ModelError("kappa must be a finite vector with entries >= 1")
        k = k.copy()
        k.setflags(write=False)
        object.__setattr__(self, "kappa", k)

    @classmethod
    def ones(cls, n: int) -> "WeightFunction":
        return cls(np.ones(n), {"type": "constant", "value": 1.0})


def _kappa(kappa) -> np.ndarray:
    return kappa.kappa if isinstance(kappa, WeightFunction) else np.asarray(kappa, dtype=float)


def kappa_norm(g, kappa, feasible=None) -> float:
    """``max |g| / kappa`` over (feasible) entries; ``g`` is per-state or a state-action table."""
    g = np.asarray(g, dtype=float)
    k = _kappa(kappa)
    ratio = np.abs(g) / (k if g.ndim == 1 else k[:, None])
    if feasible is not None:
        ratio = ratio[np.asarray(feasible, dtype=bool)]
    return float(np.max(ratio))


def kappa_hat(dp: DynamicProgram, kappa) -> np.ndarray:
    """``E_{x,a} kappa(x')`` on feasible pairs (``nan`` elsewhere)."""
    out = np.full(dp.feasible.shape, np.nan)
    out[dp.feasible] = dp.pair_kernel @ _kappa(kappa)
    return out


@dataclass(frozen=True)
class WeightedCertificate:
    """Grid verification of the weighted-norm conditions.

    ``alpha`` is the exact grid maximum of ``kappa_hat / kappa``.  When the
    model carries analytic constants, ``alpha_bound`` holds the untruncated
    bound ``max{(pY + q)/q, E R}`` and must also satisfy ``alpha_bound * beta < 1``.
    """

    d: float
    alpha: float
    beta: float
    holds: bool
    alpha_bound: float | None = None
    kappa_spec: dict = field(default_factory=dict)

    @property
    def alpha_beta(self) -> float:
        a = self.alpha if self.alpha_bound is None else max(self.alpha, self.alpha_bound)
        return a * self.beta

    @property
    def modulus(self) -> float:
        return self.alpha * self.beta

    def to_dict(self) -> dict:
        return {"d": self.d, "alpha": self.alpha, "alpha_bound": self.alpha_bound,
                "alpha_beta": self.alpha_beta, "holds": self.holds,
                "kappa_spec": self.kappa_spec,
                "kappa_hat_continuity": "structural (finite grid)"}


def certify_assumption_three(dp: DynamicProgram, kappa, alpha_bound: float | None = None
                             ) -> WeightedCertificate:
    k = _kappa(kappa)
    if k.shape != (dp.n_states,):
        raise ValueError("kappa must have one entry per state")
    rb = r_bar(dp)
    if np.isposinf(rb).any():
        raise ModelError("r_bar is +inf somewhere")
    d = max(0.0, float(np.max(rb / k)))
    ratios = kappa_hat(dp, k)[dp.feasible] / k[dp.pair_index[0]]
    alpha = float(ratios.max())
    if np.ptp(k) == 0 and abs(alpha - 1) <= KERNEL_ATOL:
        alpha = 1.0  # constant weight: kappa_hat == kappa up to row-sum rounding
    holds = np.isfinite(d) and alpha * dp.beta < 1
    if alpha_bound is not None:
        holds = holds and alpha_bound * dp.beta < 1
    spec = kappa.spec if isinstance(kappa, WeightFunction) else {}
    return WeightedCertificate(d, alpha, dp.beta, bool(holds), alpha_bound, dict(spec))


class CertificateError(AssumptionError):
    def __init__(self, msg, certificate=None):
        super().__init__(msg)
        self.certificate = certificate


def wealth_coordinate(dp: DynamicProgram) -> np.ndarray:
    if dp.state_labels is None:
        raise ModelError("model has no state labels exposing a wealth coordinate")
    i = dp.meta.get("wealth_coordinate", 0)
    return np.array([float(s[i]) if isinstance(s, (tuple, list)) else float(s)
                     for s in dp.state_labels])


def linear_alpha_bound(dp: DynamicProgram, p: float, q: float) -> float | None:
    """``max{(p*Y + q)/q, E R}`` when the model records ``Y`` and ``E R``."""
    if "mean_return" not in dp.meta or "max_mean_income" not in dp.meta:
        return None
    Y, ER = float(dp.meta["max_mean_income"]), float(dp.meta["mean_return"])
    return max((p * Y + q) / q, ER)


def auto_weight_linear(dp: DynamicProgram, p: float, q_init: float = 2.0):
    """Search ``kappa = p*w + q`` over ``q = q_init, 2*q_init, ...`` until certified.

    Raises
    ------
    CertificateError
        If ``q`` exceeds ``2**40 * q_init`` without a passing certificate.
    """
    if p <= 0 or q_init <= 1:
        raise ValueError("need p > 0 and q_init > 1")
    w = wealth_coordinate(dp)
    q = float(q_init)
    cert = None
    while q <= Q_CAP * q_init:
        k = p * w + q
        if (k >= 1).all():
            weight = WeightFunction(k, {"type": "linear", "p": p, "q": q})
            cert = certify_assumption_three(dp, weight, linear_alpha_bound(dp, p, q))
            if cert.holds:
                return weight, cert
        q *= 2
    raise CertificateError(
        f"no q in [{q_init}, {Q_CAP * q_init:g}] certifies kappa = {p}*w + q "
        f"(alpha_beta = {cert.alpha_beta if cert else float('nan'):.4f})", cert)


def require_certificate(dp: DynamicProgram, kappa, certificate=None) -> WeightedCertificate:
    cert = certificate or certify_assumption_three(dp, kappa)
    if not cert.holds:
        raise CertificateError(f"weighted certificate fails (alpha_beta={cert.alpha_beta:.4f})", cert)
    return cert


def solve_fixed_point_weighted(dp: DynamicProgram, kappa, g0=None, tol: float = DEFAULT_TOL,
                               max_iter: int = DEFAULT_MAX_ITER, certificate=None):
    """Iterate ``S`` with distances and stopping rule in the ``kappa`` norm.

    The certified error uses the modulus ``alpha * beta`` with ``alpha`` the
    grid maximum of ``kappa_hat / kappa``.
    """
    cert = require_certificate(dp, kappa, certificate)
    require_assumption_one(dp)
    k = _kappa(kappa)
    g0 = zeros_like_q(dp) if g0 is None else as_q(dp, g0)
    return iterate_to_fixed_point(
        lambda g: apply_S(dp, g), lambda g: kappa_norm(g, k, dp.feasible),
        g0, cert.modulus, tol, max_iter, norm_name="kappa",
        metadata={"alpha": cert.alpha, "d": cert.d})


def value_upper_bound(certificate: WeightedCertificate, kappa) -> np.ndarray:
    """Upper bound ``d * kappa / (1 - alpha*beta)`` on every policy value."""
    return certificate.d * _kappa(kappa) / (1 - certificate.modulus)
