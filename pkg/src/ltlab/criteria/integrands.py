"""Pair integrands of the existence and smoothness criteria.

Scalar functions (``integrand_prop`` and friends) evaluate one pair and raise
:class:`SingularPoint` where the pair covariance degenerates.  The
:class:`PairIntegrand` objects are their vectorised counterparts used by the
quadrature; there a degenerate pair simply evaluates to ``inf``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..errors import SingularPoint
from ..fields import CovKernel, SelfIntersectionKernel, _pts, pair_stats


def _pair(kernel, s, t):
    s = _pts(s, kernel.dim).reshape(1, kernel.dim)
    t = _pts(t, kernel.dim).reshape(1, kernel.dim)
    vs, vt, cov, det, inc = pair_stats(kernel, s, t)
    if det[0] <= 0:
        raise SingularPoint(f"degenerate pair covariance at s={s[0]}, t={t[0]}")
    return float(cov[0]), float(det[0]), float(inc[0])


def integrand_prop(kernel: CovKernel, gamma: float, lam: float, s, t) -> float:
    """``|R(s,t)|^λ / det^{γ/2}``."""
    if gamma <= 0 or lam < 0:
        raise ValueError("need gamma > 0 and lambda >= 0")
    cov, det, _ = _pair(kernel, s, t)
    return abs(cov) ** lam / det ** (gamma / 2)


def integrand_existence(kernel: CovKernel, y, d: int, s, t) -> float:
    """``exp(-|y|^2 σ²(s,t) / det) det^{-d/2}``."""
    y = np.atleast_1d(np.asarray(y, float))
    if y.size not in (1, d):
        raise ValueError(f"level has {y.size} entries, d={d}")
    y2 = float(np.sum(y**2)) * (d if y.size == 1 and d > 1 else 1)
    s_ = _pts(s, kernel.dim).reshape(1, kernel.dim)
    t_ = _pts(t, kernel.dim).reshape(1, kernel.dim)
    _, _, _, det, inc = pair_stats(kernel, s_, t_)
    det, inc = float(det[0]), float(inc[0])
    if det <= 0:
        if y2 > 0 and inc > 0:
            return 0.0
        raise SingularPoint(f"degenerate pair covariance at s={s_[0]}, t={t_[0]}")
    return float(np.exp(-y2 * inc / det) * det ** (-d / 2))


def integrand_smoothness(kernel: CovKernel, d: int, s, t) -> float:
    """``R(s,t)^2 / det^{(d+2)/2}``."""
    return integrand_prop(kernel, d + 2, 2, s, t)


def integrand_self(kernel: CovKernel, d: int, variant: str, p, q, I=None, J=None) -> float:
    """``det_V^{-d/2}`` (variant J) or ``Cov_V^2 det_V^{-(d+2)/2}`` (variant K).

    ``kernel`` may be the base kernel (wrapped here) or an already derived
    self-intersection kernel; ``p = (s, t)`` and ``q = (s', t')``.
    """
    vk = kernel if isinstance(kernel, SelfIntersectionKernel) else SelfIntersectionKernel(kernel, I, J)
    variant = variant.upper()
    if variant == "J":
        return integrand_prop(vk, d, 0, p, q)
    if variant == "K":
        return integrand_prop(vk, d + 2, 2, p, q)
    raise ValueError(f"variant must be J or K, got {variant!r}")


# ---------------------------------------------------------------------------
# vectorised forms
# ---------------------------------------------------------------------------


@dataclass
class PairIntegrand:
    """Vectorised nonnegative integrand ``f(P, Q)`` over pairs of points."""

    kernel: CovKernel
    func: Callable
    name: str
    params: dict = field(default_factory=dict)

    def __call__(self, P, Q):
        return self.func(P, Q)

    def describe(self):
        return {"name": self.name, "params": self.params, "kernel": self.kernel.describe()}


def prop_integrand(kernel: CovKernel, gamma: float, lam: float) -> PairIntegrand:
    def f(P, Q):
        _, _, cov, det, _ = pair_stats(kernel, P, Q)
        with np.errstate(divide="ignore"):
            return np.abs(cov) ** lam * det ** (-gamma / 2)

    return PairIntegrand(kernel, f, "prop", {"gamma": gamma, "lambda": lam})


def existence_integrand(kernel: CovKernel, d: int, y=0.0) -> PairIntegrand:
    y = np.atleast_1d(np.asarray(y, float))
    y2 = float(np.sum(y**2)) * (d if y.size == 1 and d > 1 else 1)

    def f(P, Q):
        _, _, _, det, inc = pair_stats(kernel, P, Q)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = det ** (-d / 2)
            if y2 > 0:
                out = out * np.exp(-y2 * inc / det)
                out = np.where((det == 0) & (inc > 0), 0.0, out)
        return out

    return PairIntegrand(kernel, f, "existence", {"d": d, "y2": y2})


def smoothness_integrand(kernel: CovKernel, d: int) -> PairIntegrand:
    out = prop_integrand(kernel, d + 2, 2)
    out.name, out.params = "smoothness", {"d": d}
    return out


def self_integrand(base: CovKernel, d: int, variant: str, I=None, J=None) -> PairIntegrand:
    vk = base if isinstance(base, SelfIntersectionKernel) else SelfIntersectionKernel(base, I, J)
    if variant.upper() == "J":
        out = prop_integrand(vk, d, 0)
    elif variant.upper() == "K":
        out = prop_integrand(vk, d + 2, 2)
    else:
        raise ValueError(f"variant must be J or K, got {variant!r}")
    out.name, out.params = f"self_{variant.upper()}", {"d": d}
    return out
