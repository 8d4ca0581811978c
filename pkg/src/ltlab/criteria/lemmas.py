"""Numerical checks of the one-dimensional singular-integral bounds.

``lemma1_eval`` compares ``∫_0^1 (A + t^α)^{-β} dt`` with its three-regime
asymptotic form.  ``lemma23_check`` evaluates the integrals over a ball
``O(u*, r)`` with the distance ``min_j |u - u_j|`` to a point cloud, and
divides by the bound stripped of its constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from ..errors import DomainError, RegimeMismatch

_REG_TOL = 1e-12


def _regime(alpha, beta):
    ab = alpha * beta
    if abs(ab - 1.0) <= _REG_TOL:
        return 0
    return 1 if ab > 1 else -1


def _quad(f, a, b, points=None):
    val, _ = integrate.quad(f, a, b, points=points, epsabs=0.0, epsrel=1e-12, limit=500)
    return val


def lemma1_integral(alpha: float, beta: float, A: float) -> float:
    """``∫_0^1 dt / (A + t^α)^β`` on geometric panels around ``A^{1/α}``."""
    scale = A ** (1.0 / alpha)
    edges = [0.0]
    x = min(scale, 1.0)
    while x < 1.0:
        edges.append(x)
        x *= 8.0
    edges.append(1.0)
    f = lambda t: (A + t**alpha) ** (-beta)
    return float(sum(_quad(f, a, b) for a, b in zip(edges[:-1], edges[1:]) if b > a))


def lemma1_asymptotic(alpha: float, beta: float, A: float) -> float:
    reg = _regime(alpha, beta)
    if reg > 0:
        return A ** (-(beta - 1.0 / alpha))
    if reg == 0:
        return math.log1p(A ** (-1.0 / alpha))
    return 1.0


def lemma1_eval(alpha: float, beta: float, A: float):
    """``(integral, asymptotic, ratio)``."""
    if alpha <= 0 or beta <= 0:
        raise DomainError("alpha and beta must be positive")
    if not 0.0 < A < 1.0:
        raise DomainError("A must lie in (0, 1)")
    val = lemma1_integral(alpha, beta, A)
    asym = lemma1_asymptotic(alpha, beta, A)
    return val, asym, val / asym


@dataclass
class BandReport:
    alpha: float
    beta: float
    A: list
    ratios: list
    band: list
    growth: float

    def to_dict(self):
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "A": list(self.A),
            "ratios": list(self.ratios),
            "band": list(self.band),
            "growth": self.growth,
        }


def lemma1_band(alpha: float, beta: float, A_ladder=(1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6)) -> BandReport:
    """Running band ``C_k = max(max ratio, 1/min ratio)`` along the ladder.

    ``growth`` is the relative widening over the last rung; a bounded ratio
    shows up as ``growth`` tending to 0.
    """
    ratios = [lemma1_eval(alpha, beta, a)[2] for a in A_ladder]
    band = []
    for k in range(1, len(ratios) + 1):
        r = ratios[:k]
        band.append(max(max(r), 1.0 / min(r)))
    growth = band[-1] / band[-2] - 1.0 if len(band) > 1 else 0.0
    return BandReport(alpha, beta, list(A_ladder), ratios, band, growth)


# ---------------------------------------------------------------------------
# Lemmas on point clouds
# ---------------------------------------------------------------------------


def _cells(points, lo, hi):
    """Voronoi cells of sorted ``points`` inside ``[lo, hi]``."""
    p = np.sort(np.asarray(points, float))
    mids = 0.5 * (p[:-1] + p[1:])
    left = np.concatenate([[lo], mids])
    right = np.concatenate([mids, [hi]])
    return p, left, right


def _radial(kind, alpha, beta, A, M):
    """Integrand as a function of the distance ``x`` to the nearest point,
    and a closed-form antiderivative when one is cheap."""
    if kind in ("L2i", "L2ii"):
        return (lambda x: (A + x**alpha) ** (-beta)), None, A ** (1.0 / alpha)
    if kind == "L3i":
        return (lambda x: x ** (-beta)), (lambda L: L ** (1 - beta) / (1 - beta)), None
    return (lambda x: math.log(math.e + M * x ** (-beta)) if x > 0 else math.inf), None, None


def _radial_integral(kind, g, anti, scale, L):
    if L <= 0:
        return 0.0
    if anti is not None:
        return anti(L)
    pts = [scale] if scale is not None and 0 < scale < L else None
    return _quad(g, 0.0, L, points=pts)


def lemma23_check(lemma: str, alpha: float | None = None, beta: float = 0.5, kappa: float = 0.5,
                  A: float | None = None, r: float = 1.0, u_star: float = 0.0, points=(0.0,),
                  M: float = 1.0):
    """``(lhs, rhs_bound, constant_estimate)`` for one configuration.

    ``lemma`` is one of ``L2i``, ``L2ii`` (need ``alpha``, ``A``), ``L3i`` and
    ``L3ii`` (need ``0 < beta < 1``; ``L3ii`` also uses ``M``).
    """
    kind = lemma.strip()
    if kind not in ("L2i", "L2ii", "L3i", "L3ii"):
        raise ValueError(f"unknown lemma tag {lemma!r}")
    if beta <= 0:
        raise RegimeMismatch("beta must be positive")
    if kind in ("L2i", "L2ii"):
        if alpha is None or alpha <= 0:
            raise RegimeMismatch(f"{kind} needs alpha > 0")
        reg = _regime(alpha, beta)
        if kind == "L2i" and reg <= 0:
            raise RegimeMismatch("L2i needs alpha*beta > 1")
        if kind == "L2ii" and reg != 0:
            raise RegimeMismatch("L2ii needs alpha*beta = 1")
        if A is None or not 0 < A < 1:
            raise RegimeMismatch("A must lie in (0, 1)")
        if not 0 < kappa < 1:
            raise RegimeMismatch("kappa must lie in (0, 1)")
    else:
        if not 0 < beta < 1:
            raise RegimeMismatch(f"{kind} needs 0 < beta < 1")
        if kind == "L3ii" and M < 0:
            raise RegimeMismatch("M must be nonnegative")
    if r <= 0:
        raise DomainError("r must be positive")
    pts = np.asarray(points, float).ravel()
    n = len(pts)
    if n == 0:
        raise DomainError("need at least one point")
    if len(np.unique(pts)) != n:
        raise DomainError("points must be distinct")
    if np.any(np.abs(pts - u_star) >= r):
        raise DomainError("points must lie in the open ball O(u*, r)")

    g, anti, scale = _radial(kind, alpha, beta, A, M)
    p, left, right = _cells(pts, u_star - r, u_star + r)
    lhs = 0.0
    for pj, a, b in zip(p, left, right):
        lhs += _radial_integral(kind, g, anti, scale, pj - a)
        lhs += _radial_integral(kind, g, anti, scale, b - pj)

    if kind == "L2i":
        rhs = n * A ** (-(beta - 1.0 / alpha))
    elif kind == "L2ii":
        rhs = n * math.log(math.e + ((r / n) * A ** (-1.0 / alpha)) ** kappa)
    elif kind == "L3i":
        rhs = n**beta * r ** (1.0 - beta)
    else:
        rhs = r * math.log(math.e + M * (r / n) ** (-beta))
    return lhs, rhs, lhs / rhs


@dataclass
class LemmaScan:
    lemma: str
    alpha: float | None
    beta: float
    n_configs: int
    max_constant_half: float
    max_constant_full: float
    doubling_ratio: float

    def to_dict(self):
        return dict(self.__dict__)


def lemma23_scan(lemma: str, alpha: float | None = None, beta: float = 0.5, kappa: float = 0.5,
                 n_configs: int = 1000, n_max: int = 32, seed: int = 0, A: float | None = None,
                 M: float | None = None) -> LemmaScan:
    """Random configurations; compares the worst constant with ``n <= n_max/2``
    against ``n <= n_max``.  ``A`` and ``M`` are drawn log-uniformly unless fixed."""
    rng = np.random.default_rng(seed)
    best = {True: 0.0, False: 0.0}
    for _ in range(n_configs):
        n = int(rng.integers(1, n_max + 1))
        r = float(np.exp(rng.uniform(np.log(0.05), np.log(5.0))))
        u_star = float(rng.uniform(-1, 1))
        pts = u_star + r * rng.uniform(-0.999, 0.999, size=n)
        a_k = float(np.exp(rng.uniform(np.log(1e-6), np.log(0.5))))
        m_k = float(np.exp(rng.uniform(np.log(1e-3), np.log(1e3))))
        a_k = a_k if A is None else A
        m_k = m_k if M is None else M
        _, _, c = lemma23_check(lemma, alpha, beta, kappa, a_k, r, u_star, pts, m_k)
        best[False] = max(best[False], c)
        if n <= n_max // 2:
            best[True] = max(best[True], c)
    ratio = best[False] / best[True] if best[True] > 0 else math.inf
    return LemmaScan(lemma, alpha, beta, n_configs, best[True], best[False], ratio)
