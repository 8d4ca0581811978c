"""Heat-kernel smoothed local times: Monte Carlo and closed-form moments.

``L_ε(x) = ∫_I p_ε(X(s) - x) ds`` with ``p_ε`` the centred Gaussian density
of covariance ``ε I_d``.  For a pair ``(s, t)`` the vector
``(X(s) + √ε G, X(t) + √ε G')`` is Gaussian with per-coordinate covariance
``Γ = [[Var X(s) + ε, R], [R, Var X(t) + ε]]``, hence

    E L_ε(y)² = (2π)^{-d} ∫∫ det Γ^{-d/2} exp(-‖y‖² (a² + b² - 2R) / (2 det Γ)).

The Cauchy gap ``E(L_ε1 - L_ε2)²`` uses the same formula with the two
regularisations placed on the two diagonal entries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .fields import CovKernel, gram_matrix, pair_stats, substreams
from .pairquad import PairRule, default_rule, grid_points, grid_rule

DEFAULT_LADDER = (0.5, 0.1, 0.02, 0.004, 0.0008)
# E L_ε² - limit ~ √ε for Brownian motion, so a 2% last step needs rungs down to ~1e-5
EXTENDED_LADDER = tuple(0.5 * 5.0**-k for k in range(8))
DEFAULT_GRID = {1: 64, 2: 24}


def heat_kernel(x, eps: float, d: int | None = None):
    """``(2πε)^{-d/2} exp(-‖x‖²/(2ε))``; the last axis of ``x`` is the space axis."""
    if eps <= 0:
        raise DomainError("eps must be positive")
    x = np.asarray(x, float)
    if x.ndim == 0:
        x = x.reshape(1)
    if d is None:
        d = x.shape[-1]
    elif x.shape[-1] != d:
        x = np.broadcast_to(x, x.shape[:-1] + (d,)) if x.shape[-1] == 1 else x
    sq = np.sum(x * x, axis=-1)
    out = (2 * math.pi * eps) ** (-0.5 * d) * np.exp(-sq / (2 * eps))
    return float(out) if np.ndim(out) == 0 else out


def _level(x, d):
    x = np.asarray(x, float).ravel()
    if x.size == 1:
        return np.full(d, float(x[0]))
    if x.size != d:
        raise DomainError(f"level has {x.size} components, expected {d}")
    return x


def _grid_default(kernel: CovKernel, grid):
    if grid is None:
        grid = DEFAULT_GRID.get(kernel.dim)
        if grid is None:
            raise DomainError(f"no default grid for parameter dimension {kernel.dim}")
    return grid


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------


@dataclass
class LEpsEstimate:
    value: float
    standard_error: float
    second_moment: float
    second_moment_se: float
    replicate_values: np.ndarray
    eps: float
    x: list
    d: int
    grid_spec: dict
    seed: int
    jitter: float = 0.0
    extra: dict = field(default_factory=dict)

    def to_dict(self, with_values: bool = False):
        out = {
            "value": self.value,
            "standard_error": self.standard_error,
            "second_moment": self.second_moment,
            "second_moment_se": self.second_moment_se,
            "eps": self.eps,
            "x": list(self.x),
            "d": self.d,
            "grid": self.grid_spec,
            "seed": self.seed,
            "replicates": int(len(self.replicate_values)),
            "jitter": self.jitter,
        }
        if with_values:
            out["replicate_values"] = [float(v) for v in self.replicate_values]
        out.update(self.extra)
        return out


def l_eps_mc(kernel: CovKernel, d: int, x=0.0, eps: float = 0.1, grid=None, replicates: int = 20_000,
             seed: int = 0, workers: int = 1, chunk: int = 2048) -> LEpsEstimate:
    """Riemann-sum estimate of ``L_ε(x)`` on cell midpoints, one value per replicate.

    Replicates are drawn in fixed chunks with one substream each, so the
    result does not depend on ``workers``.
    """
    if eps <= 0:
        raise DomainError("eps must be positive")
    if d < 1 or replicates < 2:
        raise DomainError("need d >= 1 and at least two replicates")
    grid = _grid_default(kernel, grid)
    pts, vol = grid_points(kernel, grid)
    G = gram_matrix(kernel, pts)
    lv = _level(x, d)
    n_chunks = -(-replicates // chunk)
    gens = substreams(seed, n_chunks)
    sizes = [min(chunk, replicates - i * chunk) for i in range(n_chunks)]
    norm = (2 * math.pi * eps) ** (-0.5 * d)

    def run(i):
        X = gens[i].standard_normal((sizes[i], d, len(pts))) @ G.chol.T
        sq = np.sum((X - lv[None, :, None]) ** 2, axis=1)
        return vol * norm * np.exp(-sq / (2 * eps)).sum(axis=1)

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(run, range(n_chunks)))
    else:
        parts = [run(i) for i in range(n_chunks)]
    L = np.concatenate(parts)
    r = len(L)
    L2 = L * L
    spec = {"n_per_axis": list(np.broadcast_to(np.atleast_1d(grid), (kernel.dim,)).tolist()),
            "points": int(len(pts)), "cell_volume": vol, "kernel": kernel.kernel_id}
    return LEpsEstimate(
        float(L.mean()), float(L.std(ddof=1) / math.sqrt(r)),
        float(L2.mean()), float(L2.std(ddof=1) / math.sqrt(r)),
        L, float(eps), lv.tolist(), int(d), spec, int(seed), G.jitter,
    )


def mean_closed(kernel: CovKernel, d: int, x=0.0, eps: float = 0.1, grid=None) -> float:
    """Exact ``E`` of the Riemann-sum estimator: ``Σ vol (2π(ε+v))^{-d/2} e^{-‖x‖²/(2(ε+v))}``."""
    grid = _grid_default(kernel, grid)
    pts, vol = grid_points(kernel, grid)
    v = kernel.var(pts) + eps
    sq = float(np.sum(_level(x, d) ** 2))
    return float(vol * np.sum((2 * math.pi * v) ** (-0.5 * d) * np.exp(-sq / (2 * v))))


# ---------------------------------------------------------------------------
# closed-form moments
# ---------------------------------------------------------------------------


def _pair_density(kernel: CovKernel, rule: PairRule, d: int, y, eps1: float, eps2: float):
    vs, vt, R, det, inc = pair_stats(kernel, rule.P, rule.Q)
    gdet = det + eps1 * vt + eps2 * vs + eps1 * eps2
    sq = float(np.sum(_level(y, d) ** 2))
    out = (2 * math.pi) ** (-d) * gdet ** (-0.5 * d)
    if sq > 0:
        out = out * np.exp(-sq * (inc + eps1 + eps2) / (2 * gdet))
    return out


def _resolve_rule(kernel, rule, grid):
    if rule is not None and grid is not None:
        raise DomainError("give either a pair rule or a grid, not both")
    if grid is not None:
        return grid_rule(kernel, grid)
    return rule or default_rule(kernel)


def second_moment_closed(kernel: CovKernel, d: int, y=0.0, eps: float = 0.1, rule: PairRule | None = None,
                         grid=None) -> float:
    """``E L_ε(y)²`` integrated over ``I²`` with a pair rule.

    With ``grid`` the integral is replaced by the double sum over grid
    midpoints, which is the exact second moment of the Riemann-sum estimator
    used by :func:`l_eps_mc`.
    """
    if eps <= 0:
        raise DomainError("eps must be positive")
    rule = _resolve_rule(kernel, rule, grid)
    return float(np.sum(rule.w * _pair_density(kernel, rule, d, y, eps, eps)))


def cauchy_gap(kernel: CovKernel, d: int, y=0.0, eps1: float = 0.1, eps2: float = 0.05,
               rule: PairRule | None = None, grid=None) -> float:
    """``E(L_ε1(y) - L_ε2(y))²`` from the mixed regularisation; clamped at 0."""
    if eps1 <= 0 or eps2 <= 0:
        raise DomainError("eps must be positive")
    if eps1 == eps2:
        return 0.0
    rule = _resolve_rule(kernel, rule, grid)
    f11 = _pair_density(kernel, rule, d, y, eps1, eps1)
    f22 = _pair_density(kernel, rule, d, y, eps2, eps2)
    f12 = _pair_density(kernel, rule, d, y, eps1, eps2)
    return max(0.0, float(np.sum(rule.w * (f11 + f22 - 2.0 * f12))))


# ---------------------------------------------------------------------------
# ladders
# ---------------------------------------------------------------------------


@dataclass
class LadderReport:
    eps: list
    values: list
    gaps: list
    rel_changes: list
    slope: float
    r_squared: float
    stabilized: bool
    growing: bool
    gaps_decreasing: bool

    def to_dict(self):
        return dict(self.__dict__)


def _slope(eps, values):
    x = np.log(1.0 / np.asarray(eps, float))
    y = np.asarray(values, float)
    if len(x) < 2:
        return 0.0, 0.0
    b, a = np.polyfit(x, y, 1)
    resid = y - (a + b * x)
    ss = float(np.sum((y - y.mean()) ** 2))
    return float(b), (1.0 - float(np.sum(resid**2)) / ss) if ss > 0 else 0.0


def moment_ladder(kernel: CovKernel, d: int, y=0.0, eps_ladder=DEFAULT_LADDER, rule: PairRule | None = None,
                  tol: float = 0.02) -> LadderReport:
    """Second moments and Cauchy gaps ``gap(ε, ε/2)`` along a decreasing ladder.

    ``stabilized`` means the last relative change is below ``tol``;
    ``growing`` means every rung increases and the fitted slope against
    ``log(1/ε)`` is positive.
    """
    eps = sorted((float(e) for e in eps_ladder), reverse=True)
    rule = rule or default_rule(kernel)
    vals = [second_moment_closed(kernel, d, y, e, rule=rule) for e in eps]
    gaps = [cauchy_gap(kernel, d, y, e, e / 2, rule=rule) for e in eps]
    rel = [abs(b - a) / abs(b) for a, b in zip(vals[:-1], vals[1:])]
    slope, r2 = _slope(eps, vals)
    return LadderReport(
        eps, vals, gaps, rel, slope, r2,
        stabilized=bool(rel and rel[-1] < tol),
        growing=bool(all(b > a for a, b in zip(vals[:-1], vals[1:])) and slope > 0),
        gaps_decreasing=bool(all(b < a for a, b in zip(gaps[:-1], gaps[1:]))),
    )


# ---------------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------------


def scenario_localtime(scenario, kernel: CovKernel | None = None, estimator: str = "closed", eps: float = 0.1,
                       grid=None, replicates: int = 20_000, seed: int = 0, rule: PairRule | None = None,
                       workers: int = 1):
    """Local time at level 0 of the field a scenario reduces to.

    Collision uses ``Z = X^H - X^K``, intersection ``U(s,t) = X^H(s) - X^K(t)``
    and self-intersection ``V(s,t) = X(t) - X(s)`` on ``I x J``.  The level is
    the scenario's for plain local times and 0 otherwise.
    """
    from .criteria.dichotomy import scenario_kernel

    kernel = kernel or scenario_kernel(scenario)
    level = scenario.level if scenario.kind == "localtime" else 0.0
    if estimator == "mc":
        return l_eps_mc(kernel, scenario.d, level, eps, grid, replicates, seed, workers)
    if estimator != "closed":
        raise DomainError(f"unknown estimator {estimator!r}")
    value = second_moment_closed(kernel, scenario.d, level, eps, rule=rule, grid=grid)
    return {"scenario": scenario.to_dict(), "kernel": kernel.kernel_id, "eps": float(eps),
            "second_moment": value}
