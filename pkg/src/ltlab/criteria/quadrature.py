"""Cutoff-ladder quadrature for singular pair integrals.

The integral ``∫∫ f(p, q) dp dq`` over ``D x D`` is estimated on the
complement of the ``δ``-neighbourhood (max-norm) of the singular set for a
decreasing ladder of ``δ``.  One importance-sampled, scrambled Sobol point
set is shared by every rung, so rung values are exactly nondecreasing and
the ladder increments are not polluted by independent sampling noise.

Sampling works in "gap coordinates".  Parameter coordinates that share an
axis and an interval are grouped (e.g. ``s_j`` and ``s'_j``); within a
group the sorted values are generated from their successive gaps, each gap
drawn from a defensive mixture of a uniform and a log-uniform law.  Near
coincidences and approaches to the lower domain face therefore receive
roughly equal mass per octave, which is what the power-law singularities
need.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from ..errors import BudgetExceeded, DimensionMismatch
from ..fields import CovKernel

MAX_DIM = 8


@dataclass(frozen=True)
class SingularSet:
    """Where a pair integrand may blow up.

    ``vanish``: coordinate tuples that, all at zero, kill the field; applied
    to both points.  ``coincide``: ``(a, b)`` with the field zero on
    ``p_a = p_b``; applied to both points.  ``diagonal``: ``p = q``.
    ``reflections``: permutations ``tau`` with a singularity at ``q = tau p``.
    """

    vanish: tuple = ()
    coincide: tuple = ()
    diagonal: bool = True
    reflections: tuple = ()

    @classmethod
    def from_kernel(cls, kernel: CovKernel) -> "SingularSet":
        vanish, coincide = [], []
        for z in kernel.zero_sets():
            if z.kind == "vanish":
                vanish.append(tuple(z.a))
            else:
                coincide.append((tuple(z.a), tuple(z.b)))
        return cls(tuple(vanish), tuple(coincide), True, tuple(tuple(r) for r in kernel.reflections()))

    def distance(self, P: np.ndarray, Q: np.ndarray) -> np.ndarray:
        """Max-norm distance of each pair ``(p, q)`` to the singular set."""
        out = np.full(P.shape[0], np.inf)
        if self.diagonal:
            out = np.minimum(out, np.max(np.abs(P - Q), axis=1))
        for tau in self.reflections:
            out = np.minimum(out, np.max(np.abs(Q - P[:, list(tau)]), axis=1))
        for a in self.vanish:
            idx = list(a)
            out = np.minimum(out, np.max(np.abs(P[:, idx]), axis=1))
            out = np.minimum(out, np.max(np.abs(Q[:, idx]), axis=1))
        for a, b in self.coincide:
            ia, ib = list(a), list(b)
            out = np.minimum(out, np.max(np.abs(P[:, ia] - P[:, ib]), axis=1))
            out = np.minimum(out, np.max(np.abs(Q[:, ia] - Q[:, ib]), axis=1))
        return out

    def to_dict(self):
        return {
            "vanish": [list(v) for v in self.vanish],
            "coincide": [[list(a), list(b)] for a, b in self.coincide],
            "diagonal": self.diagonal,
            "reflections": [list(r) for r in self.reflections],
        }


def default_ladder(k_min: int = 3, k_max: int = 30) -> list[float]:
    return [2.0**-k for k in range(k_min, k_max + 1)]


@dataclass
class QuadBudget:
    """``log2_points`` Sobol points in chunks of ``2**chunk_log2``."""

    log2_points: int = 18
    seed: int = 0
    max_seconds: float = 300.0
    chunk_log2: int = 15
    mix_uniform: float = 0.3
    gap_uniform: float = 0.1
    gap_weight: float = 0.5


@dataclass
class DivergenceDiagnosis:
    cutoffs: list
    values: list
    fitted_exponent: float
    r_squared: float
    label: str
    increments: list = field(default_factory=list)
    n_points: int = 0
    settings: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "cutoffs": [float(c) for c in self.cutoffs],
            "values": [float(v) for v in self.values],
            "increments": [float(v) for v in self.increments],
            "fitted_exponent": float(self.fitted_exponent),
            "r_squared": float(self.r_squared),
            "label": self.label,
            "n_points": self.n_points,
            "settings": self.settings,
        }


# ---------------------------------------------------------------------------
# sampler
# ---------------------------------------------------------------------------


class _MixtureDesign:
    """Maps unit-cube points to ``(P, Q)`` pairs with their joint density.

    The sampling law is a mixture (balance heuristic) of

    * a per-axis gap design: within each group of coordinates sharing an
      axis and an interval, the sorted values are built from successive
      gaps drawn log-uniformly, with a uniform fallback per group;
    * one radial component per piece of the singular set (and for products
      of pieces): free coordinates are uniform, the constrained ones are
      offset from their partners by ``r^κ_j v_j`` with a single log-uniform
      radius ``r`` per block.  ``κ_j = H_max / H_j`` stretches rough axes so
      that one ``r`` describes a covariance scale on every axis.
    """

    def __init__(self, kernel: CovKernel, singular: SingularSet, eps: float, alpha: float,
                 gap_alpha: float = 0.1, gap_weight: float = 0.5):
        m = kernel.dim
        self.m = m
        self.alpha = alpha
        self.gap_alpha = gap_alpha
        self.eps = eps
        self.lo = np.concatenate([kernel.lower, kernel.lower])
        self.hi = np.concatenate([kernel.upper, kernel.upper])
        h = kernel.axis_hurst()
        kap = np.ones(m) if h is None else float(np.max(h)) / np.asarray(h, float)
        self.kappa = np.concatenate([kap, kap])

        groups: dict = {}
        for i in range(2 * m):
            j = i % m
            key = (kernel.axes[j], float(kernel.lower[j]), float(kernel.upper[j]))
            groups.setdefault(key, []).append(i)
        self.groups = [(key[1], key[2], idx) for key, idx in groups.items()]
        self.group_eps = [max(eps ** float(self.kappa[idx[0]]), 1e-300) for _, _, idx in self.groups]
        self.perms = [np.array(list(itertools.permutations(range(len(idx))))) for _, _, idx in self.groups]
        gap_dims = sum(len(idx) + 2 for _, _, idx in self.groups)

        self.components = self._components(singular)
        rad_dims = max([2 * m + len(c) for c in self.components], default=0)
        self.ndim = max(gap_dims, rad_dims) + 1
        n_rad = len(self.components)
        w_gap = gap_weight if n_rad else 1.0
        self.log_w = [math.log(w_gap)] + [math.log((1 - w_gap) / n_rad)] * n_rad
        self.cum_w = np.cumsum(np.exp(self.log_w))

    # -- component construction -------------------------------------------
    def _components(self, S: SingularSet):
        m = self.m
        diag = [(i, m + i) for i in range(m)] if S.diagonal else None
        refl = [[(tau[i], m + i) for i in range(m)] for tau in S.reflections]
        local = []
        for a, b in S.coincide:
            local.append(([(x, y) for x, y in zip(a, b)], [(m + x, m + y) for x, y in zip(a, b)]))
        for a in S.vanish:
            local.append(([(None, x) for x in a], [(None, m + x) for x in a]))
        comps = []
        if diag:
            comps.append([diag])
        comps += [[r] for r in refl]
        for bp, bq in local:
            comps += [[bp], [bq], [bp, bq]]
            if diag:
                comps.append([bp, diag])
            comps += [[bp, r] for r in refl]
        return comps

    # -- gap design ---------------------------------------------------------
    def _gap_ppf(self, u, L, eps):
        a = self.gap_alpha
        lam = math.log1p(L / eps)
        # bisect in y = log(1 + g/eps) so tiny gaps keep full relative precision
        lo = np.zeros_like(u)
        hi = np.full_like(u, lam)
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            F = a * eps * np.expm1(mid) / L + (1 - a) * mid / lam
            below = F < u
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return np.minimum(eps * np.expm1(0.5 * (lo + hi)), L)

    def _log_gap_pdf(self, g, L, eps):
        a = self.gap_alpha
        return np.log(a / L + (1 - a) / ((g + eps) * math.log1p(L / eps)))

    def _gap_sample(self, U):
        n = U.shape[0]
        X = np.empty((n, 2 * self.m))
        col = 0
        for (lo, hi, idx), perms, eps in zip(self.groups, self.perms, self.group_eps):
            k = len(idx)
            L = hi - lo
            u = U[:, col : col + k]
            sel = U[:, col + k] < self.alpha
            pick = np.minimum((U[:, col + k + 1] * len(perms)).astype(int), len(perms) - 1)
            col += k + 2
            vals = lo + np.cumsum(self._gap_ppf(u, L, eps), axis=1)
            vals = np.take_along_axis(vals, perms[pick], axis=1)
            X[:, idx] = np.where(sel[:, None], lo + L * u, vals)
        return X

    def _gap_log_density(self, X):
        n = X.shape[0]
        out = np.zeros(n)
        for (lo, hi, idx), perms, eps in zip(self.groups, self.perms, self.group_eps):
            k = len(idx)
            L = hi - lo
            srt = np.sort(X[:, idx], axis=1)
            g = np.diff(np.concatenate([np.full((n, 1), lo), srt], axis=1), axis=1)
            log_gap = np.sum(self._log_gap_pdf(g, L, eps), axis=1) - math.log(len(perms))
            log_gap = np.where(srt[:, -1] <= hi, log_gap, -np.inf)
            log_uni = -k * math.log(L)
            out += np.logaddexp(math.log(self.alpha) + log_uni, math.log1p(-self.alpha) + log_gap)
        return out

    # -- radial components -------------------------------------------------
    def _block_scale(self, block):
        tg = [t for _, t in block]
        return float(np.max(self.hi[tg] - self.lo[tg])), float(np.sum(self.kappa[tg]))

    def _rad_sample(self, comp, U):
        n = U.shape[0]
        X = self.lo + U[:, : 2 * self.m] * (self.hi - self.lo)
        col = 2 * self.m
        for block in comp:
            R, _ = self._block_scale(block)
            lam = math.log(R / self.eps)
            r = self.eps * np.exp(lam * U[:, col])
            col += 1
            for base, tgt in block:
                # reuse the target's own uniform as the offset direction
                v = U[:, tgt]
                step = r ** self.kappa[tgt]
                if base is None:
                    X[:, tgt] = self.lo[tgt] + step * v
                else:
                    X[:, tgt] = X[:, base] + step * (2 * v - 1)
        return X

    def _rad_log_density(self, comp, X):
        targets = {t for block in comp for _, t in block}
        free = [i for i in range(2 * self.m) if i not in targets]
        out = np.full(X.shape[0], -float(np.sum(np.log(self.hi[free] - self.lo[free]))))
        for block in comp:
            R, K = self._block_scale(block)
            lam = math.log(R / self.eps)
            logr = np.full(X.shape[0], -np.inf)
            n_two = 0
            for base, tgt in block:
                delta = X[:, tgt] - (self.lo[tgt] if base is None else X[:, base])
                n_two += base is not None
                with np.errstate(divide="ignore"):
                    logr = np.maximum(logr, np.log(np.abs(delta)) / self.kappa[tgt])
            logm = np.maximum(logr, math.log(self.eps))
            with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                tail = np.log1p(-np.exp(K * (logm - math.log(R))))
            dens = -K * logm + tail - math.log(K * lam) - n_two * math.log(2.0)
            out = out + np.where(logr <= math.log(R), dens, -np.inf)
        return out

    # -- driver -------------------------------------------------------------
    def transform(self, U: np.ndarray):
        sel = U[:, -1]
        comp_id = np.searchsorted(self.cum_w, sel * self.cum_w[-1], side="right")
        comp_id = np.minimum(comp_id, len(self.log_w) - 1)
        X = np.empty((U.shape[0], 2 * self.m))
        mask = comp_id == 0
        if np.any(mask):
            X[mask] = self._gap_sample(U[mask])
        for c, comp in enumerate(self.components, start=1):
            mask = comp_id == c
            if np.any(mask):
                X[mask] = self._rad_sample(comp, U[mask])
        valid = np.all((X >= self.lo) & (X <= self.hi), axis=1)
        Xc = np.clip(X, self.lo, self.hi)
        logs = [self.log_w[0] + self._gap_log_density(Xc)]
        for c, comp in enumerate(self.components, start=1):
            logs.append(self.log_w[c] + self._rad_log_density(comp, Xc))
        log_dens = np.logaddexp.reduce(np.vstack(logs), axis=0)
        return X[:, : self.m], X[:, self.m :], log_dens, valid


# ---------------------------------------------------------------------------
# ladder fit and labelling
# ---------------------------------------------------------------------------


def _fit(cutoffs, values):
    x = np.log(1.0 / np.asarray(cutoffs))
    y = np.log(np.asarray(values))
    if len(x) < 2 or not np.all(np.isfinite(y)):
        return float("nan"), float("nan")
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 0.0
    return float(coef[0]), r2


def diagnose(cutoffs, values, tol=0.01, exp_threshold=0.05, fit_threshold=0.9, fit_tail=0.5):
    """Label a ladder.

    Convergent: the last two relative increments are below ``tol``.
    Divergent: the log-log slope over the last ``fit_tail`` fraction of the
    ladder exceeds ``exp_threshold`` with ``R^2 > fit_threshold``.
    """
    values = np.asarray(values, float)
    incs = []
    for a, b in zip(values[:-1], values[1:]):
        if not math.isfinite(b):
            incs.append(float("inf"))
        else:
            incs.append((b - a) / b if b > 0 else (0.0 if a == b else float("inf")))
    n_tail = max(3, int(math.ceil(fit_tail * len(values))))
    cut_t, val_t = list(cutoffs)[-n_tail:], values[-n_tail:]
    if np.all(val_t > 0) and np.all(np.isfinite(val_t)):
        slope, r2 = _fit(cut_t, val_t)
    else:
        slope, r2 = float("nan"), float("nan")
    if not np.all(np.isfinite(values)):
        label = "Divergent"
        slope, r2 = float("inf"), 1.0
    elif len(incs) >= 2 and incs[-1] < tol and incs[-2] < tol:
        label = "Convergent"
    elif np.isfinite(slope) and slope > exp_threshold and r2 > fit_threshold:
        label = "Divergent"
    else:
        label = "Inconclusive"
    return label, slope, r2, incs


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------


def evaluate_criterion(integrand, m: int | None = None, singular: SingularSet | None = None,
                       ladder=None, budget: QuadBudget | None = None, tol: float = 0.01,
                       exp_threshold: float = 0.05, fit_threshold: float = 0.9,
                       fit_tail: float = 0.5) -> DivergenceDiagnosis:
    """Run the cutoff ladder for a pair integrand.

    ``integrand`` is a :class:`PairIntegrand` (anything with ``kernel`` and a
    vectorised ``__call__(P, Q)``).  ``m`` is the full integration dimension,
    twice the kernel's parameter dimension.
    """
    kernel = integrand.kernel
    if m is None:
        m = 2 * kernel.dim
    if m != 2 * kernel.dim:
        raise DimensionMismatch(f"integration dimension {m} != 2 x {kernel.dim}")
    if m > MAX_DIM:
        raise BudgetExceeded(f"integration dimension {m} exceeds {MAX_DIM}")
    singular = singular or SingularSet.from_kernel(kernel)
    cut = sorted(default_ladder() if ladder is None else [float(c) for c in ladder], reverse=True)
    if len(set(cut)) != len(cut) or cut[-1] <= 0:
        raise ValueError("cutoffs must be positive and strictly decreasing")
    budget = budget or QuadBudget()
    eps = cut[-1] * 2.0**-6
    design = _MixtureDesign(kernel, singular, eps, budget.mix_uniform, budget.gap_uniform, budget.gap_weight)
    sob = qmc.Sobol(d=design.ndim, scramble=True, seed=budget.seed)
    n_total = 2**budget.log2_points
    chunk = 2 ** min(budget.chunk_log2, budget.log2_points)
    sums = np.zeros(len(cut))
    cut_arr = np.asarray(cut)
    t0 = time.perf_counter()
    done = 0
    settings = {
        "log2_points": budget.log2_points,
        "seed": budget.seed,
        "tol": tol,
        "exp_threshold": exp_threshold,
        "fit_threshold": fit_threshold,
        "fit_tail": fit_tail,
        "singular_set": singular.to_dict(),
    }
    while done < n_total:
        U = sob.random(chunk)
        P, Q, log_dens, valid = design.transform(U)
        dist = singular.distance(P, Q)
        keep = valid & (dist >= cut[-1])
        if np.any(keep):
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                f = np.asarray(integrand(P[keep], Q[keep]), float)
                w = f * np.exp(-log_dens[keep])
            w = np.where(np.isnan(w), np.inf, w)
            # rung r keeps points with dist >= cut[r]; bucket by first rung reached
            rung = np.searchsorted(-cut_arr, -dist[keep], side="left")
            rung = np.clip(rung, 0, len(cut) - 1)
            for r in np.unique(rung):
                sums[r] += np.sum(w[rung == r])
        done += chunk
        if time.perf_counter() - t0 > budget.max_seconds and done < n_total:
            values = list(np.cumsum(sums) / done)
            label, slope, r2, incs = diagnose(cut, values, tol, exp_threshold, fit_threshold, fit_tail)
            partial = DivergenceDiagnosis(cut, values, slope, r2, "Inconclusive", incs, done, settings)
            raise BudgetExceeded(f"quadrature stopped after {done} of {n_total} points", partial)
    values = list(np.cumsum(sums) / n_total)
    label, slope, r2, incs = diagnose(cut, values, tol, exp_threshold, fit_threshold, fit_tail)
    return DivergenceDiagnosis(cut, values, slope, r2, label, incs, n_total, settings)
