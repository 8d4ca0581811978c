"""Hermite polynomials, double factorials and chaos-series functionals.

Normalisation: ``H_n(x) = (-1)^n / n! e^{x²/2} dⁿ/dxⁿ e^{-x²/2}``, i.e. the
probabilists' polynomial divided by ``n!``.  With it
``e^{zx - z²/2} = Σ zⁿ H_n(x)`` and ``E[H_n(ξ) H_m(η)] = δ_nm ρⁿ / n!`` for
standard Gaussians with correlation ``ρ``.

For the smoothed local time at level 0 the chaos of order ``2n`` has energy

    E|F_2n|² = (2π)^{-d} ∫∫ c_n(d) R^{2n} / (ab)^{2n+d},

where ``a² = Var X(s) + ε``, ``b² = Var X(t) + ε``, ``R = Cov(X(s), X(t))``
and ``c_n(d) = [xⁿ](1-x)^{-d/2}`` is the composition sum of double-factorial
ratios.  Summing ``2n E|F_2n|²`` gives ``Φ(1)``; the generating function
collapses it to ``(2π)^{-d} d ∫∫ R² / (a²b² - R²)^{d/2+1}``.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.special import gammaln

from .errors import DomainError, NotConverged, SingularDomain
from .fields import CovKernel, pair_stats, substreams
from .pairquad import PairRule, default_rule

# ---------------------------------------------------------------------------
# Hermite polynomials
# ---------------------------------------------------------------------------


def hermite(n: int, x):
    """``H_n(x)`` by ``H_{k+1} = (x H_k - H_{k-1}) / (k+1)``."""
    if n < 0:
        raise DomainError("degree must be nonnegative")
    x = np.asarray(x, dtype=float)
    h_prev, h = np.zeros_like(x), np.ones_like(x)
    for k in range(n):
        h_prev, h = h, (x * h - h_prev) / (k + 1)
    return float(h) if h.ndim == 0 else h


def hermite_definition(n: int, x):
    """``H_n`` from the monomial expansion of ``He_n`` (independent of the recurrence)."""
    if n < 0:
        raise DomainError("degree must be nonnegative")
    coef = np.zeros(n + 1)
    coef[n] = 1.0
    mono = np.polynomial.hermite_e.herme2poly(coef) / math.factorial(n)
    out = np.polynomial.polynomial.polyval(np.asarray(x, float), mono)
    return float(out) if np.ndim(out) == 0 else out


def hermite_genfun(z, x, n_max: int):
    """Partial sum ``Σ_{n<=n_max} zⁿ H_n(x)``."""
    x = np.asarray(x, float)
    total = np.zeros(np.broadcast(np.asarray(z, float), x).shape)
    h_prev, h = np.zeros_like(x), np.ones_like(x)
    zn = np.ones_like(total)
    for k in range(n_max + 1):
        total = total + zn * h
        h_prev, h = h, (x * h - h_prev) / (k + 1)
        zn = zn * z
    return float(total) if total.ndim == 0 else total


def hermite_from_genfun(n: int, x, points: int = 64, radius: float = 1.0):
    """Coefficient of ``zⁿ`` in ``e^{zx - z²/2}`` by the trapezoid rule on ``|z| = radius``."""
    if n < 0:
        raise DomainError("degree must be nonnegative")
    x = np.asarray(x, float)
    z = radius * np.exp(2j * np.pi * np.arange(points) / points)
    vals = np.exp(np.multiply.outer(x, z) - 0.5 * z * z) * z ** (-n)
    out = vals.mean(axis=-1).real
    return float(out) if out.ndim == 0 else out


def hermite_orthogonality_mc(n: int, m: int, rho: float, replicates: int = 100_000, seed: int = 0):
    """Monte Carlo ``E[H_n(ξ) H_m(η)]`` with ``corr(ξ, η) = rho``; returns ``(estimate, se)``."""
    if not -1.0 <= rho <= 1.0:
        raise DomainError("rho must lie in [-1, 1]")
    if replicates < 2:
        raise DomainError("need at least two replicates")
    g1, g2 = substreams(seed, 2)
    xi = g1.standard_normal(replicates)
    eta = rho * xi + math.sqrt(max(0.0, 1.0 - rho * rho)) * g2.standard_normal(replicates)
    prod = hermite(n, xi) * hermite(m, eta)
    return float(prod.mean()), float(prod.std(ddof=1) / math.sqrt(replicates))


def hermite_expected(n: int, m: int, rho: float) -> float:
    """``δ_nm ρⁿ / n!``."""
    return rho**n / math.factorial(n) if n == m else 0.0


# ---------------------------------------------------------------------------
# double factorials and compositions
# ---------------------------------------------------------------------------


def log_double_factorial(k: int, variant: str = "odd") -> float:
    """``log (2k-1)!!`` (``variant="odd"``) or ``log (2k)!!`` (``"even"``)."""
    if k < 0:
        raise DomainError("k must be nonnegative")
    if variant == "odd":
        return float(gammaln(2 * k + 1) - k * math.log(2.0) - gammaln(k + 1))
    if variant == "even":
        return float(k * math.log(2.0) + gammaln(k + 1))
    raise ValueError("variant must be 'odd' or 'even'")


def double_factorial(k: int, variant: str = "odd") -> int:
    """Exact integer ``(2k-1)!!`` or ``(2k)!!``."""
    start = 1 if variant == "odd" else 2
    return math.prod(range(start, 2 * k + 1, 2))


@functools.lru_cache(maxsize=None)
def composition_coeff_bruteforce(n: int, d: int) -> Fraction:
    """``Σ_{k_1+...+k_d=n} Π (2k_i-1)!!/(2k_i)!!`` by enumeration, in exact arithmetic."""
    if n < 0 or d < 1:
        raise DomainError("need n >= 0 and d >= 1")
    ratio = [Fraction(double_factorial(k, "odd"), double_factorial(k, "even")) for k in range(n + 1)]
    total = Fraction(0)
    for ks in itertools.product(range(n + 1), repeat=d - 1):
        last = n - sum(ks)
        if last < 0:
            continue
        term = ratio[last]
        for k in ks:
            term *= ratio[k]
        total += term
    return total


def composition_coeffs(n_max: int, d: float) -> np.ndarray:
    """``c_0..c_{n_max}`` of ``(1-x)^{-d/2}`` by ``c_n = c_{n-1}(d/2 + n - 1)/n``."""
    n = np.arange(1, n_max + 1)
    return np.concatenate([[1.0], np.cumprod((0.5 * d + n - 1) / n)])


def _series_tail(x: float, d: float, T: int, cT1: float) -> float:
    """Bound on ``Σ_{n>T} 2n c_n xⁿ`` given ``c_{T+1}``.

    Successive terms have ratio ``x (n + d/2) / n``, at most
    ``q = x (1 + d / (2(T+1)))`` beyond ``T``.
    """
    if x <= 0:
        return 0.0
    q = x * (1.0 + d / (2.0 * (T + 1)))
    if q >= 1.0:
        return math.inf
    log_first = math.log(2.0 * (T + 1) * cT1) + (T + 1) * math.log(x)
    return math.exp(log_first) / (1.0 - q)


def chenyan_closed(x, d):
    """``Σ_n 2n c_n(d) xⁿ = d x (1-x)^{-(d/2+1)}``."""
    x = np.asarray(x, float)
    return d * x * (1.0 - x) ** (-(0.5 * d + 1.0))


def chenyan_lhs(x: float, d: int, trunc_n: int | None = None, tol: float = 1e-12,
                max_terms: int = 200_000) -> float:
    """Partial sum ``Σ_{n<=trunc_n} 2n c_n(d) xⁿ``.

    Without ``trunc_n`` the truncation is the first ``n`` whose geometric tail
    bound drops below ``tol`` times the partial sum.  For ``n <= 20`` the
    coefficients are also enumerated exactly and the two partial sums must
    agree to ``1e-10``.
    """
    if not 0.0 <= x < 1.0:
        raise DomainError("x must lie in [0, 1)")
    if d < 1:
        raise DomainError("d must be positive")
    if x == 0.0:
        return 0.0
    if trunc_n is None:
        # enough terms for x^n n^{d/2} to fall far below tol
        guess = 64 + 4.0 * (-math.log(tol) + 5.0 * d) / -math.log(x)
        limit = int(min(max_terms, guess))
    else:
        limit = int(trunc_n)
    c = composition_coeffs(limit + 1, d)
    n = np.arange(1, limit + 1)
    with np.errstate(under="ignore"):
        terms = 2.0 * n * c[1:limit + 1] * np.exp(n * math.log(x))
    partial = np.cumsum(terms)
    if trunc_n is None:
        T = None
        for k in range(1, limit + 1, 16):
            if _series_tail(x, d, k, c[k + 1]) <= tol * partial[k - 1]:
                T = k
                break
        if T is None:
            raise NotConverged(f"Chen-Yan series at x={x} needs more than {max_terms} terms")
    else:
        T = limit
        tail = _series_tail(x, d, T, c[T + 1])
        if T > 0 and tail > tol * partial[T - 1]:
            raise NotConverged(f"tail bound {tail:.3e} above tolerance at trunc_n={T}")
        if T == 0:
            return 0.0
    value = float(partial[T - 1])

    k = min(T, 20)
    brute = sum(2 * j * float(composition_coeff_bruteforce(j, d)) * x**j for j in range(1, k + 1))
    if abs(brute - float(partial[k - 1])) > 1e-10 * max(1.0, abs(brute)):
        raise NotConverged("composition enumeration and recurrence disagree")
    return value


def chenyan_ratio_scan(d: int, grid, **kw):
    """``(min, max)`` of ``chenyan_lhs / (x (1-x)^{-(d/2+1)})`` over ``grid``."""
    xs = np.asarray(grid, float)
    if xs.size == 0 or np.any(xs <= 0) or np.any(xs >= 1):
        raise DomainError("grid must lie inside (0, 1)")
    ratios = [chenyan_lhs(float(x), d, **kw) / (x * (1.0 - x) ** (-(0.5 * d + 1.0))) for x in xs]
    return float(min(ratios)), float(max(ratios))


# ---------------------------------------------------------------------------
# chaos series of the smoothed local time
# ---------------------------------------------------------------------------


@dataclass
class PhiSeries:
    """Even-order chaos terms of ``Φ(u) = Σ n u^{n-1} E|F_n|²`` at level 0.

    ``terms[i] = (2n, 2n E|F_2n|²)``; ``partial_sums[i]`` is ``Φ(1)`` truncated
    after ``terms[i]``.
    """

    d: int
    eps: float
    terms: list
    partial_sums: list
    truncation_n: int
    tail_estimate: float
    rho_max: float
    energy0: float
    resummed: float
    rule: str
    kernel_id: str = ""
    converged: bool = True
    extra: dict = field(default_factory=dict)

    @property
    def value(self) -> float:
        return self.partial_sums[-1] if self.partial_sums else 0.0

    def phi(self, u: float) -> float:
        """Truncated ``Φ(u)``."""
        if not 0.0 <= u <= 1.0:
            raise DomainError("u must lie in [0, 1]")
        return float(sum(v * u ** (k - 1) for k, v in self.terms))

    def energy(self) -> float:
        """Truncated ``Σ_n E|F_n|²``, which is ``E L_ε(0)²`` in the limit."""
        return float(self.energy0 + sum(v / k for k, v in self.terms))

    def to_dict(self):
        return {
            "kernel": self.kernel_id,
            "d": self.d,
            "eps": self.eps,
            "terms": [[int(k), float(v)] for k, v in self.terms],
            "partial_sums": [float(v) for v in self.partial_sums],
            "truncation_n": self.truncation_n,
            "tail_estimate": float(self.tail_estimate),
            "rho_max": float(self.rho_max),
            "phi_1": self.value,
            "resummed": float(self.resummed),
            "energy": self.energy(),
            "rule": self.rule,
            "converged": self.converged,
        }


def _pair_moments(kernel: CovKernel, rule: PairRule, eps1: float, eps2: float | None = None):
    """``(a², b², R, a²b² - R²)`` at the rule nodes, the last one without cancellation."""
    eps2 = eps1 if eps2 is None else eps2
    vs, vt, cov, det, _ = pair_stats(kernel, rule.P, rule.Q)
    a2 = vs + eps1
    b2 = vt + eps2
    gdet = det + eps1 * vt + eps2 * vs + eps1 * eps2
    return a2, b2, cov, gdet


def phi_series(kernel: CovKernel, d: int, eps: float, rule: PairRule | None = None,
               trunc_n: int | None = None, tol: float = 1e-8, max_terms: int = 20_000,
               strict: bool = False) -> PhiSeries:
    """Chaos terms of ``L_ε(0)`` and their weighted partial sums.

    ``trunc_n`` counts even chaos orders (``n`` terms means orders
    ``2, 4, ..., 2n``).  Without it the series is extended until the geometric
    tail bound falls below ``tol`` times the partial sum, else
    :class:`NotConverged`.  With ``strict`` the same test is applied to a given
    ``trunc_n``.  ``eps = 0`` needs a rule that excises the diagonal.
    """
    if d < 1:
        raise DomainError("d must be positive")
    if eps < 0:
        raise DomainError("eps must be nonnegative")
    rule = rule or default_rule(kernel)
    a2, b2, R, gdet = _pair_moments(kernel, rule, eps)
    ok = (a2 > 0) & (b2 > 0)
    if not np.all(ok) or np.any(gdet <= 0):
        raise SingularDomain("pair covariance degenerate at a quadrature node; excise the singular set")
    x = R * R / (a2 * b2)
    x_max = float(x.max())
    if x_max >= 1.0:
        raise SingularDomain(f"rho_max = {math.sqrt(x_max):.6f} >= 1 on the quadrature grid")
    base = (2 * math.pi) ** (-d) * rule.w * (a2 * b2) ** (-0.5 * d)
    energy0 = float(base.sum())
    resummed = float(((2 * math.pi) ** (-d) * d * rule.w * R * R * gdet ** (-(0.5 * d + 1))).sum())

    limit = max_terms if trunc_n is None else int(trunc_n)
    c = composition_coeffs(limit + 1, d)
    terms, partial = [], []
    v = base.copy()
    running = 0.0
    T = 0
    tail = _series_tail(x_max, d, 0, c[1]) * energy0
    for n in range(1, limit + 1):
        v *= x * ((0.5 * d + n - 1) / n)
        t = float(2 * n * v.sum())
        running += t
        terms.append((2 * n, t))
        partial.append(running)
        T = n
        if trunc_n is None and n % 8 == 0:
            tail = _series_tail(x_max, d, n, c[n + 1]) * energy0
            if tail <= tol * running:
                break
    tail = _series_tail(x_max, d, T, c[T + 1]) * energy0
    converged = T > 0 and tail <= tol * max(running, 1e-300)
    if not converged and (trunc_n is None or (strict and T > 0)):
        raise NotConverged(f"Phi series tail bound {tail:.3e} after {T} terms (rho_max^2 = {x_max:.6f})")
    return PhiSeries(int(d), float(eps), terms, partial, T, float(tail), math.sqrt(x_max), energy0,
                     resummed, rule.kind, kernel.kernel_id, bool(converged))


def abs_moment_coeff(m: int, d: float) -> float:
    """``E|⟨G, G'⟩|^m / m!`` for independent standard Gaussian vectors in ``R^d``.

    ``⟨G, G'⟩`` given ``G`` is ``N(0, ‖G‖²)``, so the moment factors into
    ``E|Z|^m · E χ_d^m``.  For even ``m = 2n`` this equals ``c_n(d)``.
    """
    if m < 0:
        raise DomainError("m must be nonnegative")
    log = (m * math.log(2.0) + gammaln(0.5 * (m + 1)) + gammaln(0.5 * (d + m))
           - 0.5 * math.log(math.pi) - gammaln(0.5 * d) - gammaln(m + 1))
    return float(math.exp(log))


def phi_bound(kernel: CovKernel, d: int, eps: float, rule: PairRule | None = None,
              trunc_n: int | None = None, tol: float = 1e-8, max_terms: int = 40_000) -> PhiSeries:
    """Upper bound on ``Φ(1)`` valid at every level ``y``.

    Replacing ``e^{-i⟨ξ-η, y⟩}`` and ``⟨ξ, η⟩^m`` by their absolute values
    gives terms ``m (2π)^{-d} ∫∫ κ_m(d) |R|^m / (ab)^{m+d}`` over all orders,
    with ``κ_m`` from :func:`abs_moment_coeff`.  Even orders coincide with the
    level-0 series.  This is a boundedness check, not a value.

    ``terms`` lists ``(m, term)`` for ``m = 1..trunc_n``; the tail bound uses
    ``term_{m+2} / term_m = ρ² (m + d) / m`` on each parity chain.
    """
    if d < 1:
        raise DomainError("d must be positive")
    if eps < 0:
        raise DomainError("eps must be nonnegative")
    rule = rule or default_rule(kernel)
    a2, b2, R, gdet = _pair_moments(kernel, rule, eps)
    if np.any(a2 <= 0) or np.any(b2 <= 0) or np.any(gdet <= 0):
        raise SingularDomain("pair covariance degenerate at a quadrature node; excise the singular set")
    ab = np.sqrt(a2 * b2)
    rho = np.abs(R) / ab
    x_max = float((rho * rho).max())
    if x_max >= 1.0:
        raise SingularDomain(f"rho_max = {math.sqrt(x_max):.6f} >= 1 on the quadrature grid")
    base = (2 * math.pi) ** (-d) * rule.w * ab ** (-float(d))
    energy0 = float(base.sum())
    limit = max_terms if trunc_n is None else int(trunc_n)

    def chain_tail(m, last):
        # node-wise term_{m+2}/term_m <= ρ_max² (1 + d/m), and the factor decreases along the chain
        q = x_max * (1.0 + d / m)
        if last <= 0:
            return 0.0
        return math.inf if q >= 1.0 else last * q / (1.0 - q)

    terms, partial = [], []
    running = 0.0
    pw = np.ones_like(rho)
    tail = 0.0 if x_max == 0 else math.inf
    for m in range(1, limit + 1):
        with np.errstate(under="ignore"):
            pw = pw * rho
        t = float(m * abs_moment_coeff(m, d) * np.sum(base * pw))
        running += t
        terms.append((m, t))
        partial.append(running)
        if m >= 2 and ((trunc_n is None and m % 16 == 0) or m == limit):
            tail = chain_tail(m, t) + chain_tail(m - 1, terms[-2][1])
            if trunc_n is None and tail <= tol * running:
                break
    T = len(terms)
    converged = T > 0 and tail <= tol * max(running, 1e-300)
    if not converged and trunc_n is None:
        raise NotConverged(f"Phi bound tail {tail:.3e} after {T} terms (rho_max^2 = {x_max:.6f})")
    return PhiSeries(int(d), float(eps), terms, partial, T, float(tail), math.sqrt(x_max), energy0,
                     math.nan, rule.kind, kernel.kernel_id, bool(converged), {"bound": True})

