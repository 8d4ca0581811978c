"""Covariance models for anisotropic Gaussian random fields.

Every kernel works on arrays of parameter points with shape ``(..., dim)``
and exposes three vectorised primitives:

``cov(s, t)``
    the covariance ``R(s, t)``;
``var(s)``
    ``R(s, s)``;
``incr_var(s, t)``
    ``E[(X(s) - X(t))^2]``, computed without the cancellation of
    ``R(s,s) + R(t,t) - 2R(s,t)`` wherever the model allows it.

Pair determinants are assembled from ``var`` and ``incr_var`` (see
:func:`pair_stats`), which keeps them accurate down to separations of about
``1e-9`` and is what the singular-integral machinery relies on.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import linalg
from scipy.stats import qmc

from .errors import (
    ConsistencyError,
    DimensionMismatch,
    DomainError,
    InsufficientSamples,
    NotPSD,
)

JITTER_LADDER = (1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)
CLAMP_REL = 1e-12


# ---------------------------------------------------------------------------
# Hurst data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HurstVector:
    """Anisotropy index ``H`` in ``(0, 1)^N``."""

    h: tuple[float, ...]

    def __init__(self, h):
        vals = (float(h),) if np.isscalar(h) else tuple(float(x) for x in h)
        if len(vals) == 0:
            raise DomainError("HurstVector needs at least one entry")
        for x in vals:
            if not 0.0 < x < 1.0:
                raise DomainError(f"Hurst index {x} outside (0, 1)")
        object.__setattr__(self, "h", vals)

    def __len__(self):
        return len(self.h)

    def __iter__(self):
        return iter(self.h)

    def __getitem__(self, i):
        return self.h[i]

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.h, dtype=float)

    def q_sum(self) -> float:
        """Sum of the reciprocals ``1/H_j``."""
        return float(sum(1.0 / x for x in self.h))

    def wedge(self, other: "HurstVector") -> "HurstVector":
        if len(other) != len(self):
            raise DimensionMismatch("wedge needs equal lengths")
        return HurstVector([min(a, b) for a, b in zip(self.h, other.h)])


def as_hurst(h) -> HurstVector:
    return h if isinstance(h, HurstVector) else HurstVector(h)


# ---------------------------------------------------------------------------
# scalar kernel formulas
# ---------------------------------------------------------------------------


def _check_unit(x, name):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x > 1):
        raise DomainError(f"{name} must lie in [0, 1]")
    return x


def cov_fbm(s, t, h):
    """Fractional Brownian motion covariance ``(s^2h + t^2h - |s-t|^2h) / 2``."""
    if not 0.0 < h < 1.0:
        raise DomainError(f"Hurst index {h} outside (0, 1)")
    s = _check_unit(s, "s")
    t = _check_unit(t, "t")
    two_h = 2.0 * h
    out = 0.5 * (s**two_h + t**two_h - np.abs(s - t) ** two_h)
    return float(out) if out.ndim == 0 else out


def _match(s, t, h):
    s = np.atleast_1d(np.asarray(s, dtype=float))
    t = np.atleast_1d(np.asarray(t, dtype=float))
    h = as_hurst(h)
    if s.shape[-1] != len(h) or t.shape[-1] != len(h):
        raise DimensionMismatch(
            f"points of length {s.shape[-1]}/{t.shape[-1]} vs N={len(h)}"
        )
    return s, t, h


def cov_fbsheet(s, t, h):
    """Product kernel of the fractional Brownian sheet."""
    s, t, h = _match(s, t, h)
    out = np.ones(np.broadcast_shapes(s.shape[:-1], t.shape[:-1]))
    for j, hj in enumerate(h):
        out = out * cov_fbm(s[..., j], t[..., j], hj)
    return float(out) if out.ndim == 0 else out


def cov_additive_fbm(s, t, h):
    """Sum kernel of ``B^{H_1}(t_1) + ... + B^{H_N}(t_N)``."""
    s, t, h = _match(s, t, h)
    out = np.zeros(np.broadcast_shapes(s.shape[:-1], t.shape[:-1]))
    for j, hj in enumerate(h):
        out = out + cov_fbm(s[..., j], t[..., j], hj)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# kernel objects
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ZeroSet:
    """A set of parameters where pair covariances degenerate.

    ``kind == "vanish"``: the field is zero once every coordinate listed in
    ``a`` sits at its lower domain bound (which must be 0).
    ``kind == "coincide"``: the field is zero where coordinates ``a`` equal
    coordinates ``b`` (e.g. the diagonal ``s = t`` of ``X(s) - X(t)``).
    """

    kind: str
    a: tuple[int, ...]
    b: tuple[int, ...] = ()


def _pts(x, dim):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.shape[-1] != dim:
        if dim == 1:
            x = x[..., None]
        else:
            raise DimensionMismatch(f"expected points of dimension {dim}, got {x.shape}")
    return x


class CovKernel:
    """Base class: a covariance ``R`` on a rectangle ``prod [a_j, b_j]``."""

    model = "abstract"

    def __init__(self, dim, lower=None, upper=None, axes=None):
        self.dim = int(dim)
        if self.dim < 1:
            raise DomainError("parameter dimension must be positive")
        self.lower = np.zeros(self.dim) if lower is None else np.asarray(lower, float).reshape(self.dim)
        self.upper = np.ones(self.dim) if upper is None else np.asarray(upper, float).reshape(self.dim)
        if np.any(self.lower < 0) or np.any(self.upper > 1) or np.any(self.upper <= self.lower):
            raise DomainError("domain must be a non-degenerate sub-rectangle of [0,1]^N")
        self.axes = tuple(range(self.dim)) if axes is None else tuple(axes)

    # -- primitives --------------------------------------------------------
    def cov(self, s, t):
        raise NotImplementedError

    def var(self, s):
        s = _pts(s, self.dim)
        return self.cov(s, s)

    def incr_var(self, s, t):
        s, t = _pts(s, self.dim), _pts(t, self.dim)
        return self.var(s) + self.var(t) - 2.0 * self.cov(s, t)

    def zero_sets(self) -> list[ZeroSet]:
        return []

    def axis_hurst(self):
        """Per-coordinate Hurst indices when the model has them, else ``None``."""
        return None

    def reflections(self) -> list[tuple[int, ...]]:
        """Coordinate permutations ``tau`` with ``X(tau p) = -X(p)``."""
        return []

    # -- conveniences ------------------------------------------------------
    def __call__(self, s, t):
        out = self.cov(_pts(s, self.dim), _pts(t, self.dim))
        return float(out) if np.ndim(out) == 0 or np.size(out) == 1 else out

    @property
    def volume(self) -> float:
        return float(np.prod(self.upper - self.lower))

    def with_domain(self, lower, upper):
        new = object.__new__(type(self))
        new.__dict__.update(self.__dict__)
        CovKernel.__init__(new, self.dim, lower, upper, self.axes)
        return new

    def describe(self) -> dict:
        return {
            "model": self.model,
            "N": self.dim,
            "domain": [[float(a), float(b)] for a, b in zip(self.lower, self.upper)],
        }

    @property
    def kernel_id(self) -> str:
        d = self.describe()
        parts = [d["model"]]
        for key in ("H", "K"):
            if key in d:
                parts.append(key + "=" + ",".join(f"{x:g}" for x in d[key]))
        parts.append("I=" + ";".join(f"{a:g}-{b:g}" for a, b in d["domain"]))
        return "|".join(parts)

    def __repr__(self):
        return f"<{type(self).__name__} {self.kernel_id}>"


class FBMKernel(CovKernel):
    model = "fbm"

    def __init__(self, h, lower=0.0, upper=1.0):
        self.h = float(h) if np.isscalar(h) else float(as_hurst(h)[0])
        as_hurst(self.h)
        super().__init__(1, [lower], [upper])

    def cov(self, s, t):
        s, t = _pts(s, 1)[..., 0], _pts(t, 1)[..., 0]
        two_h = 2 * self.h
        return 0.5 * (np.abs(s) ** two_h + np.abs(t) ** two_h - np.abs(s - t) ** two_h)

    def var(self, s):
        return np.abs(_pts(s, 1)[..., 0]) ** (2 * self.h)

    def incr_var(self, s, t):
        return np.abs(_pts(s, 1)[..., 0] - _pts(t, 1)[..., 0]) ** (2 * self.h)

    def zero_sets(self):
        return [ZeroSet("vanish", (0,))] if self.lower[0] == 0 else []

    def axis_hurst(self):
        return np.array([self.h])

    def describe(self):
        return {**super().describe(), "H": [self.h]}


class FBSheetKernel(CovKernel):
    model = "fbsheet"

    def __init__(self, h, lower=None, upper=None):
        self.hurst = as_hurst(h)
        super().__init__(len(self.hurst), lower, upper)

    def _factors(self, s, t):
        s, t = _pts(s, self.dim), _pts(t, self.dim)
        two_h = 2 * self.hurst.array
        a = np.abs(s) ** two_h
        b = np.abs(t) ** two_h
        e = np.abs(s - t) ** two_h
        return a, b, e

    def cov(self, s, t):
        a, b, e = self._factors(s, t)
        return np.prod(0.5 * (a + b - e), axis=-1)

    def var(self, s):
        s = _pts(s, self.dim)
        return np.prod(np.abs(s) ** (2 * self.hurst.array), axis=-1)

    def incr_var(self, s, t):
        # prod(a) + prod(b) - 2 prod(c) expanded around m = (a+b)/2 so that
        # every surviving term carries a small factor (h_j or e_j)
        a, b, e = self._factors(s, t)
        m = 0.5 * (a + b)
        hh = 0.5 * (a - b)
        n = self.dim
        total = np.zeros(np.broadcast_shapes(a.shape, b.shape)[:-1])
        for r in range(2, n + 1, 2):
            for S in itertools.combinations(range(n), r):
                term = np.ones_like(total)
                for j in range(n):
                    term = term * (hh[..., j] if j in S else m[..., j])
                total = total + term
        for r in range(1, n + 1):
            for T in itertools.combinations(range(n), r):
                term = np.ones_like(total)
                for j in range(n):
                    term = term * (-0.5 * e[..., j] if j in T else m[..., j])
                total = total - term
        return np.maximum(2.0 * total, 0.0)

    def zero_sets(self):
        return [ZeroSet("vanish", (j,)) for j in range(self.dim) if self.lower[j] == 0]

    def axis_hurst(self):
        return self.hurst.array

    def describe(self):
        return {**super().describe(), "H": list(self.hurst.h)}


class AdditiveFBMKernel(CovKernel):
    model = "additive"

    def __init__(self, h, lower=None, upper=None):
        self.hurst = as_hurst(h)
        super().__init__(len(self.hurst), lower, upper)

    def cov(self, s, t):
        s, t = _pts(s, self.dim), _pts(t, self.dim)
        two_h = 2 * self.hurst.array
        return np.sum(0.5 * (np.abs(s) ** two_h + np.abs(t) ** two_h - np.abs(s - t) ** two_h), axis=-1)

    def var(self, s):
        s = _pts(s, self.dim)
        return np.sum(np.abs(s) ** (2 * self.hurst.array), axis=-1)

    def incr_var(self, s, t):
        s, t = _pts(s, self.dim), _pts(t, self.dim)
        return np.sum(np.abs(s - t) ** (2 * self.hurst.array), axis=-1)

    def zero_sets(self):
        if np.all(self.lower == 0):
            return [ZeroSet("vanish", tuple(range(self.dim)))]
        return []

    def axis_hurst(self):
        return self.hurst.array

    def describe(self):
        return {**super().describe(), "H": list(self.hurst.h)}


class CustomKernel(CovKernel):
    """User-supplied covariance; ``evaluator(s, t)`` takes two 1-D points."""

    model = "custom"

    def __init__(self, evaluator: Callable, dim=1, lower=None, upper=None, zero_sets=(), name="custom"):
        self.evaluator = evaluator
        self._zero_sets = list(zero_sets)
        self.name = name
        super().__init__(dim, lower, upper)

    def cov(self, s, t):
        s, t = _pts(s, self.dim), _pts(t, self.dim)
        s, t = np.broadcast_arrays(s, t)
        flat_s = s.reshape(-1, self.dim)
        flat_t = t.reshape(-1, self.dim)
        vals = np.fromiter(
            (self.evaluator(a, b) for a, b in zip(flat_s, flat_t)),
            dtype=float,
            count=len(flat_s),
        )
        return vals.reshape(s.shape[:-1])

    def zero_sets(self):
        return list(self._zero_sets)

    def describe(self):
        return {**super().describe(), "name": self.name}


# -- derived fields ---------------------------------------------------------


class CollisionKernel(CovKernel):
    """``Z(t) = X^H(t) - X^K(t)`` for independent fields on one rectangle."""

    model = "collision"

    def __init__(self, kh: CovKernel, kk: CovKernel):
        if kh.dim != kk.dim:
            raise DimensionMismatch("collision needs equal parameter dimensions")
        self.kh, self.kk = kh, kk
        lower = np.maximum(kh.lower, kk.lower)
        upper = np.minimum(kh.upper, kk.upper)
        super().__init__(kh.dim, lower, upper)

    def cov(self, s, t):
        return self.kh.cov(s, t) + self.kk.cov(s, t)

    def var(self, s):
        return self.kh.var(s) + self.kk.var(s)

    def incr_var(self, s, t):
        return self.kh.incr_var(s, t) + self.kk.incr_var(s, t)

    def zero_sets(self):
        a = {z for z in self.kh.zero_sets()}
        return [z for z in self.kk.zero_sets() if z in a]

    def axis_hurst(self):
        a, b = self.kh.axis_hurst(), self.kk.axis_hurst()
        return None if a is None or b is None else np.minimum(a, b)

    def describe(self):
        return {**super().describe(), "H": self.kh.describe().get("H"), "K": self.kk.describe().get("H"),
                "parts": [self.kh.describe(), self.kk.describe()]}


class IntersectionKernel(CovKernel):
    """``U(s, t) = X^H(s) - X^K(t)`` on the product of the two rectangles."""

    model = "intersection"

    def __init__(self, kh: CovKernel, kk: CovKernel):
        self.kh, self.kk = kh, kk
        self.n1, self.n2 = kh.dim, kk.dim
        axes = tuple(("H", a) for a in kh.axes) + tuple(("K", a) for a in kk.axes)
        super().__init__(
            self.n1 + self.n2,
            np.concatenate([kh.lower, kk.lower]),
            np.concatenate([kh.upper, kk.upper]),
            axes,
        )

    def _split(self, p):
        p = _pts(p, self.dim)
        return p[..., : self.n1], p[..., self.n1 :]

    def cov(self, p, q):
        s, t = self._split(p)
        s2, t2 = self._split(q)
        return self.kh.cov(s, s2) + self.kk.cov(t, t2)

    def var(self, p):
        s, t = self._split(p)
        return self.kh.var(s) + self.kk.var(t)

    def incr_var(self, p, q):
        s, t = self._split(p)
        s2, t2 = self._split(q)
        return self.kh.incr_var(s, s2) + self.kk.incr_var(t, t2)

    def zero_sets(self):
        out = []
        for zh in self.kh.zero_sets():
            for zk in self.kk.zero_sets():
                if zh.kind == zk.kind == "vanish":
                    out.append(ZeroSet("vanish", zh.a + tuple(self.n1 + i for i in zk.a)))
        return out

    def axis_hurst(self):
        a, b = self.kh.axis_hurst(), self.kk.axis_hurst()
        return None if a is None or b is None else np.concatenate([a, b])

    def describe(self):
        return {**super().describe(), "H": self.kh.describe().get("H"), "K": self.kk.describe().get("H"),
                "parts": [self.kh.describe(), self.kk.describe()]}


class SelfIntersectionKernel(CovKernel):
    """``V(s, t) = X(s) - X(t)`` with ``s`` in ``I`` and ``t`` in ``J``.

    All covariances are polarised from the base increment variance, e.g.
    ``Cov(V(s,t), V(s',t')) = (σ²(s,t') + σ²(t,s') - σ²(s,s') - σ²(t,t')) / 2``.
    """

    model = "self_intersection"

    def __init__(self, base: CovKernel, I=None, J=None):
        self.base = base
        n = base.dim
        I = (base.lower, base.upper) if I is None else I
        J = (base.lower, base.upper) if J is None else J
        self.I = (np.asarray(I[0], float).reshape(n), np.asarray(I[1], float).reshape(n))
        self.J = (np.asarray(J[0], float).reshape(n), np.asarray(J[1], float).reshape(n))
        self.n = n
        super().__init__(
            2 * n,
            np.concatenate([self.I[0], self.J[0]]),
            np.concatenate([self.I[1], self.J[1]]),
            base.axes + base.axes,
        )

    def _split(self, p):
        p = _pts(p, self.dim)
        return p[..., : self.n], p[..., self.n :]

    def cov(self, p, q):
        s, t = self._split(p)
        s2, t2 = self._split(q)
        sig = self.base.incr_var
        return 0.5 * (sig(s, t2) + sig(t, s2) - sig(s, s2) - sig(t, t2))

    def cov_fourterm(self, p, q):
        """Same covariance written with ``R`` (used as a cross-check)."""
        s, t = self._split(p)
        s2, t2 = self._split(q)
        R = self.base.cov
        return R(s, s2) - R(s, t2) - R(t, s2) + R(t, t2)

    def var(self, p):
        s, t = self._split(p)
        return self.base.incr_var(s, t)

    def incr_var(self, p, q):
        s, t = self._split(p)
        s2, t2 = self._split(q)
        sig = self.base.incr_var
        return sig(s, s2) + sig(t, t2) - sig(s2, t) - sig(s, t2) + sig(s2, t2) + sig(s, t)

    def zero_sets(self):
        n = self.n
        return [ZeroSet("coincide", tuple(range(n)), tuple(range(n, 2 * n)))]

    def reflections(self):
        n = self.n
        return [tuple(range(n, 2 * n)) + tuple(range(n))]

    def axis_hurst(self):
        a = self.base.axis_hurst()
        return None if a is None else np.concatenate([a, a])

    def describe(self):
        return {
            **super().describe(),
            "H": self.base.describe().get("H"),
            "base": self.base.describe(),
            "I": [[float(a), float(b)] for a, b in zip(*self.I)],
            "J": [[float(a), float(b)] for a, b in zip(*self.J)],
        }


def derived_kernel(kind: str, base: CovKernel, other: CovKernel | None = None, I=None, J=None) -> CovKernel:
    """Covariance of the difference field behind a collision, intersection
    or self-intersection local time."""
    kind = kind.lower()
    if kind in ("collision", "z"):
        if other is None:
            raise DimensionMismatch("collision needs two kernels")
        return CollisionKernel(base, other)
    if kind in ("intersection", "u"):
        if other is None:
            raise DimensionMismatch("intersection needs two kernels")
        return IntersectionKernel(base, other)
    if kind in ("self_intersection", "self", "v"):
        return SelfIntersectionKernel(base, I, J)
    raise ValueError(f"unknown derived kernel kind {kind!r}")


def kernel_from_config(cfg: dict) -> CovKernel:
    """Build a kernel from ``{"model", "H", "N", "domain"}``."""
    model = str(cfg.get("model", "fbm")).lower()
    h = cfg.get("H", cfg.get("h"))
    if h is None:
        raise DomainError("kernel config needs H")
    h = as_hurst(h)
    n = int(cfg.get("N", len(h)))
    if len(h) == 1 and n > 1:
        h = HurstVector([h[0]] * n)
    if len(h) != n:
        raise DimensionMismatch(f"N={n} but {len(h)} Hurst entries")
    dom = cfg.get("domain")
    lower = upper = None
    if dom is not None:
        dom = np.asarray(dom, float).reshape(n, 2)
        lower, upper = dom[:, 0], dom[:, 1]
    if model == "fbm":
        if n != 1:
            raise DimensionMismatch("fbm is one-parameter; use fbsheet or additive")
        return FBMKernel(h[0], *(() if lower is None else (lower[0], upper[0])))
    if model in ("fbsheet", "fbs", "sheet"):
        return FBSheetKernel(h, lower, upper)
    if model in ("additive", "additive_fbm"):
        return AdditiveFBMKernel(h, lower, upper)
    raise DomainError(f"unknown kernel model {model!r} (custom kernels are programmatic only)")


# ---------------------------------------------------------------------------
# linear algebra
# ---------------------------------------------------------------------------


@dataclass
class Gram:
    matrix: np.ndarray
    chol: np.ndarray
    jitter: float


def gram_matrix(kernel: CovKernel, points, jitter: float = 0.0) -> Gram:
    """Gram matrix plus a lower Cholesky factor, escalating diagonal jitter
    ``0 -> 1e-12 -> ... -> 1e-6`` until the factorisation succeeds."""
    if jitter < 0:
        raise DomainError("jitter must be nonnegative")
    pts = _pts(points, kernel.dim).reshape(-1, kernel.dim)
    base = kernel.cov(pts[:, None, :], pts[None, :, :])
    base = 0.5 * (base + base.T)
    for jit in [jitter] + [j for j in JITTER_LADDER if j > jitter]:
        m = base + jit * np.eye(len(pts))
        try:
            c = linalg.cholesky(m, lower=True)
        except linalg.LinAlgError:
            continue
        return Gram(m, c, float(jit))
    raise NotPSD(f"Gram matrix of {kernel!r} not factorisable at jitter {JITTER_LADDER[-1]}")


def cond_var(kernel: CovKernel, t, given=()) -> float:
    """Schur complement ``R(t,t) - r^T G^{-1} r``."""
    t = _pts(t, kernel.dim).reshape(kernel.dim)
    v0 = float(kernel.var(t[None, :])[0])
    given = np.asarray(given, float)
    if given.size == 0:
        return v0
    g = _pts(given, kernel.dim).reshape(-1, kernel.dim)
    G = gram_matrix(kernel, g)
    r = kernel.cov(g, t[None, :])
    w = linalg.solve_triangular(G.chol, r, lower=True)
    v = v0 - float(w @ w)
    return _clamp(v, v0)


def _clamp(v, scale):
    if v >= 0:
        return v
    if v >= -max(CLAMP_REL * scale, 1e-300) or v >= -1e-10 * max(scale, 1.0):
        return 0.0
    raise ConsistencyError(f"conditional variance {v:.3e} below round-off window")


def pair_stats(kernel: CovKernel, s, t):
    """``(var_s, var_t, cov, det, incr)`` for arrays of point pairs.

    ``det = var_s * incr - c^2`` with ``c = Cov(X(s), X(t) - X(s))``; this is
    algebraically ``var_s var_t - cov^2`` but loses far fewer digits near the
    diagonal.
    """
    vs = kernel.var(s)
    vt = kernel.var(t)
    inc = kernel.incr_var(s, t)
    c = 0.5 * (vt - vs - inc)
    det = vs * inc - c * c
    cov = vs + c
    return vs, vt, cov, np.maximum(det, 0.0), inc


def det_cov_pair(kernel: CovKernel, s, t) -> float:
    """``R(s,s) R(t,t) - R(s,t)^2``."""
    s = _pts(s, kernel.dim).reshape(1, kernel.dim)
    t = _pts(t, kernel.dim).reshape(1, kernel.dim)
    return float(pair_stats(kernel, s, t)[3][0])


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


@dataclass
class FieldSample:
    points: np.ndarray
    values: np.ndarray
    seed: int
    kernel_id: str
    jitter: float = 0.0

    def to_csv(self, path=None) -> str:
        """One row per point: parameter coordinates then the ``d`` field values."""
        import csv
        import io

        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        dim, d = self.points.shape[1], self.values.shape[0]
        w.writerow([f"t{i + 1}" for i in range(dim)] + [f"x{j + 1}" for j in range(d)])
        for p, v in zip(self.points, self.values.T):
            w.writerow([repr(float(a)) for a in p] + [repr(float(b)) for b in v])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def substreams(seed: int, n: int) -> list[np.random.Generator]:
    """``n`` independent counter-based generators derived from ``seed``."""
    children = np.random.SeedSequence(int(seed)).spawn(n)
    return [np.random.Generator(np.random.Philox(c)) for c in children]


def sample_field(kernel: CovKernel, points, d: int, seed: int) -> FieldSample:
    """One draw of ``d`` independent copies on ``points``."""
    if d < 1:
        raise DomainError("d must be positive")
    pts = _pts(points, kernel.dim).reshape(-1, kernel.dim)
    G = gram_matrix(kernel, pts)
    rows = [G.chol @ g.standard_normal(len(pts)) for g in substreams(seed, d)]
    return FieldSample(pts, np.vstack(rows), int(seed), kernel.kernel_id, G.jitter)


def sample_paths(chol: np.ndarray, d: int, replicates: int, seed: int, chunk: int = 2048,
                 workers: int = 1) -> np.ndarray:
    """``(replicates, d, n)`` Gaussian draws with covariance ``chol chol^T``.

    Replicates are cut into fixed chunks, each with its own substream, so the
    output does not depend on ``workers``.
    """
    n = chol.shape[0]
    n_chunks = -(-replicates // chunk)
    gens = substreams(seed, n_chunks)
    sizes = [min(chunk, replicates - i * chunk) for i in range(n_chunks)]

    def draw(i):
        z = gens[i].standard_normal((sizes[i], d, n))
        return z @ chol.T

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(draw, range(n_chunks)))
    else:
        parts = [draw(i) for i in range(n_chunks)]
    return np.concatenate(parts, axis=0)


# ---------------------------------------------------------------------------
# condition certification
# ---------------------------------------------------------------------------


@dataclass
class SamplingPlan:
    """Quasi-random tuples plus domain corners.

    ``I`` and ``J`` are the two rectangles for condition C4.
    """

    n: int = 10_000
    seed: int = 0
    corners: bool = True
    floor: float = 1e-8
    I: tuple | None = None
    J: tuple | None = None


@dataclass
class ConditionReport:
    condition: str
    n_pairs_tested: int
    best_upper_constant: float
    best_lower_constant: float
    violations: list = field(default_factory=list)
    passed: bool = False

    def to_dict(self):
        return {
            "condition": self.condition,
            "n_pairs_tested": self.n_pairs_tested,
            "best_upper_constant": self.best_upper_constant,
            "best_lower_constant": self.best_lower_constant,
            "n_violations": len(self.violations),
            "violations": [np.asarray(v).tolist() for v in self.violations[:20]],
            "passed": self.passed,
        }


def _tuples(lower, upper, k, plan: SamplingPlan):
    dim = len(lower)
    sob = qmc.Sobol(d=dim * k, scramble=True, seed=plan.seed)
    m = int(np.ceil(np.log2(max(plan.n, 2))))
    u = sob.random_base2(m)[: plan.n]
    lo = np.tile(lower, k)
    hi = np.tile(upper, k)
    pts = lo + u * (hi - lo)
    if plan.corners:
        verts = np.array(list(itertools.product(*zip(lower, upper))))
        mids = 0.5 * (lower + upper)
        extra = np.vstack([verts, mids[None, :], lower + 0.25 * (upper - lower)])
        combos = np.array(list(itertools.product(range(len(extra)), repeat=k)))
        if len(combos) > 4096:
            combos = combos[:: len(combos) // 4096 + 1]
        corner_pts = extra[combos].reshape(len(combos), dim * k)
        pts = np.vstack([pts, corner_pts])
    return pts.reshape(len(pts), k, dim)


def _batched_condvar(kernel, u, given):
    """Var(X(u) | X(given_1..m)) for batches; pseudo-inverse handles ties."""
    n, m, dim = given.shape
    G = kernel.cov(given[:, :, None, :], given[:, None, :, :])
    r = kernel.cov(given, u[:, None, :])
    v0 = kernel.var(u)
    scale = np.maximum(np.abs(G).max(axis=(1, 2)), 1e-300)
    Gi = np.linalg.pinv(G, rcond=1e-12, hermitian=True)
    v = v0 - np.einsum("ni,nij,nj->n", r, Gi, r)
    return np.where(v < 0, np.where(v > -1e-9 * np.maximum(scale, v0), 0.0, v), v)


def check_condition(kernel: CovKernel, condition: str, h=None, plan: SamplingPlan | None = None,
                    S: Sequence[int] = ()) -> ConditionReport:
    """Empirical ratios of left to right side of C1-C4 on sampled tuples."""
    plan = plan or SamplingPlan()
    cond = condition.upper()
    hv = as_hurst(h) if h is not None else as_hurst(kernel.describe()["H"])
    if len(hv) != kernel.dim:
        raise DimensionMismatch("Hurst vector does not match kernel dimension")
    two_h = 2 * hv.array
    lo, hi = kernel.lower, kernel.upper

    if cond == "C1":
        tup = _tuples(lo, hi, 2, plan)
        s, t = tup[:, 0], tup[:, 1]
        lhs = kernel.incr_var(s, t)
        rhs = np.sum(np.abs(s - t) ** two_h, axis=-1)
        upper_kind = True
    elif cond == "C2":
        tup = _tuples(lo, hi, 2, plan)
        s, t = tup[:, 0], tup[:, 1]
        lhs = _batched_condvar(kernel, t, s[:, None, :])
        rhs = np.sum(np.minimum(np.abs(s - t) ** two_h, np.abs(t) ** two_h), axis=-1)
        upper_kind = False
    elif cond == "C3":
        tup = _tuples(lo, hi, 4, plan)
        u, given = tup[:, 0], tup[:, 1:]
        lhs = _batched_condvar(kernel, u, given)
        dists = np.abs(u[:, None, :] - np.concatenate([np.zeros_like(u[:, None, :]), given], axis=1))
        rhs = np.sum(np.min(dists, axis=1) ** two_h, axis=-1)
        upper_kind = False
    elif cond == "C4":
        I = plan.I if plan.I is not None else (lo, hi)
        J = plan.J if plan.J is not None else (lo, hi)
        vk = SelfIntersectionKernel(kernel, I, J)
        tup = _tuples(vk.lower, vk.upper, 2, plan)
        p, q = tup[:, 0], tup[:, 1]
        vq = vk.var(q)
        c = vk.cov(p, q)
        with np.errstate(divide="ignore", invalid="ignore"):
            lhs = np.where(vq > 0, vk.var(p) - c * c / vq, vk.var(p))
        lhs = np.maximum(lhs, 0.0)
        n = kernel.dim
        s, t, s2, t2 = p[:, :n], p[:, n:], q[:, :n], q[:, n:]
        Sset = set(S)
        rhs = np.zeros(len(p))
        for j in range(n):
            if j in Sset:
                rhs += np.abs(t[:, j] - t2[:, j]) ** two_h[j] + np.abs(s[:, j] - s2[:, j]) ** two_h[j]
            else:
                rhs += np.abs(s[:, j] - t[:, j]) ** two_h[j]
        upper_kind = True
    else:
        raise ValueError(f"unknown condition {condition!r}")

    keep = rhs > 0
    if upper_kind:
        bad = (~keep) & (lhs > plan.floor)
    else:
        bad = np.zeros(len(lhs), bool)
    n_eval = int(np.count_nonzero(keep))
    if n_eval < 100:
        raise InsufficientSamples(f"only {n_eval} tuples evaluated")
    ratio = lhs[keep] / rhs[keep]
    lo_c, hi_c = float(np.min(ratio)), float(np.max(ratio))
    if not upper_kind:
        idx = np.flatnonzero(keep)[ratio < plan.floor]
        bad[idx] = True
    violations = [tup[i] for i in np.flatnonzero(bad)]
    relevant = hi_c if upper_kind else lo_c
    passed = not violations and np.isfinite(relevant) and relevant > 0
    return ConditionReport(cond, n_eval, hi_c, lo_c, violations, bool(passed))
