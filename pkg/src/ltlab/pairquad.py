"""Quadrature rules on ``I x I`` for bounded but sharply peaked pair integrands.

Second moments of smoothed local times and the chaos terms are integrals
of functions of ``(Var X(s), Var X(t), Cov)`` that peak along the diagonal
``s = t`` (width about ``ε``) and, for fields vanishing at the origin, near
``s = 0``.  One-parameter kernels get a deterministic graded Gauss rule;
everything else uses the importance-sampled Sobol design of the criteria
quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import CovKernel


@dataclass
class PairRule:
    """Nodes ``(P[i], Q[i])`` with weights ``w[i]``: ``∫∫ f ≈ Σ w f(P, Q)``."""

    P: np.ndarray
    Q: np.ndarray
    w: np.ndarray
    kind: str

    def __len__(self):
        return len(self.w)

    def excise(self, delta: float) -> "PairRule":
        """Drop nodes within max-norm ``delta`` of the diagonal."""
        keep = np.max(np.abs(self.P - self.Q), axis=1) >= delta
        return PairRule(self.P[keep], self.Q[keep], self.w[keep], self.kind + f"|excise={delta:g}")


def _panels(levels: int, toward_zero: bool, n_uniform: int):
    """Panel edges on ``[0, 1]``: geometric towards 0, then uniform."""
    if toward_zero:
        geo = [2.0**-k for k in range(levels, 0, -1)]
        edges = [0.0] + geo + list(np.linspace(0.5, 1.0, n_uniform + 1)[1:])
    else:
        edges = list(np.linspace(0.0, 1.0, n_uniform + 1))
    return np.asarray(edges)


def _gauss_on(edges, order):
    x, w = np.polynomial.legendre.leggauss(order)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (b - a) * x[None, :] + 0.5 * (a + b)
    weights = 0.5 * (b - a) * w[None, :]
    return nodes.ravel(), weights.ravel()


def graded_rule_1d(kernel: CovKernel, order: int = 8, levels: int = 40, n_uniform: int = 4) -> PairRule:
    """Gauss rule on ``[a, b]^2`` for one-parameter kernels.

    Each triangle ``s < t`` / ``s > t`` is parametrised by the gap
    ``u = |t - s|`` (panels geometric towards 0) and the position of the
    lower point (panels geometric towards the lower end when the field
    vanishes there).
    """
    if kernel.dim != 1:
        raise ValueError("graded_rule_1d needs a one-parameter kernel")
    a, b = float(kernel.lower[0]), float(kernel.upper[0])
    L = b - a
    vanish = any(z.kind == "vanish" for z in kernel.zero_sets())
    uu, wu = _gauss_on(_panels(levels, True, n_uniform), order)
    vv, wv = _gauss_on(_panels(levels if vanish else 0, vanish, n_uniform * 2), order)
    U, V = np.meshgrid(uu, vv, indexing="ij")
    W = np.outer(wu, wv)
    gap = L * U
    low = a + (L - gap) * V
    jac = L * (L - gap)
    lo_pts, hi_pts, ww = low.ravel(), (low + gap).ravel(), (W * jac).ravel()
    P = np.concatenate([lo_pts, hi_pts])[:, None]
    Q = np.concatenate([hi_pts, lo_pts])[:, None]
    return PairRule(P, Q, np.concatenate([ww, ww]), f"graded-gauss(order={order},levels={levels})")


def qmc_rule(kernel: CovKernel, log2_points: int = 16, seed: int = 0, floor: float = 1e-10) -> PairRule:
    """Importance-sampled Sobol rule (any parameter dimension up to 4)."""
    from scipy.stats import qmc

    from .criteria.quadrature import SingularSet, _MixtureDesign

    design = _MixtureDesign(kernel, SingularSet.from_kernel(kernel), floor, 0.3, 0.1, 0.5)
    U = qmc.Sobol(d=design.ndim, scramble=True, seed=seed).random_base2(log2_points)
    P, Q, log_dens, valid = design.transform(U)
    w = np.where(valid, np.exp(-log_dens), 0.0) / len(U)
    keep = w > 0
    return PairRule(P[keep], Q[keep], w[keep], f"qmc(2^{log2_points},seed={seed})")


def default_rule(kernel: CovKernel, **kw) -> PairRule:
    if kernel.dim == 1:
        return graded_rule_1d(kernel, **{k: v for k, v in kw.items() if k in ("order", "levels", "n_uniform")})
    return qmc_rule(kernel, **{k: v for k, v in kw.items() if k in ("log2_points", "seed", "floor")})


def grid_points(kernel: CovKernel, n_per_axis) -> tuple[np.ndarray, float]:
    """Cell midpoints of a regular grid on the kernel's rectangle and the cell volume."""
    n_per_axis = np.broadcast_to(np.atleast_1d(n_per_axis), (kernel.dim,))
    axes = [
        kernel.lower[j] + (np.arange(n) + 0.5) * (kernel.upper[j] - kernel.lower[j]) / n
        for j, n in enumerate(n_per_axis)
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    vol = float(np.prod((kernel.upper - kernel.lower) / n_per_axis))
    return pts, vol


def grid_rule(kernel: CovKernel, n_per_axis) -> PairRule:
    """All ordered pairs of grid midpoints, weight = cell volume squared.

    Integrating a pair function with this rule gives the exact expectation of
    the corresponding Riemann-sum estimator, diagonal terms included.
    """
    pts, vol = grid_points(kernel, n_per_axis)
    n = len(pts)
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    return PairRule(pts[i.ravel()], pts[j.ravel()], np.full(n * n, vol * vol), f"grid({n})")
