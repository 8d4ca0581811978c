"""Cross-checks of the threshold verdicts against the integral criteria."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionMismatch
from ..fields import (
    CollisionKernel,
    CovKernel,
    FBMKernel,
    FBSheetKernel,
    IntersectionKernel,
    SelfIntersectionKernel,
)
from .classify import NO, YES, NotSeparated, PartiallySeparated, Scenario, WellSeparated, iff_rules, threshold_classify
from .integrands import existence_integrand, smoothness_integrand
from .quadrature import QuadBudget, evaluate_criterion

# Multi-parameter sheets vanish on the coordinate axes, where (C2) fails;
# criteria for them are evaluated away from the axes.
SHEET_BOX = (0.5, 1.0)


def base_kernel(h) -> CovKernel:
    """fBm for one parameter, fractional Brownian sheet on ``[0.5, 1]^N`` otherwise."""
    h = list(h)
    if len(h) == 1:
        return FBMKernel(h[0])
    n = len(h)
    return FBSheetKernel(h, [SHEET_BOX[0]] * n, [SHEET_BOX[1]] * n)


def self_geometry(n: int, separation, sheet: bool):
    """Default ``(I, J)`` rectangles for a separation class."""
    lo, hi = SHEET_BOX if sheet else (0.0, 1.0)
    span = hi - lo
    if isinstance(separation, WellSeparated):
        a = lo + 0.4 * span
        b = lo + 0.6 * span
        return ([lo] * n, [a] * n), ([b] * n, [hi] * n)
    if isinstance(separation, PartiallySeparated):
        S = {j - 1 for j in separation.S}
        gap = min(separation.eps0, 0.99) * span
        a = lo + (span - gap) / 2
        I = ([lo] * n, [a if j in S else hi for j in range(n)])
        J = ([a + gap if j in S else lo for j in range(n)], [hi] * n)
        return I, J
    return ([lo] * n, [hi] * n), ([lo] * n, [hi] * n)


def scenario_kernel(scenario: Scenario) -> CovKernel:
    """Covariance of the field whose local time the scenario studies."""
    kh = base_kernel(scenario.H.h)
    if scenario.kind == "localtime":
        return kh
    if scenario.kind == "collision":
        return CollisionKernel(kh, base_kernel(scenario.K.h))
    if scenario.kind == "intersection":
        return IntersectionKernel(kh, base_kernel(scenario.K.h))
    I, J = self_geometry(scenario.N, scenario.separation, scenario.N > 1)
    return SelfIntersectionKernel(kh, I, J)


@dataclass
class DichotomyReport:
    scenario: dict
    verdict: dict
    checks: list = field(default_factory=list)

    @property
    def agree(self) -> bool:
        return all(c["agree"] for c in self.checks if c["iff"])

    def to_dict(self):
        return {"scenario": self.scenario, "verdict": self.verdict, "checks": self.checks, "agree": self.agree}


def verify_dichotomy(scenario: Scenario, kernel: CovKernel | None = None, budget: QuadBudget | None = None,
                     targets=("exists", "smooth"), ladder=None, **diag_kw) -> DichotomyReport:
    """Run the classifier and the matching integral criterion side by side.

    For each target the check records the verdict, the ladder label, whether
    they agree (Convergent with Yes, Divergent with No) and whether the
    verdict comes from an if-and-only-if clause.  Only those count towards
    :attr:`DichotomyReport.agree`.
    """
    verdict = threshold_classify(scenario)
    kernel = kernel or scenario_kernel(scenario)
    if scenario.kind == "self" and not isinstance(kernel, SelfIntersectionKernel):
        I, J = self_geometry(scenario.N, scenario.separation, scenario.N > 1)
        kernel = SelfIntersectionKernel(kernel, I, J)
    n_expected = {"intersection": scenario.N + (len(scenario.K) if scenario.K else 0),
                  "self": 2 * scenario.N}.get(scenario.kind, scenario.N)
    if kernel.dim != n_expected:
        raise DimensionMismatch(f"kernel dimension {kernel.dim} does not fit scenario ({n_expected})")
    level = np.asarray(scenario.level, float) if scenario.kind == "localtime" else 0.0
    iffs = iff_rules(scenario)
    checks = []
    for target in targets:
        if target == "exists":
            f = existence_integrand(kernel, scenario.d, level)
            expected = verdict.exists_L2
        else:
            f = smoothness_integrand(kernel, scenario.d)
            expected = verdict.smooth_D1
        diag = evaluate_criterion(f, ladder=ladder, budget=budget, **diag_kw)
        want = {YES: "Convergent", NO: "Divergent"}.get(expected)
        checks.append({
            "target": target,
            "verdict": expected,
            "label": diag.label,
            "iff": bool(iffs[target]),
            "agree": want is not None and diag.label == want,
            "diagnosis": diag.to_dict(),
        })
    return DichotomyReport(scenario.to_dict(), verdict.to_dict(), checks)
