"""Scenarios and the threshold classifier.

Each rule compares a Hurst sum with ``d`` (existence in L²) or ``d + 2``
(Meyer-Watanabe smoothness) using strict inequalities, so equality is
always a No.  Justifications are registry keys naming the clause used.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidScenario
from ..fields import HurstVector, as_hurst

YES, NO, UNKNOWN = "Yes", "No", "Unknown"


# ---------------------------------------------------------------------------
# separation classes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WellSeparated:
    kind = "well"


@dataclass(frozen=True)
class PartiallySeparated:
    """``S`` holds 1-based coordinate indices; ``c4`` asserts condition C4."""

    S: tuple
    eps0: float = 0.2
    c4: bool = False
    kind = "partial"

    def __init__(self, S=(1,), eps0=0.2, c4=False):
        object.__setattr__(self, "S", tuple(sorted(int(j) for j in S)))
        object.__setattr__(self, "eps0", float(eps0))
        object.__setattr__(self, "c4", bool(c4))


@dataclass(frozen=True)
class NotSeparated:
    kind = "none"


@dataclass(frozen=True)
class Scenario:
    """What is being classified.

    ``kind`` is one of ``localtime``, ``collision``, ``intersection``,
    ``self``.  ``level`` only matters for ``localtime``.
    """

    kind: str
    H: HurstVector
    d: int
    K: HurstVector | None = None
    level: tuple = (0.0,)
    separation: object = None

    def __init__(self, kind, H, d, K=None, level=0.0, separation=None):
        kind = {"self_intersection": "self", "local_time": "localtime"}.get(kind, kind)
        if kind not in ("localtime", "collision", "intersection", "self"):
            raise InvalidScenario(f"unknown scenario kind {kind!r}")
        try:
            H = as_hurst(H)
            K = None if K is None else as_hurst(K)
        except ValueError as exc:
            raise InvalidScenario(str(exc)) from exc
        if int(d) != d or d < 1:
            raise InvalidScenario("d must be a positive integer")
        lv = tuple(float(x) for x in np.atleast_1d(level))
        if kind in ("collision", "intersection") and K is None:
            raise InvalidScenario(f"{kind} needs a second Hurst vector K")
        if kind == "collision" and len(K) != len(H):
            raise InvalidScenario("collision needs H and K of equal length")
        if kind == "self":
            if separation is None:
                separation = NotSeparated()
            if isinstance(separation, PartiallySeparated):
                S = set(separation.S)
                if not S or not S < set(range(1, len(H) + 1)):
                    raise InvalidScenario("partial separation needs S nonempty and proper in {1..N}")
                if separation.eps0 <= 0:
                    raise InvalidScenario("eps0 must be positive")
            elif not isinstance(separation, (WellSeparated, NotSeparated)):
                raise InvalidScenario(f"bad separation {separation!r}")
        elif separation is not None:
            raise InvalidScenario("separation only applies to self-intersection")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "d", int(d))
        object.__setattr__(self, "level", lv)
        object.__setattr__(self, "separation", separation)

    @property
    def N(self):
        return len(self.H)

    def to_dict(self):
        out = {"kind": self.kind, "N": self.N, "H": list(self.H.h), "d": self.d}
        if self.K is not None:
            out["K"] = list(self.K.h)
        if self.kind == "localtime":
            out["level"] = list(self.level)
        if self.separation is not None:
            out["separation"] = self.separation.kind
            if isinstance(self.separation, PartiallySeparated):
                out["S"] = list(self.separation.S)
                out["eps0"] = self.separation.eps0
                out["c4"] = self.separation.c4
        return out


@dataclass
class Verdict:
    exists_L2: str
    smooth_D1: str
    justification: list = field(default_factory=list)
    threshold_values: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "exists_L2": self.exists_L2,
            "smooth_D1": self.smooth_D1,
            "justification": list(self.justification),
            "threshold_values": {k: float(v) for k, v in sorted(self.threshold_values.items())},
        }


# Registry of clauses; keys are what appears in Verdict.justification.
RULES = {
    "existence-iff": "L2 iff sum_inv_H > d",
    "smooth-iff": "D1 iff sum_inv_H > d+2 (level 0)",
    "smooth-sufficient-level": "D1 if sum_inv_H > d+2 (nonzero level); no converse",
    "collision-existence-iff": "L2 iff sum 1/min(H_j,K_j) > d",
    "collision-smooth-iff": "D1 iff sum 1/min(H_j,K_j) > d+2",
    "intersection-existence-iff": "L2 iff sum 1/H_j + sum 1/K_j > d",
    "intersection-smooth-iff": "D1 iff sum 1/H_j + sum 1/K_j > d+2",
    "self-well-existence-iff": "L2 iff 2 sum_inv_H > d",
    "self-well-smooth-iff": "D1 iff 2 sum_inv_H > d+2",
    "self-partial-existence-sufficient": "L2 if 2 sum_S + sum_Sc > d",
    "self-partial-existence-necessary": "not L2 if 2 sum_inv_H <= d",
    "self-partial-smooth-sufficient": "D1 if 2 sum_S + sum_Sc > d+2",
    "self-partial-smooth-necessary": "not D1 if 2 sum_inv_H <= d+2",
    "self-partial-c4-existence-iff": "under C4: L2 iff 2 sum_S + sum_Sc > d",
    "self-partial-c4-smooth-iff": "under C4: D1 iff 2 sum_S + sum_Sc > d+2",
    "self-none-existence-iff": "L2 iff sum_inv_H > d",
    "self-none-smooth-sufficient": "D1 if sum_inv_H > d+2",
    "self-none-smooth-necessary": "not D1 if sum_inv_H <= max{(d+2)/2, 2d/3}",
    "smooth-implies-exists": "D1 is contained in L2",
}


def _iff(q, bound):
    return YES if q > bound else NO


def threshold_classify(scenario: Scenario) -> Verdict:
    """Apply the threshold rules exactly (strict inequalities)."""
    if not isinstance(scenario, Scenario):
        raise InvalidScenario("expected a Scenario")
    d = scenario.d
    H = scenario.H
    tv = {"d": d, "d_plus_2": d + 2}
    just = []
    kind = scenario.kind

    if kind == "localtime":
        q = H.q_sum()
        tv["sum_inv_H"] = q
        ex = _iff(q, d)
        just.append("existence-iff")
        if all(x == 0 for x in scenario.level):
            sm = _iff(q, d + 2)
            just.append("smooth-iff")
        else:
            sm = YES if q > d + 2 else UNKNOWN
            just.append("smooth-sufficient-level")
    elif kind == "collision":
        q = H.wedge(scenario.K).q_sum()
        tv["sum_inv_H"] = q
        ex, sm = _iff(q, d), _iff(q, d + 2)
        just += ["collision-existence-iff", "collision-smooth-iff"]
    elif kind == "intersection":
        q = H.q_sum() + scenario.K.q_sum()
        tv["sum_inv_H"] = q
        ex, sm = _iff(q, d), _iff(q, d + 2)
        just += ["intersection-existence-iff", "intersection-smooth-iff"]
    else:
        sep = scenario.separation
        qh = H.q_sum()
        tv["sum_inv_H"] = qh
        if isinstance(sep, WellSeparated):
            tv["two_sum_inv_H"] = 2 * qh
            ex, sm = _iff(2 * qh, d), _iff(2 * qh, d + 2)
            just += ["self-well-existence-iff", "self-well-smooth-iff"]
        elif isinstance(sep, PartiallySeparated):
            S = set(j - 1 for j in sep.S)
            qp = sum((2.0 if j in S else 1.0) / H[j] for j in range(len(H)))
            tv["sum_partial"] = qp
            tv["two_sum_inv_H"] = 2 * qh
            if sep.c4:
                ex, sm = _iff(qp, d), _iff(qp, d + 2)
                just += ["self-partial-c4-existence-iff", "self-partial-c4-smooth-iff"]
            else:
                ex = YES if qp > d else (NO if 2 * qh <= d else UNKNOWN)
                sm = YES if qp > d + 2 else (NO if 2 * qh <= d + 2 else UNKNOWN)
                just += [
                    "self-partial-existence-sufficient",
                    "self-partial-existence-necessary",
                    "self-partial-smooth-sufficient",
                    "self-partial-smooth-necessary",
                ]
        else:
            mb = max((d + 2) / 2, 2 * d / 3)
            tv["max_bound"] = mb
            ex = _iff(qh, d)
            sm = YES if qh > d + 2 else (NO if qh <= mb else UNKNOWN)
            just += ["self-none-existence-iff", "self-none-smooth-sufficient", "self-none-smooth-necessary"]

    if ex == NO and sm != NO:
        sm = NO
        just.append("smooth-implies-exists")
    return Verdict(ex, sm, just, tv)


def iff_rules(scenario: Scenario) -> dict:
    """Which of (exists, smooth) are decided by an if-and-only-if clause."""
    v = threshold_classify(scenario)
    out = {}
    for target, tag in (("exists", "existence"), ("smooth", "smooth")):
        out[target] = any(j.endswith("-iff") and tag in j for j in v.justification)
    return out
