"""Integral criteria, the threshold classifier and the singular-integral lemmas."""

from .classify import (
    NO,
    UNKNOWN,
    YES,
    NotSeparated,
    PartiallySeparated,
    Scenario,
    Verdict,
    WellSeparated,
    iff_rules,
    threshold_classify,
)
from .dichotomy import DichotomyReport, base_kernel, scenario_kernel, self_geometry, verify_dichotomy
from .integrands import (
    PairIntegrand,
    existence_integrand,
    integrand_existence,
    integrand_prop,
    integrand_self,
    integrand_smoothness,
    prop_integrand,
    self_integrand,
    smoothness_integrand,
)
from .lemmas import lemma1_band, lemma1_eval, lemma23_check, lemma23_scan
from .quadrature import DivergenceDiagnosis, QuadBudget, SingularSet, default_ladder, diagnose, evaluate_criterion

__all__ = [name for name in dir() if not name.startswith("_")]
