import math
from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from ltlab.chaos import (
    abs_moment_coeff,
    chenyan_closed,
    chenyan_lhs,
    chenyan_ratio_scan,
    composition_coeff_bruteforce,
    composition_coeffs,
    double_factorial,
    hermite,
    hermite_definition,
    hermite_expected,
    hermite_from_genfun,
    hermite_genfun,
    hermite_orthogonality_mc,
    log_double_factorial,
    phi_bound,
    phi_series,
)
from ltlab.errors import DomainError, NotConverged, SingularDomain
from ltlab.fields import FBMKernel
from ltlab.pairquad import graded_rule_1d

BM = FBMKernel(0.5)


# -- Hermite ---------------------------------------------------------------


def test_hermite_examples():
    assert hermite(0, 3.7) == 1.0
    assert hermite(1, 3.7) == 3.7
    assert hermite(2, 2.0) == pytest.approx(1.5)
    assert hermite_genfun(0.5, 1.0, 30) == pytest.approx(math.exp(0.5 - 0.125), abs=1e-10)


def test_hermite_matches_symbolic_definition():
    # differentiate e^{-x²/2} symbolically, independent of both numeric routes
    x = sympy.symbols("x")
    g = sympy.exp(-x**2 / 2)
    for n in range(8):
        expr = sympy.simplify((-1) ** n / sympy.factorial(n) * sympy.exp(x**2 / 2) * sympy.diff(g, x, n))
        for v in (-2.5, 0.3, 1.7):
            assert hermite(n, v) == pytest.approx(float(expr.subs(x, v)), abs=1e-12)


@pytest.mark.parametrize("n", range(11))
def test_hermite_recurrence_vs_definition_and_genfun(n):
    xs = np.linspace(-3, 3, 61)
    np.testing.assert_allclose(hermite(n, xs), hermite_definition(n, xs), atol=1e-8)
    np.testing.assert_allclose(hermite(n, xs), hermite_from_genfun(n, xs), atol=1e-8)


@settings(max_examples=100, deadline=None)
@given(z=st.floats(-0.8, 0.8), x=st.floats(-3, 3))
def test_generating_function(z, x):
    assert hermite_genfun(z, x, 40) == pytest.approx(math.exp(z * x - z * z / 2), abs=1e-10)


@pytest.mark.parametrize("n,m,rho,expected", [(1, 2, 0.5, 0.0), (2, 2, 1.0, 0.5), (1, 1, 0.5, 0.5)])
def test_orthogonality_examples(n, m, rho, expected):
    est, se = hermite_orthogonality_mc(n, m, rho, replicates=100_000, seed=7)
    assert hermite_expected(n, m, rho) == pytest.approx(expected)
    assert abs(est - expected) <= 3 * se + 1e-12


def test_orthogonality_seeded():
    assert hermite_orthogonality_mc(3, 3, 0.5, 20_000, seed=1) == hermite_orthogonality_mc(3, 3, 0.5, 20_000, seed=1)
    with pytest.raises(DomainError):
        hermite_orthogonality_mc(1, 1, 1.5)


# -- double factorials -----------------------------------------------------


def test_double_factorial_examples():
    assert log_double_factorial(0, "odd") == 0.0
    assert log_double_factorial(3, "odd") == pytest.approx(math.log(15))
    assert log_double_factorial(3, "even") == pytest.approx(math.log(48))
    for k in range(11):
        assert log_double_factorial(k, "odd") == pytest.approx(math.log(double_factorial(k, "odd")), abs=1e-12)
        assert log_double_factorial(k, "even") == pytest.approx(math.log(double_factorial(k, "even")), abs=1e-12)
    assert math.isfinite(log_double_factorial(400, "even"))


def test_composition_small_cases():
    assert composition_coeff_bruteforce(0, 3) == 1
    assert composition_coeff_bruteforce(1, 1) == Fraction(1, 2)
    assert composition_coeff_bruteforce(5, 2) == 1  # (1-x)^{-1}


@pytest.mark.parametrize("d", [1, 2, 3, 4])
def test_composition_recurrence_matches_enumeration(d):
    c = composition_coeffs(20, d)
    for n in range(21):
        assert c[n] == pytest.approx(float(composition_coeff_bruteforce(n, d)), rel=1e-12)


@pytest.mark.parametrize("d", [1, 2, 3, 5])
def test_abs_moment_coeff_even_orders(d):
    c = composition_coeffs(6, d)
    for n in range(7):
        assert abs_moment_coeff(2 * n, d) == pytest.approx(c[n], rel=1e-12)


def test_abs_moment_coeff_odd_mc():
    rng = np.random.default_rng(3)
    g, h = rng.standard_normal((2, 400_000, 2))
    s = np.abs(np.sum(g * h, axis=1)) ** 3
    assert abs_moment_coeff(3, 2) == pytest.approx(s.mean() / 6, rel=4 * s.std() / s.mean() / math.sqrt(len(s)))


# -- Chen–Yan --------------------------------------------------------------


def test_chenyan_examples():
    assert chenyan_lhs(0.0, 3) == 0.0
    assert chenyan_lhs(0.5, 2) == pytest.approx(4.0, rel=1e-12)
    assert chenyan_lhs(0.5, 2) / (0.5 * 0.5**-2) == pytest.approx(2.0, rel=1e-12)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_chenyan_matches_closed_form(d):
    for x in (0.01, 0.3, 0.9, 0.99):
        assert chenyan_lhs(x, d) == pytest.approx(float(chenyan_closed(x, d)), rel=1e-10)


def test_chenyan_d2_ratio_exact():
    lo, hi = chenyan_ratio_scan(2, np.linspace(0.01, 0.99, 99))
    assert lo == pytest.approx(2.0, abs=1e-8) and hi == pytest.approx(2.0, abs=1e-8)


@pytest.mark.parametrize("d", [1, 3])
def test_chenyan_band_stable(d):
    coarse = chenyan_ratio_scan(d, np.linspace(0.01, 0.99, 50))
    fine = chenyan_ratio_scan(d, np.linspace(0.01, 0.99, 197))
    assert 0 < coarse[0] <= coarse[1] < math.inf
    assert (coarse[1] / coarse[0]) == pytest.approx(fine[1] / fine[0], rel=0.05)


def test_chenyan_errors():
    with pytest.raises(DomainError):
        chenyan_lhs(1.0, 2)
    with pytest.raises(NotConverged):
        chenyan_lhs(0.9, 2, trunc_n=5)


# -- Φ series --------------------------------------------------------------


def test_phi_series_bm_d1():
    ps = phi_series(BM, 1, 0.5)
    assert ps.converged and ps.tail_estimate <= 1e-8 * ps.value
    assert all(v >= 0 for _, v in ps.terms)
    assert np.all(np.diff(ps.partial_sums) >= 0)
    assert ps.value == pytest.approx(ps.resummed, rel=1e-6)
    # Chen–Yan band at d=1 lies well inside [0.5, 2] of the resummed integrand
    assert 0.5 <= ps.value / ps.resummed <= 2.0


def test_phi_trunc_zero_and_monotone_in_u():
    ps = phi_series(BM, 1, 0.5, trunc_n=0)
    assert ps.value == 0.0 and ps.terms == []
    ps = phi_series(BM, 2, 0.1, trunc_n=12)
    us = np.linspace(0, 1, 11)
    assert np.all(np.diff([ps.phi(u) for u in us]) >= 0)
    assert ps.phi(1.0) == pytest.approx(ps.value)


def test_phi_energy_matches_second_moment():
    from ltlab.localtime import second_moment_closed

    rule = graded_rule_1d(BM)
    ps = phi_series(BM, 1, 0.5, rule=rule, tol=1e-12)
    assert ps.energy() == pytest.approx(second_moment_closed(BM, 1, 0.0, 0.5, rule=rule), rel=1e-8)


def test_phi_strict_and_singular():
    with pytest.raises(NotConverged):
        phi_series(BM, 1, 0.5, trunc_n=2, strict=True)
    assert not phi_series(BM, 1, 0.5, trunc_n=2).converged
    with pytest.raises(SingularDomain):
        phi_series(BM, 1, 0.0, rule=graded_rule_1d(BM))


def test_phi_grows_along_ladder_in_d3():
    vals = [phi_series(BM, 3, e).value for e in (0.5, 0.1, 0.02)]
    assert vals[0] < vals[1] < vals[2]
    assert vals[2] / vals[1] > 5


def test_phi_bound_dominates_level_zero_series():
    ps = phi_series(BM, 1, 0.5)
    b = phi_bound(BM, 1, 0.5)
    assert b.converged and b.extra["bound"]
    even = sum(v for m, v in b.terms if m % 2 == 0)
    assert even == pytest.approx(ps.value, rel=1e-6)
    assert b.value >= ps.value
    assert math.isinf(phi_bound(BM, 1, 0.5, trunc_n=1).tail_estimate)
