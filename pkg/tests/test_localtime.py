import math

import numpy as np
import pytest
from scipy import integrate

from ltlab.criteria import NotSeparated, Scenario, WellSeparated, scenario_kernel
from ltlab.errors import DomainError
from ltlab.fields import FBMKernel, FBSheetKernel
from ltlab.localtime import (
    DEFAULT_LADDER,
    EXTENDED_LADDER,
    cauchy_gap,
    heat_kernel,
    l_eps_mc,
    mean_closed,
    moment_ladder,
    scenario_localtime,
    second_moment_closed,
)
from ltlab.pairquad import graded_rule_1d, qmc_rule

BM = FBMKernel(0.5)


def test_heat_kernel_examples():
    assert heat_kernel(0.0, 1 / (2 * math.pi), 1) == pytest.approx(1.0)
    total, _ = integrate.quad(lambda x: heat_kernel(x, 0.3, 1), -np.inf, np.inf)
    assert total == pytest.approx(1.0, abs=1e-10)
    xs = np.random.default_rng(0).normal(size=(50, 3))
    assert np.all(heat_kernel(xs, 0.2) <= heat_kernel(np.zeros(3), 0.2))
    with pytest.raises(DomainError):
        heat_kernel(0.0, 0.0, 1)


def test_mc_flat_kernel_limit():
    eps = 1e4
    est = l_eps_mc(BM, 1, 0.0, eps, grid=32, replicates=2000, seed=1)
    assert est.value / (2 * math.pi * eps) ** -0.5 == pytest.approx(1.0, abs=1e-3)


@pytest.mark.parametrize("kernel,d,x", [(BM, 1, 0.0), (BM, 2, 0.3), (FBSheetKernel((0.5, 0.5)), 1, 0.0)])
def test_mc_moments_within_3se(kernel, d, x):
    grid = 32 if kernel.dim == 1 else 10
    est = l_eps_mc(kernel, d, x, 0.1, grid=grid, replicates=20_000, seed=3)
    assert est.value >= 0 and est.value == pytest.approx(np.mean(est.replicate_values))
    assert abs(est.value - mean_closed(kernel, d, x, 0.1, grid)) <= 3 * est.standard_error
    m2 = second_moment_closed(kernel, d, x, 0.1, grid=grid)
    assert abs(est.second_moment - m2) <= 3 * est.second_moment_se


def test_mc_deterministic_and_worker_independent():
    a = l_eps_mc(BM, 1, 0.0, 0.1, grid=16, replicates=5000, seed=11, workers=1, chunk=1000)
    b = l_eps_mc(BM, 1, 0.0, 0.1, grid=16, replicates=5000, seed=11, workers=3, chunk=1000)
    np.testing.assert_array_equal(a.replicate_values, b.replicate_values)
    assert a.to_dict() == b.to_dict()


def test_second_moment_large_eps():
    eps = 1e3
    for d in (1, 2):
        assert second_moment_closed(BM, d, 0.0, eps) * (2 * math.pi * eps) ** d == pytest.approx(1.0, rel=0.01)


def test_second_moment_brownian_limit():
    # E L(0)² for Brownian motion on [0,1] in d=1 is 2 ∫∫_{s<t} (2π)^{-1} (s(t-s))^{-1/2} = 1
    rule = graded_rule_1d(BM)
    assert second_moment_closed(BM, 1, 0.0, 1e-7, rule=rule) == pytest.approx(1.0, abs=2e-3)


def test_rules_agree():
    a = second_moment_closed(BM, 2, 0.0, 0.05, rule=graded_rule_1d(BM))
    b = second_moment_closed(BM, 2, 0.0, 0.05, rule=qmc_rule(BM, log2_points=16))
    assert a == pytest.approx(b, rel=0.01)


def test_nonzero_level_smaller():
    assert second_moment_closed(BM, 1, 1.0, 0.1) < second_moment_closed(BM, 1, 0.0, 0.1)
    assert second_moment_closed(BM, 2, [1.0, 0.0], 0.1) == pytest.approx(second_moment_closed(BM, 2, [0.0, 1.0], 0.1))


def test_cauchy_gap_basics():
    assert cauchy_gap(BM, 1, 0.0, 0.1, 0.1) == 0.0
    g = cauchy_gap(BM, 1, 0.0, 0.1, 0.05)
    assert g > 0
    # E(L1 - L2)² ≤ (√E L1² + √E L2²)²
    a, b = second_moment_closed(BM, 1, 0.0, 0.1), second_moment_closed(BM, 1, 0.0, 0.05)
    assert g <= (math.sqrt(a) + math.sqrt(b)) ** 2


def test_cauchy_gap_matches_mc():
    grid = 24
    eps1, eps2 = 0.1, 0.05
    e1 = l_eps_mc(BM, 1, 0.0, eps1, grid=grid, replicates=20_000, seed=5)
    e2 = l_eps_mc(BM, 1, 0.0, eps2, grid=grid, replicates=20_000, seed=5)
    diff = (e1.replicate_values - e2.replicate_values) ** 2
    se = diff.std(ddof=1) / math.sqrt(len(diff))
    assert abs(diff.mean() - cauchy_gap(BM, 1, 0.0, eps1, eps2, grid=grid)) <= 3 * se


def test_ladder_d1_converges():
    rep = moment_ladder(BM, 1, eps_ladder=EXTENDED_LADDER)
    assert rep.stabilized and rep.gaps_decreasing
    assert all(b >= a for a, b in zip(rep.values[:-1], rep.values[1:]))
    assert rep.values[-1] == pytest.approx(1.0, abs=0.02)


def test_ladder_d2_grows():
    rep = moment_ladder(BM, 2, eps_ladder=EXTENDED_LADDER)
    assert rep.growing and not rep.stabilized
    assert rep.slope > 0.05 and rep.r_squared > 0.9
    assert min(rep.gaps) > 0.005


def test_default_ladder_is_shorter():
    assert DEFAULT_LADDER[-1] > EXTENDED_LADDER[-1]
    rep = moment_ladder(BM, 1)
    assert rep.gaps_decreasing and len(rep.values) == len(DEFAULT_LADDER)


def test_scenario_collision_bm():
    sc = Scenario("collision", (0.5,), 1, K=(0.5,))
    rep = moment_ladder(scenario_kernel(sc), 1, eps_ladder=DEFAULT_LADDER)
    assert rep.gaps_decreasing
    assert rep.rel_changes[-1] < rep.rel_changes[0]


def test_scenario_dispatch():
    sc = Scenario("intersection", (0.5,), 3, K=(0.5,))
    out = scenario_localtime(sc, eps=0.1)
    assert out["second_moment"] > 0 and out["kernel"].startswith("intersection")
    est = scenario_localtime(sc, estimator="mc", eps=0.5, grid=8, replicates=2000, seed=2)
    assert est.d == 3 and est.value > 0
    with pytest.raises(DomainError):
        scenario_localtime(sc, estimator="exact")


def test_self_intersection_diagonal_vanishes():
    k = scenario_kernel(Scenario("self", (0.5,), 3, separation=NotSeparated()))
    t = np.linspace(0.05, 1, 20)
    P = np.column_stack([t, t])
    np.testing.assert_array_equal(k.var(P), 0.0)
    k2 = scenario_kernel(Scenario("self", (0.5,), 3, separation=WellSeparated()))
    assert np.all(k2.var(np.array([[0.2, 0.8], [0.4, 0.6]])) > 0)
