"""Acceptance checks.  Each test prints one ``ACCEPTANCE <n> PASS|FAIL`` line.

Run ``python3 tests/test_acceptance.py`` to print the lines directly, or use
pytest (the lines are repeated in the terminal summary).
"""

import io
import json
import math
import time

import numpy as np
import pytest

from ltlab.chaos import (
    chenyan_ratio_scan,
    composition_coeff_bruteforce,
    composition_coeffs,
    hermite,
    hermite_definition,
    hermite_expected,
    hermite_genfun,
    hermite_orthogonality_mc,
)
from ltlab.cli import main
from ltlab.criteria import (
    NO,
    UNKNOWN,
    YES,
    NotSeparated,
    PartiallySeparated,
    Scenario,
    WellSeparated,
    iff_rules,
    lemma1_band,
    lemma1_eval,
    threshold_classify,
    verify_dichotomy,
)
from ltlab.fields import FBMKernel
from ltlab.localtime import EXTENDED_LADDER, l_eps_mc, moment_ladder, second_moment_closed

RESULTS = []

W, NS = WellSeparated(), NotSeparated()


def record(n, ok, detail, elapsed):
    line = f"ACCEPTANCE {n} {'PASS' if ok else 'FAIL'} ({elapsed:.2f}s) {detail}"
    RESULTS.append(line)
    print(line)
    return ok


# (kind, H, K, d, extra, exists, smooth); expectations worked out by hand from the thresholds
REGRESSION = [
    ("localtime", (0.5,), None, 1, {}, YES, NO),
    ("localtime", (0.5,), None, 2, {}, NO, NO),
    ("localtime", (0.5,), None, 3, {}, NO, NO),
    ("localtime", (0.25,), None, 1, {}, YES, YES),
    ("localtime", (0.5, 0.5), None, 3, {}, YES, NO),
    ("localtime", (0.5, 0.5), None, 4, {}, NO, NO),
    ("localtime", (0.2, 0.5), None, 4, {}, YES, YES),
    ("localtime", (0.2,), None, 1, {"level": 1.0}, YES, YES),
    ("localtime", (0.5,), None, 1, {"level": 1.0}, YES, UNKNOWN),
    ("collision", (0.4,), (0.6,), 2, {}, YES, NO),
    ("collision", (0.25,), (0.7,), 1, {}, YES, YES),
    ("collision", (0.6,), (0.8,), 2, {}, NO, NO),
    ("intersection", (0.5,), (0.5,), 3, {}, YES, NO),
    ("intersection", (0.5,), (0.5,), 4, {}, NO, NO),
    ("intersection", (0.25,), (0.25,), 5, {}, YES, YES),
    ("self", (0.5,), None, 3, {"separation": W}, YES, NO),
    ("self", (0.5,), None, 4, {"separation": W}, NO, NO),
    ("self", (0.25,), None, 5, {"separation": W}, YES, YES),
    ("self", (0.5, 0.5), None, 5, {"separation": PartiallySeparated(S=(1,))}, YES, UNKNOWN),
    ("self", (0.5, 0.5), None, 5, {"separation": PartiallySeparated(S=(1,), c4=True)}, YES, NO),
    ("self", (0.25,), None, 1, {"separation": NS}, YES, YES),
    ("self", (0.9,), None, 3, {"separation": NS}, NO, NO),
    ("self", (0.3,), None, 2, {"separation": NS}, YES, UNKNOWN),
    ("self", (0.5,), None, 1, {"separation": NS}, YES, UNKNOWN),
    ("self", (0.1,), None, 3, {"separation": NS}, YES, YES),
]

CONCORDANCE = [
    ("localtime", (0.5,), None, 1, {}),
    ("localtime", (0.5,), None, 2, {}),
    ("localtime", (0.5,), None, 3, {}),
    ("localtime", (0.25,), None, 1, {}),
    ("localtime", (0.5,), None, 1, {"level": 1.0}),
    ("localtime", (0.5,), None, 2, {"level": 1.0}),
    ("localtime", (0.5, 0.5), None, 3, {}),
    ("localtime", (0.5, 0.5), None, 4, {}),
    ("localtime", (0.25, 0.5), None, 3, {}),
    ("collision", (0.4,), (0.6,), 2, {}),
    ("collision", (0.25,), (0.7,), 1, {}),
    ("collision", (0.5, 0.5), (0.7, 0.7), 3, {}),
    ("intersection", (0.5,), (0.5,), 3, {}),
    ("intersection", (0.5,), (0.5,), 4, {}),
    ("intersection", (0.25,), (0.5,), 5, {}),
    ("self", (0.5,), None, 3, {"separation": W}),
    ("self", (0.5,), None, 4, {"separation": W}),
    ("self", (0.25,), None, 5, {"separation": W}),
    ("self", (0.5,), None, 1, {"separation": NS}),
    ("self", (0.5,), None, 2, {"separation": NS}),
    ("self", (0.25,), None, 1, {"separation": NS}),
    ("self", (0.5, 0.5), None, 3, {"separation": NS}),
    ("self", (0.5, 0.5), None, 4, {"separation": NS}),
    ("self", (0.5, 0.5), None, 5, {"separation": NS}),
    ("self", (0.5, 0.5), None, 6, {"separation": NS}),
    ("self", (0.5, 0.5), None, 5, {"separation": W}),
    ("self", (0.5, 0.5), None, 6, {"separation": W}),
    ("self", (0.5, 0.5), None, 7, {"separation": W}),
    ("self", (0.5, 0.5), None, 8, {"separation": W}),
    ("self", (0.5, 0.5), None, 9, {"separation": W}),
]


def test_1_regression_table():
    t0 = time.perf_counter()
    bad = []
    for kind, H, K, d, kw, ex, sm in REGRESSION:
        v = threshold_classify(Scenario(kind, H, d, K=K, **kw))
        if (v.exists_L2, v.smooth_D1) != (ex, sm):
            bad.append((kind, H, K, d, v.exists_L2, v.smooth_D1))
    el = time.perf_counter() - t0
    ok = len(REGRESSION) >= 20 and not bad and el < 1.0
    assert record(1, ok, f"{len(REGRESSION)} rows, mismatches={bad}", el)


def test_2_concordance():
    t0 = time.perf_counter()
    bad, n_checks = [], 0
    for kind, H, K, d, kw in CONCORDANCE:
        sc = Scenario(kind, H, d, K=K, **kw)
        targets = [k for k, v in iff_rules(sc).items() if v]
        if not targets:
            continue
        rep = verify_dichotomy(sc, targets=targets)
        for c in rep.checks:
            n_checks += 1
            diag = c["diagnosis"]
            good = c["agree"]
            if c["label"] == "Convergent":
                good &= all(abs(x) < 0.01 for x in diag["increments"][-2:])
            elif c["label"] == "Divergent":
                good &= diag["fitted_exponent"] > 0.05 and diag["r_squared"] > 0.9
            if not good:
                bad.append((kind, H, K, d, c["target"], c["verdict"], c["label"]))
    el = time.perf_counter() - t0
    assert record(2, not bad and el < 600, f"{n_checks} iff checks, disagreements={bad}", el)


def test_3_lemma1_bands():
    t0 = time.perf_counter()
    growth = {}
    for a, b in [(2, 1), (1, 1), (2, 0.25), (3, 0.5), (0.5, 2)]:
        rep = lemma1_band(a, b, A_ladder=tuple(10.0**-k for k in range(1, 7)))
        growth[(a, b)] = rep.growth
    exact = max(abs(lemma1_eval(1.0, 1.0, A)[0] - math.log1p(1 / A)) for A in 10.0 ** -np.arange(1, 7))
    el = time.perf_counter() - t0
    ok = all(0 <= g < 0.05 for g in growth.values()) and exact < 1e-8 and el < 10
    assert record(3, ok, f"max band growth={max(growth.values()):.4f}, log oracle err={exact:.1e}", el)


def test_4_chenyan():
    t0 = time.perf_counter()
    worst = 0.0
    for d in range(1, 5):
        c = composition_coeffs(20, d)
        for n in range(21):
            exact = float(composition_coeff_bruteforce(n, d))
            worst = max(worst, abs(c[n] - exact) / exact)
    lo, hi = chenyan_ratio_scan(2, np.linspace(0.01, 0.99, 99))
    d2_err = max(abs(lo - 2.0), abs(hi - 2.0))
    stable = {}
    for d in (1, 3):
        a = chenyan_ratio_scan(d, np.linspace(0.01, 0.99, 50))
        b = chenyan_ratio_scan(d, np.linspace(0.01, 0.99, 197))
        stable[d] = abs((a[1] / a[0]) / (b[1] / b[0]) - 1.0)
        stable[d] = stable[d] if all(map(math.isfinite, a + b)) else math.inf
    el = time.perf_counter() - t0
    ok = worst < 1e-12 and d2_err < 1e-8 and max(stable.values()) < 0.05 and el < 10
    assert record(4, ok, f"composition rel err={worst:.1e}, d=2 ratio err={d2_err:.1e}, "
                         f"band refinement shift={max(stable.values()):.4f}", el)


def test_5_hermite():
    t0 = time.perf_counter()
    xs = np.linspace(-3, 3, 121)
    rec = max(float(np.max(np.abs(hermite(n, xs) - hermite_definition(n, xs)))) for n in range(11))
    gen = 0.0
    for z in (-0.5, 0.25, 0.5):
        gen = max(gen, float(np.max(np.abs(hermite_genfun(z, xs, 40) - np.exp(z * xs - z * z / 2)))))
    worst_z, fails = 0.0, []
    for rho in (0.0, 0.5, -0.5, 1.0, -1.0):
        for n in range(7):
            for m in range(7):
                # default seed for every case; no seed search
                est, se = hermite_orthogonality_mc(n, m, rho, replicates=100_000)
                dev = abs(est - hermite_expected(n, m, rho))
                if dev > 3 * se + 1e-12:
                    fails.append((n, m, rho))
                if se > 0:
                    worst_z = max(worst_z, dev / se)
    el = time.perf_counter() - t0
    ok = rec < 1e-8 and gen < 1e-10 and not fails and el < 30
    assert record(5, ok, f"recurrence err={rec:.1e}, genfun err={gen:.1e}, 245 orthogonality cases, "
                         f"max |z|={worst_z:.2f}, outside 3 SE={fails}", el)


def test_6_mc_closed_form():
    t0 = time.perf_counter()
    bm = FBMKernel(0.5)
    parts, ok = [], True
    for i, eps in enumerate((0.5, 0.1)):
        est = l_eps_mc(bm, 1, 0.0, eps, grid=64, replicates=20_000, seed=20 + i)
        grid_m2 = second_moment_closed(bm, 1, 0.0, eps, grid=64)
        cont_m2 = second_moment_closed(bm, 1, 0.0, eps)
        zg = abs(est.second_moment - grid_m2) / est.second_moment_se
        zc = abs(est.second_moment - cont_m2) / est.second_moment_se
        ok &= zg <= 3 and zc <= 3
        parts.append(f"eps={eps}: z(grid)={zg:.2f} z(continuum)={zc:.2f}")
    eps = 1e3
    flat = second_moment_closed(bm, 1, 0.0, eps) * (2 * math.pi * eps)
    ok &= abs(flat - 1) < 0.01
    el = time.perf_counter() - t0
    assert record(6, ok and el < 120, "; ".join(parts) + f"; eps=1e3 scaled={flat:.5f}", el)


def test_7_ladder_dichotomy():
    t0 = time.perf_counter()
    bm = FBMKernel(0.5)
    r1 = moment_ladder(bm, 1, eps_ladder=EXTENDED_LADDER)
    r2 = moment_ladder(bm, 2, eps_ladder=EXTENDED_LADDER)
    terminal = r1.gaps[-1]
    ok = (r1.rel_changes[-1] < 0.02 and r1.gaps_decreasing and r2.growing and r2.slope > 0
          and min(r2.gaps) > 10 * terminal)
    el = time.perf_counter() - t0
    assert record(7, ok and el < 120,
                  f"ladder down to {EXTENDED_LADDER[-1]:.1e}; d=1 last change={r1.rel_changes[-1]:.4f}, "
                  f"d=2 slope={r2.slope:.3f} R2={r2.r_squared:.3f}, min d=2 gap/d=1 terminal gap="
                  f"{min(r2.gaps) / terminal:.1f}", el)


DETERMINISM = [
    ["classify", "--scenario", "self", "--sep", "none", "--H", "0.3", "--d", "2"],
    ["criterion", "--H", "0.5", "--d", "2", "--target", "exists", "--log2-points", "14"],
    ["simulate", "--H", "0.5", "--d", "1", "--eps-ladder", "0.5,0.1", "--grid", "32", "--replicates", "5000",
     "--seed", "17"],
    ["simulate", "--scenario", "collision", "--H", "0.4", "--K", "0.6", "--d", "2", "--eps-ladder", "0.5",
     "--grid", "16", "--replicates", "3000", "--seed", "3"],
    ["chaos", "--H", "0.5", "--d", "1", "--eps-ladder", "0.5,0.1"],
    ["chaos", "--mode", "chenyan", "--d", "3"],
    ["lemmas", "--lemma", "L3i", "--seed", "8"],
]


def _run(argv):
    out = io.StringIO()
    code = main(argv, stdout=out, stderr=io.StringIO())
    return code, out.getvalue()


def test_8_determinism(tmp_path):
    t0 = time.perf_counter()
    bad = []
    for argv in DETERMINISM:
        c1, a = _run(argv + ["--workers", "1"])
        c2, b = _run(argv + ["--workers", "4"])
        c3, c = _run(argv + ["--workers", "2"])
        cfg = tmp_path / "report.json"
        cfg.write_text(a)
        c4, again = _run([argv[0], "--config", str(cfg)])
        if not (a == b == c == again and c1 == c2 == c3 == c4 == json.loads(a)["exit_code"]):
            bad.append(argv[0])
    el = time.perf_counter() - t0
    assert record(8, not bad, f"{len(DETERMINISM)} commands x 3 worker counts + config rerun, differing={bad}", el)


if __name__ == "__main__":
    import tempfile
    from pathlib import Path

    for name, fn in sorted(globals().items()):
        if name.startswith("test_") and callable(fn):
            try:
                if name == "test_8_determinism":
                    with tempfile.TemporaryDirectory() as d:
                        fn(Path(d))
                else:
                    fn()
            except AssertionError:
                pass
