"""Command-line front end: ``ltlab {classify,criterion,simulate,chaos,lemmas}``.

Every run writes one JSON report that embeds the fully resolved
configuration (seed included), so feeding the ``config`` block back through
``--config`` reproduces the report byte for byte.  ``--format csv`` writes the
run's table instead; with ``--out`` the JSON report goes next to it.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import BudgetExceeded, DomainError, InvalidScenario, LtlabError

# keys not embedded in reports: where things are read or written, and thread count
_LOCATION_KEYS = ("config", "out", "workers")

DEFAULTS = {
    "scenario": "localtime",
    "sep": "none",
    "N": None,
    "H": "0.5",
    "K": None,
    "d": 1,
    "level": "0",
    "S": "1",
    "eps0": 0.2,
    "c4": False,
    "eps_ladder": None,
    "grid": None,
    "replicates": 20000,
    "trunc_n": None,
    "seed": 0,
    "format": "json",
    "workers": 1,
    "target": "both",
    "gamma": 1.5,
    "lam": 0.0,
    "log2_points": 18,
    "max_seconds": 300.0,
    "mode": "phi",
    "lemma": "all",
    "alpha": None,
    "beta": None,
    "kappa": 0.5,
    "A": None,
    "M": None,
    "r": 1.0,
    "points": "0",
    "n_configs": 200,
}

_INT_KEYS = {"N", "d", "replicates", "trunc_n", "seed", "workers", "log2_points", "n_configs"}
_FLOAT_KEYS = {"eps0", "gamma", "lam", "max_seconds", "alpha", "beta", "kappa", "A", "M", "r"}
_BOOL_KEYS = {"c4"}


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("scenario")
    g.add_argument("--scenario", choices=["localtime", "collision", "intersection", "self"])
    g.add_argument("--sep", choices=["well", "partial", "none"])
    g.add_argument("--N", type=int)
    g.add_argument("--H", help="comma list of Hurst indices")
    g.add_argument("--K", help="comma list of Hurst indices of the second field")
    g.add_argument("--d", type=int)
    g.add_argument("--level", help="comma list (one value is broadcast)")
    g.add_argument("--S", help="comma list of 1-based coordinates for partial separation")
    g.add_argument("--eps0", type=float)
    g.add_argument("--c4", action="store_const", const=True, default=None, help="assert condition C4")
    b = common.add_argument_group("budgets and output")
    b.add_argument("--eps-ladder", dest="eps_ladder", help="comma list of regularisations or cutoffs")
    b.add_argument("--grid", help="points per parameter axis (comma list allowed)")
    b.add_argument("--replicates", type=int)
    b.add_argument("--trunc-n", dest="trunc_n", type=int)
    b.add_argument("--seed", type=int)
    b.add_argument("--workers", type=int, help="threads for Monte Carlo (does not change results)")
    b.add_argument("--config", help="JSON file, or flat key = value file")
    b.add_argument("--out", help="output path (default: stdout)")
    b.add_argument("--format", choices=["json", "csv"])

    p = argparse.ArgumentParser(prog="ltlab", description="Local-time laboratory for anisotropic Gaussian fields.")
    p.add_argument("--version", action="version", version=f"ltlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("classify", parents=[common], help="threshold verdicts")

    c = sub.add_parser("criterion", parents=[common], help="integral criteria on a cutoff ladder")
    c.add_argument("--target", choices=["both", "exists", "smooth", "prop"])
    c.add_argument("--gamma", type=float)
    c.add_argument("--lambda", dest="lam", type=float)
    c.add_argument("--log2-points", dest="log2_points", type=int)
    c.add_argument("--max-seconds", dest="max_seconds", type=float)

    sub.add_parser("simulate", parents=[common], help="Monte Carlo and closed-form ladders")

    ch = sub.add_parser("chaos", parents=[common], help="chaos series and the Chen-Yan identity")
    ch.add_argument("--mode", choices=["phi", "chenyan"])

    lm = sub.add_parser("lemmas", parents=[common], help="singular-integral bounds")
    lm.add_argument("--lemma", choices=["all", "L1", "L2i", "L2ii", "L3i", "L3ii", "L8"])
    lm.add_argument("--alpha", type=float)
    lm.add_argument("--beta", type=float)
    lm.add_argument("--kappa", type=float)
    lm.add_argument("--A", type=float)
    lm.add_argument("--M", type=float)
    lm.add_argument("--r", type=float)
    lm.add_argument("--points", help="comma list of points in the ball")
    lm.add_argument("--n-configs", dest="n_configs", type=int)
    return p


def _coerce(key, value):
    if value is None or key not in DEFAULTS:
        return value
    if isinstance(value, str) and value.strip().lower() in ("", "null"):
        return None
    if key in _INT_KEYS:
        return int(value)
    if key in _FLOAT_KEYS:
        return float(value)
    if key in _BOOL_KEYS:
        if isinstance(value, str):
            return value.strip().lower() in ("1", "true", "yes", "on")
        return bool(value)
    if isinstance(value, (list, tuple)):
        return ",".join(str(v) for v in value)
    return str(value) if not isinstance(value, str) else value


def load_config_file(path) -> dict:
    """Flat mapping from a JSON object or a section-less ``key = value`` file."""
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        raw = json.loads(text)
        if not isinstance(raw, dict):
            raise InvalidScenario("config file must hold one JSON object")
        raw = raw.get("config", raw) if "config" in raw and isinstance(raw["config"], dict) else raw
    else:
        cp = configparser.ConfigParser()
        cp.optionxform = str
        cp.read_string("[ltlab]\n" + text)
        raw = dict(cp["ltlab"])
    out = {}
    for k, v in raw.items():
        key = k.replace("-", "_")
        if key == "lambda":
            key = "lam"
        if key == "command":
            out[key] = v
            continue
        if key not in DEFAULTS:
            raise InvalidScenario(f"unknown config key {k!r}")
        out[key] = _coerce(key, v)
    return out


def resolve_config(args: argparse.Namespace) -> dict:
    """Defaults, then the config file, then explicit flags."""
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        filecfg = load_config_file(args.config)
        filecfg.pop("command", None)
        cfg.update(filecfg)
    for key in DEFAULTS:
        v = getattr(args, key, None)
        if v is not None:
            cfg[key] = _coerce(key, v)
    cfg["command"] = args.command
    return cfg


def _floats(text, name):
    if text is None:
        return None
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError as exc:
        raise InvalidScenario(f"bad number list for {name}: {text!r}") from exc


def _grid(cfg):
    g = _floats(cfg["grid"], "grid")
    if g is None:
        return None
    g = [int(x) for x in g]
    return g[0] if len(g) == 1 else g


def build_scenario(cfg):
    from .criteria import NotSeparated, PartiallySeparated, Scenario, WellSeparated

    H = _floats(cfg["H"], "H")
    N = cfg["N"]
    if N is not None:
        if len(H) == 1:
            H = H * N
        elif len(H) != N:
            raise InvalidScenario(f"--H has {len(H)} entries but --N is {N}")
    K = _floats(cfg["K"], "K")
    if K is not None and cfg["scenario"] == "collision" and len(K) == 1:
        K = K * len(H)
    sep = None
    if cfg["scenario"] == "self":
        sep = {
            "well": WellSeparated,
            "none": NotSeparated,
            "partial": lambda: PartiallySeparated([int(x) for x in _floats(cfg["S"], "S")], cfg["eps0"], cfg["c4"]),
        }[cfg["sep"]]()
    level = _floats(cfg["level"], "level") or [0.0]
    return Scenario(cfg["scenario"], H, cfg["d"], K=K, level=level, separation=sep)


# ---------------------------------------------------------------------------
# commands: each returns (result, table, exit_code)
# ---------------------------------------------------------------------------


def cmd_classify(cfg):
    from .criteria.classify import RULES, UNKNOWN, threshold_classify

    sc = build_scenario(cfg)
    v = threshold_classify(sc)
    res = {"scenario": sc.to_dict(), "verdict": v.to_dict(),
           "clauses": {k: RULES[k] for k in v.justification}}
    if UNKNOWN in (v.exists_L2, v.smooth_D1):
        res["gap"] = _gap_bounds(sc, v)
    row = {"scenario": sc.kind, "H": ";".join(f"{h:g}" for h in sc.H.h), "d": sc.d,
           "exists_L2": v.exists_L2, "smooth_D1": v.smooth_D1, "justification": ";".join(v.justification)}
    return res, [row], 0


def _gap_bounds(sc, v):
    tv = v.threshold_values
    d = sc.d
    if sc.kind == "self" and "max_bound" in tv:
        return {"quantity": "sum_inv_H", "value": tv["sum_inv_H"], "no_if_at_most": tv["max_bound"],
                "yes_if_above": d + 2}
    if sc.kind == "self":
        return {"quantity": "2 sum_S + sum_Sc / 2 sum_inv_H", "sufficient_value": tv["sum_partial"],
                "necessary_value": tv["two_sum_inv_H"], "existence_bound": d, "smoothness_bound": d + 2}
    return {"quantity": "sum_inv_H", "value": tv["sum_inv_H"], "yes_if_above": d + 2}


def cmd_criterion(cfg):
    from .criteria import QuadBudget, evaluate_criterion, prop_integrand, scenario_kernel, verify_dichotomy

    sc = build_scenario(cfg)
    budget = QuadBudget(log2_points=cfg["log2_points"], seed=cfg["seed"], max_seconds=cfg["max_seconds"])
    ladder = _floats(cfg["eps_ladder"], "eps_ladder")
    if cfg["target"] == "prop":
        if sc.kind != "localtime":
            raise InvalidScenario("the prop criterion is defined for plain local times")
        kernel = scenario_kernel(sc)
        diag = evaluate_criterion(prop_integrand(kernel, cfg["gamma"], cfg["lam"]), ladder=ladder, budget=budget)
        q = sc.H.q_sum()
        expected = "Convergent" if q > cfg["gamma"] else "Divergent"
        checks = [{"target": "prop", "expected": expected, "label": diag.label,
                   "agree": diag.label == expected, "iff": True, "diagnosis": diag.to_dict()}]
        res = {"scenario": sc.to_dict(), "gamma": cfg["gamma"], "lambda": cfg["lam"], "sum_inv_H": q,
               "checks": checks}
    else:
        targets = ("exists", "smooth") if cfg["target"] == "both" else (cfg["target"],)
        rep = verify_dichotomy(sc, budget=budget, targets=targets, ladder=ladder)
        res = rep.to_dict()
        checks = rep.checks
    table = []
    for c in checks:
        diag = c["diagnosis"]
        for cut, val in zip(diag["cutoffs"], diag["values"]):
            table.append({"target": c["target"], "cutoff": cut, "value": val, "label": c["label"]})
    disagree = [c for c in checks if c["iff"] and c["label"] != "Inconclusive" and not c["agree"]]
    res["concordant"] = not disagree
    return res, table, 1 if disagree else 0


def _rung_seed(seed, i):
    return int(np.random.SeedSequence([int(seed), int(i)]).generate_state(1)[0])


def cmd_simulate(cfg):
    from .criteria import YES, scenario_kernel, threshold_classify
    from .localtime import DEFAULT_LADDER, cauchy_gap, l_eps_mc, mean_closed, second_moment_closed
    from .pairquad import default_rule

    sc = build_scenario(cfg)
    kernel = scenario_kernel(sc)
    level = list(sc.level) if sc.kind == "localtime" else [0.0]
    ladder = sorted(_floats(cfg["eps_ladder"], "eps_ladder") or DEFAULT_LADDER, reverse=True)
    grid = _grid(cfg)
    rule = default_rule(kernel)
    rows = []
    for i, eps in enumerate(ladder):
        row = {"eps": eps}
        row["closed_second_moment"] = second_moment_closed(kernel, sc.d, level, eps, rule=rule)
        row["cauchy_gap"] = cauchy_gap(kernel, sc.d, level, eps, eps / 2, rule=rule)
        if cfg["replicates"] > 0:
            est = l_eps_mc(kernel, sc.d, level, eps, grid, cfg["replicates"], _rung_seed(cfg["seed"], i),
                           cfg["workers"])
            g = est.grid_spec["n_per_axis"]
            row["mc_mean"] = est.value
            row["mc_mean_se"] = est.standard_error
            row["grid_mean"] = mean_closed(kernel, sc.d, level, eps, g)
            row["mc_second_moment"] = est.second_moment
            row["mc_second_moment_se"] = est.second_moment_se
            row["grid_second_moment"] = second_moment_closed(kernel, sc.d, level, eps, grid=g)
            row["within_3se"] = bool(abs(est.second_moment - row["grid_second_moment"]) <= 3 * est.second_moment_se)
            row["within_3se_continuum"] = bool(
                abs(est.second_moment - row["closed_second_moment"]) <= 3 * est.second_moment_se)
        rows.append(row)
    gaps = [r["cauchy_gap"] for r in rows]
    decreasing = all(b < a for a, b in zip(gaps[:-1], gaps[1:]))
    if len(gaps) > 1 and decreasing and gaps[-1] < gaps[0] / 4:
        flag = "consistent with existence"
    elif len(gaps) > 1 and gaps[-1] >= gaps[0]:
        flag = "consistent with non-existence"
    else:
        flag = "undetermined"
    verdict = threshold_classify(sc)
    res = {
        "scenario": sc.to_dict(),
        "kernel": kernel.kernel_id,
        "rule": rule.kind,
        "ladder": rows,
        "cauchy_gaps_decreasing": decreasing,
        "flag": flag,
        "verdict": verdict.to_dict(),
        "agrees_with_classify": flag != "undetermined" and (flag == "consistent with existence") == (verdict.exists_L2 == YES),
    }
    if cfg["replicates"] > 0:
        res["mc_agrees"] = all(r["within_3se"] for r in rows)
    return res, rows, 0


def cmd_chaos(cfg):
    from .chaos import chenyan_closed, chenyan_lhs, chenyan_ratio_scan, phi_series
    from .criteria import scenario_kernel, threshold_classify

    if cfg["mode"] == "chenyan":
        n = _grid(cfg) or 99
        xs = np.linspace(0.01, 0.99, int(n))
        rows = []
        for x in xs:
            lhs = chenyan_lhs(float(x), cfg["d"])
            rows.append({"x": float(x), "lhs": lhs, "closed": float(chenyan_closed(x, cfg["d"])),
                         "ratio": lhs / (x * (1 - x) ** (-(cfg["d"] / 2 + 1)))})
        lo, hi = chenyan_ratio_scan(cfg["d"], xs)
        return {"d": cfg["d"], "min_ratio": lo, "max_ratio": hi, "band": hi / lo}, rows, 0

    sc = build_scenario(cfg)
    if sc.kind == "localtime" and any(x != 0 for x in sc.level):
        raise DomainError("the chaos series is computed at level 0 only")
    kernel = scenario_kernel(sc)
    ladder = sorted(_floats(cfg["eps_ladder"], "eps_ladder") or (0.5, 0.1, 0.02, 0.004), reverse=True)
    series, rows = [], []
    for eps in ladder:
        ps = phi_series(kernel, sc.d, eps, trunc_n=cfg["trunc_n"])
        series.append(ps.to_dict())
        rows.append({"eps": eps, "phi_1": ps.value, "resummed": ps.resummed, "truncation_n": ps.truncation_n,
                     "tail_estimate": ps.tail_estimate, "converged": ps.converged})
    vals = [r["phi_1"] for r in rows]
    if cfg["trunc_n"] == 0:
        status = "empty series"
    elif not all(r["converged"] for r in rows):
        status = "truncated (tail bound above tolerance)"
    elif len(vals) > 1 and abs(vals[-1] - vals[-2]) <= 0.02 * abs(vals[-1]):
        status = "bounded along the ladder"
    elif len(vals) > 1 and all(b > a for a, b in zip(vals[:-1], vals[1:])):
        status = "growing along the ladder"
    else:
        status = "finite at every rung"
    res = {"scenario": sc.to_dict(), "kernel": kernel.kernel_id, "series": series, "status": status,
           "verdict": threshold_classify(sc).to_dict()}
    return res, rows, 0


_LEMMA1_GRID = ((2.0, 1.0), (1.0, 1.0), (2.0, 0.25), (3.0, 0.5), (0.5, 2.0))
_SCAN_GRID = (("L2i", 2.0, 1.0), ("L2i", 3.0, 0.5), ("L2ii", 2.0, 0.5), ("L2ii", 1.0, 1.0),
              ("L3i", None, 0.5), ("L3i", None, 0.25), ("L3ii", None, 0.5))


def cmd_lemmas(cfg):
    from .chaos import chenyan_ratio_scan
    from .criteria import lemma1_band, lemma23_check, lemma23_scan

    which = cfg["lemma"]
    res, rows = {}, []
    ok = True
    if which in ("all", "L1"):
        pairs = [(cfg["alpha"], cfg["beta"])] if cfg["alpha"] is not None and cfg["beta"] is not None else _LEMMA1_GRID
        bands = []
        for a, b in pairs:
            rep = lemma1_band(a, b)
            passed = math.isfinite(rep.band[-1]) and abs(rep.growth) < 0.05
            ok &= passed
            bands.append({**rep.to_dict(), "passed": passed})
            for A, ratio in zip(rep.A, rep.ratios):
                rows.append({"lemma": "L1", "alpha": a, "beta": b, "param": A, "value": ratio})
        res["L1"] = bands
    if which in ("all", "L8"):
        xs = np.linspace(0.01, 0.99, 99)
        scans = []
        for d in ([cfg["d"]] if which == "L8" else [1, 2, 3]):
            lo, hi = chenyan_ratio_scan(d, xs)
            lo2, hi2 = chenyan_ratio_scan(d, np.linspace(0.01, 0.99, 197))
            stable = abs((hi2 / lo2) / (hi / lo) - 1) < 0.05
            ok &= stable
            scans.append({"d": d, "min_ratio": lo, "max_ratio": hi, "band": hi / lo, "refined_band": hi2 / lo2,
                          "passed": stable})
            rows.append({"lemma": "L8", "alpha": None, "beta": None, "param": d, "value": hi / lo})
        res["L8"] = scans
    tags = [t for t in ("L2i", "L2ii", "L3i", "L3ii") if which in ("all", t)]
    for tag in tags:
        if which == "all":
            grid = [(a, b) for t, a, b in _SCAN_GRID if t == tag]
        else:
            beta = cfg["beta"] if cfg["beta"] is not None else (1.0 if tag == "L2i" else 0.5)
            alpha = cfg["alpha"] if cfg["alpha"] is not None else (None if tag.startswith("L3") else 2.0)
            grid = [(alpha, beta)]
        out = []
        for a, b in grid:
            entry = {"alpha": a, "beta": b}
            if which != "all":
                pts = _floats(cfg["points"], "points")
                A = cfg["A"] if cfg["A"] is not None else 0.01
                M = cfg["M"] if cfg["M"] is not None else 1.0
                lhs, rhs, c = lemma23_check(tag, a, b, cfg["kappa"], A, cfg["r"], 0.0, pts, M)
                entry["check"] = {"A": A, "M": M, "r": cfg["r"], "points": pts, "lhs": lhs, "rhs": rhs,
                                  "constant": c}
            if cfg["n_configs"] > 0:
                scan = lemma23_scan(tag, a, b, cfg["kappa"], n_configs=cfg["n_configs"], seed=cfg["seed"],
                                    M=cfg["M"] if tag == "L3ii" else None)
                passed = math.isfinite(scan.max_constant_full) and scan.doubling_ratio <= 1.05
                ok &= passed
                entry.update({"scan": scan.to_dict(), "passed": passed})
                rows.append({"lemma": tag, "alpha": a, "beta": b, "param": "doubling_ratio",
                             "value": scan.doubling_ratio})
            out.append(entry)
        res[tag] = out
    res["all_passed"] = bool(ok)
    return res, rows, 0 if ok else 1


COMMANDS = {
    "classify": cmd_classify,
    "criterion": cmd_criterion,
    "simulate": cmd_simulate,
    "chaos": cmd_chaos,
    "lemmas": cmd_lemmas,
}


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else ("inf" if f > 0 else "-inf" if f < 0 else "nan")
    return obj


def render_json(report) -> str:
    return json.dumps(_clean(report), sort_keys=True, indent=2) + "\n"


def render_csv(rows) -> str:
    rows = _clean(rows or [])
    if not rows:
        return ""
    header = []
    for r in rows:
        header += [k for k in r if k not in header]
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=header, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in header})
    return buf.getvalue()


def make_report(cfg, result, exit_code, error=None):
    embedded = {k: v for k, v in sorted(cfg.items()) if k not in _LOCATION_KEYS}
    rep = {"ltlab_version": __version__, "command": cfg["command"], "seed": cfg["seed"], "config": embedded,
           "exit_code": exit_code, "result": result}
    if error is not None:
        rep["error"] = error
    return rep


def _emit(cfg, report, rows, stdout):
    out = cfg.get("out")
    if cfg["format"] == "csv":
        text = render_csv(rows)
        if out:
            Path(out).write_text(text)
            Path(out).with_suffix(".json").write_text(render_json(report))
        else:
            stdout.write(text)
    else:
        text = render_json(report)
        if out:
            Path(out).write_text(text)
        else:
            stdout.write(text)


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        cfg["out"] = args.out
    except (LtlabError, ValueError, OSError) as exc:
        stderr.write(f"ltlab: {exc}\n")
        return getattr(exc, "exit_code", 2)
    try:
        result, rows, code = COMMANDS[args.command](cfg)
        report = make_report(cfg, result, code)
    except BudgetExceeded as exc:
        partial = exc.partial.to_dict() if exc.partial is not None else None
        report = make_report(cfg, {"partial": partial}, exc.exit_code, {"type": type(exc).__name__, "message": str(exc)})
        rows, code = [], exc.exit_code
    except (LtlabError, ValueError) as exc:
        code = getattr(exc, "exit_code", 2)
        stderr.write(f"ltlab: {type(exc).__name__}: {exc}\n")
        report = make_report(cfg, None, code, {"type": type(exc).__name__, "message": str(exc)})
        _emit(cfg, report, [], stdout)
        return code
    _emit(cfg, report, rows, stdout)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
