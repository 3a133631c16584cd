"""Command-line interface: ``fdamean <command> [options]``.

Commands
--------
simulate        Monte-Carlo sup-norm errors (per replication CSV), or a raw curve file
estimate        estimate the mean curve from a dataset CSV
rates           evaluate the closed-form rates as JSON
cv              leave-one-curve-out bandwidth selection
bands           simultaneous confidence band from a dataset CSV
coarsen-check   is the estimate from coarsened data inside the full-data band?

Exit codes: 0 success, 1 numerical failure, 2 usage or input error.
Worker threads for bandwidth loops come from ``FDAMEAN_THREADS``.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import io
from .bands import band_from_dataset
from .bandwidth import bandwidth_grid, grid_search_supnorm, loocv
from .errors import DatasetParseError, InvalidData, NoValidBandwidth, NumericalFailure
from .estimation import CurveDataset, EstimatorConfig, estimate_on_grid, evaluation_grid
from .grid import uniform_grid
from .rates import RateInputs, optimal_bandwidth, summary
from .simulation import SimulationModel, run_replications, sample_curves

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


def _dump_json(obj, path=None):
    text = json.dumps(obj, indent=2, sort_keys=True, default=_json_default)
    if path in (None, "-"):
        print(text)
    else:
        with open(path, "w") as fh:
            fh.write(text + "\n")


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


def _say(msg):
    print(msg, file=sys.stderr)


def _estimator(args) -> EstimatorConfig:
    if getattr(args, "interpolation", False):
        return EstimatorConfig(kind="interpolation")
    return EstimatorConfig(m=args.m, kernel=args.kernel, h=getattr(args, "h", None))


def _points_records(points, columns):
    d = points.shape[1]
    names = ["x"] if d == 1 else [f"x{k + 1}" for k in range(d)]
    recs = []
    for i in range(points.shape[0]):
        rec = {name: points[i, k] for k, name in enumerate(names)}
        for key, vals in columns.items():
            rec[key] = vals[i]
        recs.append(rec)
    return recs, names + list(columns)


# ---------------------------------------------------------------- simulate


def _pairs(n, p):
    ns = n if isinstance(n, list) else [n]
    ps = p if isinstance(p, list) else [p]
    if len(ns) == 1:
        ns = ns * len(ps)
    if len(ps) == 1:
        ps = ps * len(ns)
    if len(ns) != len(ps):
        raise UsageError("n and p lists must have equal length (or one of them a single value)")
    return [(int(a), int(b)) for a, b in zip(ns, ps)]


def _sim_settings(args) -> dict:
    cfg = io.read_config(args.config) if args.config else {}
    model = dict(cfg.get("model", {}))
    est = dict(cfg.get("estimator", {}))
    out = {
        "seed": cfg.get("seed"),
        "replications": cfg.get("replications", 200),
        "eval_size": cfg.get("eval_size"),
        "n": cfg.get("n", 600),
        "p": cfg.get("p", 100),
        "out": cfg.get("out"),
        "mean": model.get("mean", "mu0"),
        "process": model.get("process", "brownian"),
        "sigma": model.get("sigma", 1.0),
        "kind": est.get("kind", "locpol"),
        "m": est.get("m", 2),
        "kernel": est.get("kernel", "epanechnikov"),
        "h": est.get("h"),
        "h_rule": est.get("h_rule", "optimal"),
        "alpha": model.get("alpha", 2.0),
    }
    for key in ("seed", "replications", "eval_size", "n", "p", "out", "mean", "process", "sigma", "m", "kernel", "h", "h_rule"):
        val = getattr(args, key, None)
        if val is not None:
            out[key] = val
    if args.interpolation:
        out["kind"] = "interpolation"
    if out["seed"] is None:
        raise UsageError("simulate needs --seed (or 'seed' in the config file)")
    return out


def _bandwidth_for(s, model, n, grid, estimator, pts, draws_seed):
    if s["kind"] == "interpolation":
        return None, "interpolation"
    if s["h"] is not None:
        return float(s["h"]), "fixed"
    rule = s["h_rule"]
    if rule == "optimal":
        return optimal_bandwidth(RateInputs(n, grid.p, grid.d, s["alpha"])), "optimal"
    if rule == "tuned":
        res = grid_search_supnorm(model, n, grid, estimator, bandwidth_grid(grid.p_min), s["replications"], draws_seed, pts)
        return res.best_h, "tuned"
    raise UsageError(f"unknown h_rule {rule!r}; use 'optimal', 'tuned' or give h")


def cmd_simulate(args) -> int:
    s = _sim_settings(args)
    pairs = _pairs(s["n"], s["p"])
    model = SimulationModel.named(s["mean"], process=s["process"], sigma=float(s["sigma"]), alpha=float(s["alpha"]))
    root = np.random.SeedSequence(int(s["seed"]))

    if args.curves:
        n, p = pairs[0]
        y = sample_curves(model, n, uniform_grid(p), np.random.default_rng(root))
        io.write_dataset(CurveDataset(uniform_grid(p), y), args.curves)
        _say(f"wrote {n} curves on {p} design points to {args.curves}")
        return EXIT_OK

    records = []
    for (n, p), child in zip(pairs, root.spawn(len(pairs))):
        grid = uniform_grid(p)
        pts = evaluation_grid(grid.d, s["eval_size"])
        base = EstimatorConfig(kind=s["kind"], m=int(s["m"]), kernel=s["kernel"])
        tune_seed, draw_seed = child.spawn(2)
        h, rule = _bandwidth_for(s, model, n, grid, base, pts, tune_seed)
        config = base.with_h(h) if h is not None else base
        rep = run_replications(model, n, grid, config, pts, int(s["replications"]), draw_seed)
        if rep.error:
            _say(f"n={n} p={p}: {rep.error}")
        summ = rep.summary()
        _say(f"n={n} p={p} h={h if h is None else f'{h:.5g}'} ({rule}): mean sup error {summ['mean_total']:.5g} +- {summ['se_total']:.2g}")
        for row in rep.rows():
            records.append({"n": n, "p": p, "kind": config.kind, "m": config.m if config.kind == "locpol" else None, "h": h, "h_rule": rule, **row})
    columns = ["n", "p", "kind", "m", "h", "h_rule", "replication", "total", "bias", "noise", "process"]
    io.write_table(s["out"], records, columns)
    if any(math.isnan(r["total"]) for r in records):
        return EXIT_NUMERICAL
    return EXIT_OK


# ---------------------------------------------------------------- estimate


def cmd_estimate(args) -> int:
    data = io.read_dataset(args.data)
    if not args.interpolation and args.h is None:
        raise UsageError("estimate needs --h (or --interpolation)")
    est = estimate_on_grid(data, _estimator(args), evaluation_grid(data.grid.d, args.eval_size))
    recs, cols = _points_records(est.eval_points, {"value": est.values})
    io.write_table(args.out, recs, cols)
    return EXIT_OK


# ---------------------------------------------------------------- rates


def cmd_rates(args) -> int:
    inputs = RateInputs(args.n, tuple(args.p), args.d, args.alpha, args.c)
    _dump_json(summary(inputs, args.h), args.out)
    return EXIT_OK


# ---------------------------------------------------------------- cv


def _parse_h_grid(spec: str | None, p_min: int):
    if spec is None:
        return bandwidth_grid(p_min)
    if ":" in spec:
        start, stop, step = (float(v) for v in spec.split(":"))
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        return tuple(start + step * np.arange(count))
    return tuple(float(v) for v in spec.split(","))


def cmd_cv(args) -> int:
    data = io.read_dataset(args.data)
    config = EstimatorConfig(m=args.m, kernel=args.kernel)
    res = loocv(data, config, _parse_h_grid(args.h_grid, data.grid.p_min))
    recs = [{"h": h, "score": s, "best": bool(h == res.best_h)} for h, s in zip(res.h_values, res.scores)]
    io.write_table(args.out, recs, ["h", "score", "best"])
    best_score = float(res.scores[np.flatnonzero(res.h_values == res.best_h)[0]])
    result = {"best_h": res.best_h, "best_score": best_score, "failures": {str(k): v for k, v in res.failures.items()}}
    if args.json:
        _dump_json(result, args.json)
    _say(f"best h = {res.best_h:.6g} (CV score {best_score:.6g})")
    return EXIT_OK


# ---------------------------------------------------------------- bands


def _band(data, args, h, rng):
    config = EstimatorConfig(m=args.m, kernel=args.kernel, h=h)
    pts = evaluation_grid(data.grid.d, args.eval_size)
    return band_from_dataset(data, config, pts, args.level, args.draws, rng, args.mode)


def cmd_bands(args) -> int:
    data = io.read_dataset(args.data)
    band = _band(data, args, args.h, np.random.default_rng(args.seed))
    recs, cols = _points_records(
        band.center.eval_points, {"center": band.center.values, "lower": band.lower, "upper": band.upper}
    )
    io.write_table(args.out, recs, cols)
    result = {"q": band.quantile, "level": band.level, "mode": band.mode, "n": band.n, "h": args.h, "checks": band.checks}
    _dump_json(result, args.json)
    return EXIT_OK


# ---------------------------------------------------------------- coarsen-check


def cmd_coarsen_check(args) -> int:
    data = io.read_dataset(args.data)
    band = _band(data, args, args.h, np.random.default_rng(args.seed))
    if args.every is not None:
        coarse = io.subsample_columns(data, every=args.every)
    else:
        step = data.grid.p[0] / args.p_coarse
        idx = np.unique(np.floor(np.arange(args.p_coarse) * step).astype(int))
        coarse = io.subsample_columns(data, indices=[idx] * data.grid.d if data.grid.d > 1 else idx)
    h_coarse = max(args.h if args.h_coarse is None else args.h_coarse, args.c / coarse.grid.p_min)
    config = EstimatorConfig(m=args.m, kernel=args.kernel, h=h_coarse)
    est = estimate_on_grid(coarse, config, band.center.eval_points)
    inside = band.inside(est.values)
    excess = np.maximum(est.values - band.upper, band.lower - est.values)
    first = band.first_violation(est.values)
    result = {
        "inside": bool(inside.all()),
        "verdict": "inside band" if inside.all() else "violation",
        "first_violation": None if first is None else first.tolist(),
        "fraction_outside": float(1.0 - inside.mean()),
        "max_excess": float(max(excess.max(), 0.0)),
        "p_full": list(data.grid.p),
        "p_coarse": list(coarse.grid.p),
        "h_full": args.h,
        "h_coarse": h_coarse,
        "q": band.quantile,
        "level": band.level,
    }
    _dump_json(result, args.json)
    where = "" if first is None else f"; first violation at x = {', '.join(f'{v:.4g}' for v in first)}"
    _say(f"p {result['p_full']} -> {result['p_coarse']}: {result['verdict']}{where}")
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _add_estimator_args(sub, with_h=True, h_required=False):
    sub.add_argument("--m", type=int, default=2, help="local polynomial degree (default 2)")
    sub.add_argument("--kernel", default="epanechnikov", choices=["epanechnikov", "triangular"])
    if with_h:
        sub.add_argument("--h", type=float, required=h_required, help="bandwidth")


def _add_band_args(sub):
    sub.add_argument("--level", type=float, default=0.95)
    sub.add_argument("--draws", type=int, default=5000, help="Gaussian draws for the sup quantile")
    sub.add_argument("--mode", choices=["unstudentized", "studentized"], default="unstudentized")
    sub.add_argument("--eval-size", type=int, default=None, help="evaluation points per axis")
    sub.add_argument("--seed", type=int, required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fdamean", description="Mean-function estimation for functional data.")
    subs = parser.add_subparsers(dest="command", required=True)

    sim = subs.add_parser("simulate", help="Monte-Carlo sup-norm errors")
    sim.add_argument("--config", help="TOML or JSON experiment config")
    sim.add_argument("--seed", type=int)
    sim.add_argument("--n", type=int, nargs="+")
    sim.add_argument("--p", type=int, nargs="+")
    sim.add_argument("--mean", choices=["mu0", "sin2pi", "zero"])
    sim.add_argument("--process", choices=["brownian", "none"])
    sim.add_argument("--sigma", type=float)
    sim.add_argument("--m", type=int)
    sim.add_argument("--kernel", choices=["epanechnikov", "triangular"])
    sim.add_argument("--h", type=float)
    sim.add_argument("--h-rule", dest="h_rule", choices=["optimal", "tuned"])
    sim.add_argument("--interpolation", action="store_true")
    sim.add_argument("--replications", type=int)
    sim.add_argument("--eval-size", dest="eval_size", type=int)
    sim.add_argument("--out", help="CSV output (default stdout)")
    sim.add_argument("--curves", help="write one simulated dataset CSV instead of running replications")
    sim.set_defaults(func=cmd_simulate)

    est = subs.add_parser("estimate", help="estimate the mean curve")
    est.add_argument("--data", required=True)
    _add_estimator_args(est)
    est.add_argument("--interpolation", action="store_true")
    est.add_argument("--eval-size", type=int, default=None)
    est.add_argument("--out", default="-")
    est.set_defaults(func=cmd_estimate)

    rates = subs.add_parser("rates", help="closed-form rates as JSON")
    rates.add_argument("--n", type=int, required=True)
    rates.add_argument("--p", type=int, nargs="+", required=True)
    rates.add_argument("--d", type=int, default=1)
    rates.add_argument("--alpha", type=float, default=2.0)
    rates.add_argument("--c", type=float, default=3.0)
    rates.add_argument("--h", type=float, default=None)
    rates.add_argument("--out", default="-")
    rates.set_defaults(func=cmd_rates)

    cv = subs.add_parser("cv", help="leave-one-curve-out cross-validation")
    cv.add_argument("--data", required=True)
    _add_estimator_args(cv, with_h=False)
    cv.add_argument("--h-grid", help="'start:stop:step' or comma list (default 3/p_min to 0.25 by 0.005)")
    cv.add_argument("--out", default="-", help="score table CSV")
    cv.add_argument("--json", help="best h as JSON")
    cv.set_defaults(func=cmd_cv)

    bands = subs.add_parser("bands", help="simultaneous confidence band")
    bands.add_argument("--data", required=True)
    _add_estimator_args(bands, h_required=True)
    _add_band_args(bands)
    bands.add_argument("--out", default="-", help="band CSV")
    bands.add_argument("--json", default=None, help="quantile and checks JSON (default stdout)")
    bands.set_defaults(func=cmd_bands)

    cc = subs.add_parser("coarsen-check", help="coarse-data estimate inside the full-data band?")
    cc.add_argument("--data", required=True)
    _add_estimator_args(cc, h_required=True)
    _add_band_args(cc)
    group = cc.add_mutually_exclusive_group(required=True)
    group.add_argument("--every", type=int, help="keep every k-th design point per axis")
    group.add_argument("--p-coarse", type=int, help="target number of points per axis")
    cc.add_argument("--h-coarse", type=float, help="bandwidth on the coarse grid (raised to at least c/p)")
    cc.add_argument("--c", type=float, default=3.0)
    cc.add_argument("--json", default=None)
    cc.set_defaults(func=cmd_coarsen_check)
    return parser


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.func(args)
    except (NumericalFailure, NoValidBandwidth, np.linalg.LinAlgError) as exc:
        _say(f"fdamean {args.command}: numerical failure: {exc}")
        return EXIT_NUMERICAL
    except (UsageError, DatasetParseError, InvalidData, ValueError, OSError) as exc:
        _say(f"fdamean {args.command}: {exc}")
        return EXIT_USAGE


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
