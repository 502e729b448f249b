"""Batch experiment runner.

Subcommands:

* ``run``      -- execute seeded benchmark runs from a JSON config; write
  one ``summary.json`` plus per-seed ``seed-<n>/trace.csv`` and
  ``seed-<n>/hv_curve.csv`` under the output directory.
* ``metrics``  -- re-score a stored predicted front against a stored true
  front (comma-delimited point lists) and print the four metrics as JSON.
* ``schedule`` -- print the beta/V_h schedule table of a config for
  auditing the constants.

The config schema is strict: unknown keys are rejected, semantic errors
carry dotted key paths, and JSON syntax errors carry line/column.  The
summary embeds the fully resolved config, so re-running from it
reproduces the run; with a fixed config the outputs are byte-identical
at any worker count (modulo the wall-time fields).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import bench
from .engine import EngineConfig, _raw_v_h, beta, run, sample_complexity_bounds, v_h
from .errors import ConfigError, DomainError, InputError, NumericalError
from .kernels import MATERN52, SQUARED_EXPONENTIAL, MultiOutputKernel, ScalarKernel
from .partition import DesignSpace, PartitionParams, default_partition_params

SCHEMA_VERSION = 1

# ---------------------------------------------------------------------------
# config loading / validation
# ---------------------------------------------------------------------------

_FAMILY_ALIASES = {
    "squared-exponential": SQUARED_EXPONENTIAL,
    "se": SQUARED_EXPONENTIAL,
    "matern-5/2": MATERN52,
    "matern52": MATERN52,
}


def _fail(path: str, msg: str):
    raise ConfigError(f"{path}: {msg}")


def _want(obj, path: str, typ, msg: str):
    if typ is float:
        if not isinstance(obj, (int, float)) or isinstance(obj, bool):
            _fail(path, msg)
        return float(obj)
    if typ is int:
        if not isinstance(obj, int) or isinstance(obj, bool):
            _fail(path, msg)
        return obj
    if not isinstance(obj, typ):
        _fail(path, msg)
    return obj


def _check_keys(d: dict, path: str, allowed):
    for key in d:
        if key not in allowed:
            _fail(f"{path}.{key}" if path else key, "unknown key")


def _resolve_space(raw: dict) -> dict:
    _check_keys(raw, "space", {"dim", "bounds", "metric", "metric_dim"})
    dim = _want(raw.get("dim", 1), "space.dim", int, "must be an integer >= 1")
    if dim < 1:
        _fail("space.dim", "must be an integer >= 1")
    bounds = raw.get("bounds")
    if bounds is None:
        bounds = [[0.0, 1.0]] * dim
    bounds = _want(bounds, "space.bounds", list, "must be a list of [lo, hi] pairs")
    if len(bounds) != dim:
        _fail("space.bounds", f"must have {dim} [lo, hi] pairs")
    out_bounds = []
    for i, pair in enumerate(bounds):
        if not isinstance(pair, list) or len(pair) != 2:
            _fail(f"space.bounds[{i}]", "must be a [lo, hi] pair")
        lo = _want(pair[0], f"space.bounds[{i}][0]", float, "must be a number")
        hi = _want(pair[1], f"space.bounds[{i}][1]", float, "must be a number")
        if not lo < hi:
            _fail(f"space.bounds[{i}]", f"needs lo < hi, got [{lo}, {hi}]")
        out_bounds.append([lo, hi])
    metric = raw.get("metric", "linf")
    if metric not in ("linf", "l2"):
        _fail("space.metric", "must be 'linf' or 'l2'")
    md = raw.get("metric_dim")
    if md is not None:
        md = _want(md, "space.metric_dim", float, "must be a number >= 0")
        if md < 0:
            _fail("space.metric_dim", "must be a number >= 0")
    return {"dim": dim, "bounds": out_bounds, "metric": metric, "metric_dim": md}


def _resolve_kernel(raw: dict) -> dict:
    _check_keys(raw, "kernel", {"structure", "objectives", "mixing"})
    structure = raw.get("structure", "independent")
    if structure not in ("independent", "linear-mixing"):
        _fail("kernel.structure", "must be 'independent' or 'linear-mixing'")
    objectives = _want(
        raw.get("objectives"), "kernel.objectives", list, "must be a list of kernel specs"
    )
    if len(objectives) < 2:
        _fail("kernel.objectives", "need at least 2 objectives")
    out_obj = []
    for i, spec in enumerate(objectives):
        p = f"kernel.objectives[{i}]"
        spec = _want(spec, p, dict, "must be an object")
        _check_keys(spec, p, {"family", "variance", "lengthscale"})
        family = spec.get("family")
        if family not in _FAMILY_ALIASES:
            _fail(f"{p}.family", f"must be one of {sorted(_FAMILY_ALIASES)}")
        variance = _want(spec.get("variance"), f"{p}.variance", float, "must be a number > 0")
        if variance <= 0:
            _fail(f"{p}.variance", "must be a number > 0")
        lengthscale = _want(
            spec.get("lengthscale"), f"{p}.lengthscale", float, "must be a number > 0"
        )
        if lengthscale <= 0:
            _fail(f"{p}.lengthscale", "must be a number > 0")
        out_obj.append(
            {"family": _FAMILY_ALIASES[family], "variance": variance, "lengthscale": lengthscale}
        )
    mixing = raw.get("mixing")
    if structure == "linear-mixing":
        m = len(out_obj)
        mixing = _want(mixing, "kernel.mixing", list, f"must be an {m}x{m} matrix")
        if len(mixing) != m or any(not isinstance(r, list) or len(r) != m for r in mixing):
            _fail("kernel.mixing", f"must be an {m}x{m} matrix")
        mixing = [[float(v) for v in row] for row in mixing]
    elif mixing is not None:
        _fail("kernel.mixing", "only allowed with structure 'linear-mixing'")
    return {"structure": structure, "objectives": out_obj, "mixing": mixing}


def _resolve_config(raw: dict) -> dict:
    """Validate and materialize every default; returns the resolved dict."""
    top = {
        "space", "kernel", "eps", "delta", "noise_var", "partition",
        "schedules", "seeds", "budget", "grid_size", "out_dir",
    }
    raw = _want(raw, "config", dict, "top level must be an object")
    _check_keys(raw, "", top)
    for required in ("kernel", "eps", "delta"):
        if required not in raw:
            _fail(required, "required key is missing")

    space = _resolve_space(_want(raw.get("space", {}), "space", dict, "must be an object"))
    kernel = _resolve_kernel(_want(raw["kernel"], "kernel", dict, "must be an object"))
    m = len(kernel["objectives"])

    eps = _want(raw["eps"], "eps", list, "must be a list of positive numbers")
    if len(eps) != m:
        _fail("eps", f"must have one entry per objective ({m})")
    eps = [
        _want(e, f"eps[{i}]", float, "must be a number > 0") for i, e in enumerate(eps)
    ]
    for i, e in enumerate(eps):
        if e <= 0:
            _fail(f"eps[{i}]", "must be a number > 0")

    delta = _want(raw["delta"], "delta", float, "must be a number in (0, 1)")
    if not (0.0 < delta < 1.0):
        _fail("delta", "must be a number in (0, 1)")

    noise_var = _want(raw.get("noise_var", 1e-4), "noise_var", float, "must be a number > 0")
    if noise_var <= 0:
        _fail("noise_var", "must be a number > 0")

    sp = DesignSpace(
        dim=space["dim"],
        bounds=np.asarray(space["bounds"]),
        metric=space["metric"],
        metric_dim=space["metric_dim"],
    )
    pdef = default_partition_params(sp)
    part = _want(raw.get("partition", {}), "partition", dict, "must be an object")
    _check_keys(part, "partition", {"N", "rho", "v1", "v2"})
    N = _want(part.get("N", pdef.N), "partition.N", int, "must be an integer >= 2")
    rho = _want(part.get("rho", pdef.rho), "partition.rho", float, "must be in (0, 1)")
    v1 = _want(part.get("v1", pdef.v1), "partition.v1", float, "must be a number > 0")
    v2 = _want(part.get("v2", pdef.v2), "partition.v2", float, "must be a number > 0")
    if N < 2:
        _fail("partition.N", "must be an integer >= 2")
    if not (0.0 < rho < 1.0):
        _fail("partition.rho", "must be in (0, 1)")
    if not (0.0 < v2 <= v1):
        _fail("partition.v2", "needs 0 < v2 <= v1")

    sch = _want(raw.get("schedules", {}), "schedules", dict, "must be an object")
    _check_keys(
        sch, "schedules",
        {"h_max_override", "beta_h_max", "C1", "Q", "reference_h_max"},
    )
    h_override = sch.get("h_max_override")
    if h_override is not None:
        h_override = _want(h_override, "schedules.h_max_override", int, "must be an integer >= 1")
        if h_override < 1:
            _fail("schedules.h_max_override", "must be an integer >= 1")
    beta_h = sch.get("beta_h_max")
    if beta_h is not None:
        beta_h = _want(beta_h, "schedules.beta_h_max", int, "must be an integer >= 0")
    C1 = _want(sch.get("C1", 1.0), "schedules.C1", float, "must be a number > 0")
    Q = _want(sch.get("Q", 1.0), "schedules.Q", float, "must be a number > 0")
    if C1 <= 0:
        _fail("schedules.C1", "must be a number > 0")
    if Q <= 0:
        _fail("schedules.Q", "must be a number > 0")
    ref_h = sch.get("reference_h_max")
    if ref_h is not None:
        ref_h = _want(ref_h, "schedules.reference_h_max", int, "must be an integer")

    seeds = _want(raw.get("seeds", [0]), "seeds", list, "must be a list of integers")
    if not seeds:
        _fail("seeds", "must be a nonempty list of integers")
    seeds = [
        _want(s, f"seeds[{i}]", int, "must be an integer") for i, s in enumerate(seeds)
    ]
    budget = _want(raw.get("budget", 10_000), "budget", int, "must be an integer >= 1")
    if budget < 1:
        _fail("budget", "must be an integer >= 1")
    grid_size = raw.get("grid_size")
    if grid_size is not None:
        grid_size = _want(grid_size, "grid_size", int, "must be an integer >= 2")
        if grid_size < 2:
            _fail("grid_size", "must be an integer >= 2")
    out_dir = _want(raw.get("out_dir", "results"), "out_dir", str, "must be a string path")

    return {
        "space": space,
        "kernel": kernel,
        "eps": eps,
        "delta": delta,
        "noise_var": noise_var,
        "partition": {"N": N, "rho": rho, "v1": v1, "v2": v2},
        "schedules": {
            "h_max_override": h_override,
            "beta_h_max": beta_h,
            "C1": C1,
            "Q": Q,
            "reference_h_max": ref_h,
        },
        "seeds": seeds,
        "budget": budget,
        "grid_size": grid_size,
        "out_dir": out_dir,
    }


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return _resolve_config(raw)


def build_objects(resolved: dict):
    """Instantiate the library objects described by a resolved config."""
    sp = resolved["space"]
    space = DesignSpace(
        dim=sp["dim"],
        bounds=np.asarray(sp["bounds"], dtype=float),
        metric=sp["metric"],
        metric_dim=sp["metric_dim"],
    )
    params = PartitionParams(**resolved["partition"])
    ks = tuple(
        ScalarKernel(family=o["family"], variance=o["variance"], lengthscale=o["lengthscale"])
        for o in resolved["kernel"]["objectives"]
    )
    mixing = resolved["kernel"]["mixing"]
    kernel = MultiOutputKernel(
        kernels=ks, mixing=None if mixing is None else np.asarray(mixing, dtype=float)
    )
    sch = resolved["schedules"]
    config = EngineConfig(
        space=space,
        params=params,
        kernel=kernel,
        eps=np.asarray(resolved["eps"], dtype=float),
        delta=resolved["delta"],
        noise_var=resolved["noise_var"],
        h_max_override=sch["h_max_override"],
        beta_h_max=sch["beta_h_max"],
        C1=sch["C1"],
        Q=sch["Q"],
        budget=resolved["budget"],
    )
    return space, params, kernel, config


# ---------------------------------------------------------------------------
# run subcommand
# ---------------------------------------------------------------------------


def _run_one_seed(resolved: dict, seed: int) -> dict:
    """Full pipeline for one seed (top level so worker pools can use it)."""
    t0 = time.monotonic()
    space, params, kernel, config = build_objects(resolved)
    obj = bench.sample_gp_function(
        kernel, space, grid_size=resolved["grid_size"], seed=seed
    )
    config.containment_probe = obj.value
    oracle = bench.make_oracle(obj, resolved["noise_var"], seed)
    result = run(config, oracle)

    truth = bench.true_pareto_front(obj)
    entry = {
        "seed": seed,
        "evaluations": result.tau,
        "rounds": result.rounds,
        "termination_reason": result.termination_reason,
        "truncated": result.truncated,
        "degeneracy_count": result.degeneracy_count,
        "containment": {
            "escaped": result.containment_escaped,
            "total": result.containment_total,
        },
        "p_hat_size": len(result.p_hat),
        "true_front_size": len(truth),
        "h_max_computed": result.schedules.h_max,
    }
    if result.tau > 0:
        entry["sample_complexity"] = sample_complexity_bounds(
            result, resolved["noise_var"], v2=params.v2
        )
    if result.p_hat:
        predicted = bench.predicted_front_from_result(obj, result.p_hat_nodes)
        report = bench.compute_metrics(
            truth, predicted, config.eps, evaluations=result.tau
        )
        entry["metrics"] = {
            "hypervolume": report.hypervolume,
            "eps_accuracy": report.eps_accuracy,
            "eps_coverage": report.eps_coverage,
            "avg_mse": report.avg_mse,
        }
        entry["reference_point"] = [float(v) for v in report.reference]
        entry["predicted_front_size"] = len(predicted)
        curve = bench.hv_curve(result.eval_log, report.reference)
    else:
        entry["metrics"] = None
        entry["reference_point"] = None
        entry["predicted_front_size"] = 0
        curve = []

    trace_rows = [
        [
            row.round,
            row.tau,
            row.S_size,
            row.P_size,
            repr(row.omega_bar),
            row.action,
            "" if row.node_h is None else row.node_h,
            "" if row.node_i is None else row.node_i,
        ]
        for row in result.trace
    ]
    curve_rows = [[tau, repr(hv)] for tau, hv in curve]
    entry["wall_time_seconds"] = time.monotonic() - t0
    return {"entry": entry, "trace_rows": trace_rows, "curve_rows": curve_rows}


def cmd_run(args) -> int:
    resolved = load_config(args.config)
    if args.seeds is not None:
        resolved["seeds"] = [int(s) for s in args.seeds.split(",") if s != ""]
        if not resolved["seeds"]:
            raise ConfigError("--seeds: must list at least one integer")
    if args.out is not None:
        resolved["out_dir"] = args.out
    if args.budget is not None:
        if args.budget < 1:
            raise ConfigError("--budget: must be >= 1")
        resolved["budget"] = args.budget

    t0 = time.monotonic()
    seeds = resolved["seeds"]
    if args.workers and args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            payloads = dict(zip(seeds, pool.map(_run_one_seed, [resolved] * len(seeds), seeds)))
    else:
        payloads = {seed: _run_one_seed(resolved, seed) for seed in seeds}

    out_dir = resolved["out_dir"]
    os.makedirs(out_dir, exist_ok=True)
    embedded = {k: v for k, v in resolved.items() if k != "out_dir"}
    summary = {
        "schema_version": SCHEMA_VERSION,
        "config": embedded,
        "results": {},
        "wall_time_seconds": 0.0,
    }
    for seed in sorted(seeds):
        payload = payloads[seed]
        seed_dir = os.path.join(out_dir, f"seed-{seed}")
        os.makedirs(seed_dir, exist_ok=True)
        with open(os.path.join(seed_dir, "trace.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(
                ["round", "tau", "S_size", "P_size", "omega_bar", "action", "node_h", "node_i"]
            )
            w.writerows(payload["trace_rows"])
        with open(os.path.join(seed_dir, "hv_curve.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["tau", "hypervolume"])
            w.writerows(payload["curve_rows"])
        summary["results"][str(seed)] = payload["entry"]
    summary["wall_time_seconds"] = time.monotonic() - t0
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    truncated = [s for s, p in payloads.items() if p["entry"]["truncated"]]
    print(f"wrote {os.path.join(out_dir, 'summary.json')} ({len(seeds)} seed(s))")
    if truncated:
        print(f"budget truncation on seed(s): {sorted(truncated)}")
    return 0


# ---------------------------------------------------------------------------
# metrics subcommand
# ---------------------------------------------------------------------------


def _read_points(path: str) -> np.ndarray:
    rows = []
    try:
        with open(path, newline="") as fh:
            for lineno, row in enumerate(csv.reader(fh), start=1):
                if not row or (len(row) == 1 and not row[0].strip()):
                    continue
                try:
                    rows.append([float(v) for v in row])
                except ValueError as exc:
                    raise InputError(f"{path}:{lineno}: non-numeric value ({exc})") from exc
                if len(rows[-1]) != len(rows[0]):
                    raise InputError(
                        f"{path}:{lineno}: expected {len(rows[0])} columns, got {len(rows[-1])}"
                    )
    except OSError as exc:
        raise InputError(f"{path}: cannot read: {exc}") from exc
    if not rows:
        raise InputError(f"{path}: no data rows")
    return np.asarray(rows, dtype=float)


def cmd_metrics(args) -> int:
    from .pareto import ParetoFront, nondominated_set

    predicted_pts = _read_points(args.predicted)
    truth_pts = _read_points(args.truth)
    if predicted_pts.shape[1] != truth_pts.shape[1]:
        raise InputError(
            f"column mismatch: predicted has {predicted_pts.shape[1]}, "
            f"truth has {truth_pts.shape[1]}"
        )
    m = truth_pts.shape[1]
    eps = [float(v) for v in args.eps.split(",")]
    if len(eps) == 1:
        eps = eps * m
    if len(eps) != m:
        raise InputError(f"--eps: expected 1 or {m} values, got {len(eps)}")
    if min(eps) <= 0:
        raise InputError("--eps: values must be positive")
    reference = None
    if args.reference is not None:
        reference = [float(v) for v in args.reference.split(",")]
        if len(reference) != m:
            raise InputError(f"--reference: expected {m} values, got {len(reference)}")

    truth = ParetoFront(points=truth_pts[nondominated_set(truth_pts)])
    predicted = ParetoFront(points=predicted_pts[nondominated_set(predicted_pts)])
    report = bench.compute_metrics(truth, predicted, np.asarray(eps), reference=reference)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "m": m,
        "eps": eps,
        "hypervolume": report.hypervolume,
        "eps_accuracy": report.eps_accuracy,
        "eps_coverage": report.eps_coverage,
        "avg_mse": report.avg_mse,
        "reference": [float(v) for v in report.reference],
    }
    print(json.dumps(doc, indent=2, sort_keys=True))
    return 0


# ---------------------------------------------------------------------------
# schedule subcommand
# ---------------------------------------------------------------------------


def cmd_schedule(args) -> int:
    resolved = load_config(args.config)
    _, params, _, config = build_objects(resolved)
    s = config.schedules()
    print(f"h_max (computed): {s.h_max}")
    ref_h = resolved["schedules"]["reference_h_max"]
    if ref_h is not None:
        print(
            f"h_max (published reference for this configuration): {ref_h} "
            f"(delta {s.h_max - ref_h:+d}: our C1={s.C1:g}, Q={s.Q:g} covering-bound "
            f"convention; the reference value's constants were never stated)"
        )
    print(f"beta depth argument: {s.beta_h_max}")
    if s.h_max_override is not None:
        print(f"h_max_override: {s.h_max_override} (V_h forced to 0 from that depth)")
    print()
    print("tau    beta_tau")
    for tau in (0, 1, 10, 100):
        print(f"{tau:<6d} {beta(tau, s):.9f}")
    print()
    print("h      V_h_theoretical      V_h_effective")
    for h in range(s.h_max + 1):
        raw = _raw_v_h(h, s.C_K, s.alpha, s.v1, s.rho, s.m, s.delta, s.N, s.D1, s.C2, s.C3)
        print(f"{h:<6d} {raw:<20.9f} {v_h(h, s):.9f}")
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adapal",
        description="Adaptive Pareto active learning: batch runner and metric tools.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute seeded benchmark runs from a config")
    p_run.add_argument("--config", required=True, help="path to JSON experiment config")
    p_run.add_argument("--seeds", help="comma-separated seed list override")
    p_run.add_argument("--out", help="output directory override")
    p_run.add_argument("--workers", type=int, default=1, help="parallel seed workers")
    p_run.add_argument("--budget", type=int, help="evaluation cap override")
    p_run.set_defaults(func=cmd_run)

    p_met = sub.add_parser("metrics", help="re-score stored fronts")
    p_met.add_argument("--predicted", required=True, help="CSV of predicted front points")
    p_met.add_argument("--truth", required=True, help="CSV of true front points")
    p_met.add_argument("--eps", required=True, help="epsilon (one value or comma list)")
    p_met.add_argument("--reference", help="hypervolume reference point (comma list)")
    p_met.set_defaults(func=cmd_metrics)

    p_sch = sub.add_parser("schedule", help="print the beta/V_h table for a config")
    p_sch.add_argument("--config", required=True, help="path to JSON experiment config")
    p_sch.set_defaults(func=cmd_schedule)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InputError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc} (jitter reached {exc.jitter})", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
