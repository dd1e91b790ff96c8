"""Command-line entry point.

Subcommands validate models, evaluate transforms, run the estimators, and
reproduce the experiment tables/figures as CSV. Every CSV is written with
a JSON manifest sidecar containing the command, config, seed, numerics and
toolkit version, so any output can be regenerated from the manifest alone.

Exit codes: 0 success, 1 usage/parse, 2 model invalid, 3 numerical
failure, 4 run-cap exceeded.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import bundled_config_path, dump_spec, load_spec, spec_to_dict
from .errors import (
    HawkesError,
    HeavyTailOrNoRoot,
    InfeasibleRareEvent,
    MarkMgfDomainExceeded,
    MaxRunsExceeded,
    ModelInvalid,
    NearSingular,
    NetProfitViolated,
    NoConvergence,
    NoInteriorMaximizer,
    NonConvergent,
    NonRareSubEvent,
    OutOfMgfDomain,
    OutsideDomain,
    TiltOutOfDomain,
    TimeCap,
    Unstable,
)
from .estimate import (
    StoppingRule,
    estimate_exceedance_is,
    estimate_exceedance_mc,
    estimate_ruin_is,
    estimate_ruin_mc,
    estimate_union,
    speedup_ratio,
)
from .model import branching_matrix, mean_drift, validate_net_profit, validate_stability
from .numerics import DEFAULT_NUMERICS
from .optimize import dominant_point, solve_theta_star
from .transforms import cumulant_gradient, domain_boundary, limiting_cumulant
from .twist import build_twisted_model

USAGE_EXIT, MODEL_EXIT, NUMERICAL_EXIT, RUNCAP_EXIT = 1, 2, 3, 4

_NUMERICAL_ERRORS = (
    NonConvergent,
    OutsideDomain,
    OutOfMgfDomain,
    NearSingular,
    NoConvergence,
    MarkMgfDomainExceeded,
    HeavyTailOrNoRoot,
    NetProfitViolated,
    NoInteriorMaximizer,
    InfeasibleRareEvent,
    NonRareSubEvent,
    TiltOutOfDomain,
    TimeCap,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_EXIT)


def _fmt(x) -> str:
    return f"{x:.17g}"


def _vector(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a comma-separated vector: {text!r}") from exc


def _load_config(args):
    path = Path(args.config) if args.config else bundled_config_path("bivariate_rand")
    try:
        return load_spec(path), str(path)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"config parse failure: {exc}", file=sys.stderr)
        raise SystemExit(USAGE_EXIT)


def _numerics(args):
    overrides = {}
    for item in args.tol or []:
        key, _, value = item.partition("=")
        if not value:
            print(f"bad --tol entry {item!r}, expected name=value", file=sys.stderr)
            raise SystemExit(USAGE_EXIT)
        field_type = type(getattr(DEFAULT_NUMERICS, key, 0.0))
        overrides[key] = field_type(float(value))
    try:
        return DEFAULT_NUMERICS.override(**overrides)
    except TypeError as exc:
        print(f"unknown numerics override: {exc}", file=sys.stderr)
        raise SystemExit(USAGE_EXIT)


def _rule(args) -> StoppingRule:
    return StoppingRule(
        epsilon=args.epsilon,
        max_runs=args.max_runs,
    )


def _write_csv(path: Path, header, rows, manifest: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    sidecar = path.with_suffix(path.suffix + ".manifest.json")
    sidecar.write_text(json.dumps(manifest, indent=2, default=str) + "\n")


def _manifest(args, config_path, started) -> dict:
    return {
        "command": sys.argv[1:],
        "config": config_path,
        "numerics": dataclasses.asdict(_numerics(args)),
        "seed": getattr(args, "seed", None),
        "epsilon": getattr(args, "epsilon", None),
        "wall_clock_s": time.time() - started,
        "version": __version__,
    }


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_validate(args) -> int:
    spec, _ = _load_config(args)
    report = {}
    try:
        report["spectral_radius"] = validate_stability(spec, _numerics(args))
    except Unstable as exc:
        print(json.dumps({"valid": False, "reason": "unstable", "rho": exc.rho}))
        return MODEL_EXIT
    report["branching_matrix"] = branching_matrix(spec).tolist()
    report["mean_drift"] = mean_drift(spec).tolist()
    report["net_profit"] = [
        validate_net_profit(spec, i) for i in range(spec.dims.dstar)
    ]
    report["valid"] = True
    print(json.dumps(report, indent=2))
    return 0


def cmd_cumulant(args) -> int:
    spec, _ = _load_config(args)
    numerics = _numerics(args)
    ev = limiting_cumulant(spec, args.theta, numerics)
    record = {
        "theta": list(args.theta),
        "value": ev.value if ev.in_domain else None,
        "in_domain": ev.in_domain,
        "gradient": None,
    }
    if ev.in_domain and args.grad:
        record["gradient"] = cumulant_gradient(spec, args.theta, numerics).tolist()
    print(json.dumps(record))
    return 0


def cmd_boundary(args) -> int:
    spec, _ = _load_config(args)
    bd = domain_boundary(spec, args.direction, _numerics(args))
    print(
        json.dumps(
            {
                "r": bd.r.tolist(),
                "z_hat": bd.z_hat.tolist(),
                "x_hat": bd.x_hat.tolist(),
                "residual_fixed_point": bd.residual_fixed_point,
                "residual_kernel": bd.residual_kernel,
            }
        )
    )
    return 0


def cmd_theta_star(args) -> int:
    spec, _ = _load_config(args)
    value = solve_theta_star(spec, args.component, _numerics(args))
    print(json.dumps({"component": args.component, "theta_star": value}))
    return 0


def cmd_twist(args) -> int:
    spec, _ = _load_config(args)
    sol = dominant_point(spec, args.target, numerics=_numerics(args))
    print(
        json.dumps(
            {
                "theta": sol.theta.tolist(),
                "rate": sol.rate,
                "active_set": list(sol.active_set),
                "a_star": sol.target.tolist(),
            }
        )
    )
    return 0


def cmd_twist_model(args) -> int:
    spec, _ = _load_config(args)
    q = build_twisted_model(spec, args.theta, _numerics(args))
    out = Path(args.out) if args.out else Path("twisted_model.json")
    dump_spec(q.base, out)
    print(json.dumps({"written": str(out), "f_at_twist": q.f_at_twist.tolist()}))
    return 0


_ESTIMATE_HEADER = [
    "method",
    "level_or_horizon",
    "estimate",
    "variance",
    "rel_std_err",
    "runs",
    "wall_time",
    "lundberg_bound",
    "theta_star",
    "theta_twist",
]


def _estimate_row(method, level, result, lundberg="", theta_star="", theta_twist=""):
    return [
        method,
        _fmt(level),
        _fmt(result.estimate),
        _fmt(result.variance),
        _fmt(result.rel_std_err),
        result.runs,
        _fmt(result.wall_time),
        lundberg,
        theta_star,
        theta_twist,
    ]


def cmd_ruin(args) -> int:
    spec, config_path = _load_config(args)
    started = time.time()
    numerics = _numerics(args)
    rule = _rule(args)
    rows = []
    if args.mc:
        result = estimate_ruin_mc(
            spec, args.component, args.level, rule, args.horizon_cap, args.seed, args.threads
        )
        rows.append(_estimate_row("mc", args.level, result))
    else:
        result = estimate_ruin_is(
            spec, args.component, args.level, rule, args.seed, args.threads, numerics=numerics
        )
        rows.append(
            _estimate_row(
                "is",
                args.level,
                result,
                lundberg=_fmt(result.meta["lundberg_bound"]),
                theta_star=_fmt(result.meta["theta_star"]),
            )
        )
    out = Path(args.out) / "ruin.csv" if args.out else Path("ruin.csv")
    _write_csv(out, _ESTIMATE_HEADER, rows, _manifest(args, config_path, started))
    print(json.dumps({"estimate": result.estimate, "runs": result.runs, "csv": str(out)}))
    return 0


def cmd_exceed(args) -> int:
    spec, config_path = _load_config(args)
    started = time.time()
    rule = _rule(args)
    if args.mc:
        result = estimate_exceedance_mc(
            spec, args.target, args.horizon, rule, args.seed, args.threads
        )
        row = _estimate_row("mc", args.horizon, result)
    else:
        result = estimate_exceedance_is(
            spec, args.target, args.horizon, rule, args.seed, args.threads,
            numerics=_numerics(args),
        )
        row = _estimate_row(
            "is",
            args.horizon,
            result,
            theta_twist=" ".join(_fmt(v) for v in result.meta["theta_twist"]),
        )
    out = Path(args.out) / "exceed.csv" if args.out else Path("exceed.csv")
    _write_csv(out, _ESTIMATE_HEADER, [row], _manifest(args, config_path, started))
    print(json.dumps({"estimate": result.estimate, "runs": result.runs, "csv": str(out)}))
    return 0


def cmd_union(args) -> int:
    spec, config_path = _load_config(args)
    started = time.time()
    result = estimate_union(
        spec, args.target, args.horizon, _rule(args), args.seed, args.threads,
        numerics=_numerics(args),
    )
    out = Path(args.out) / "union.csv" if args.out else Path("union.csv")
    _write_csv(
        out,
        _ESTIMATE_HEADER,
        [_estimate_row("union-is", args.horizon, result)],
        _manifest(args, config_path, started),
    )
    print(json.dumps({"estimate": result.estimate, "runs": result.runs, "csv": str(out)}))
    return 0


def cmd_compare(args) -> int:
    spec, config_path = _load_config(args)
    started = time.time()
    rule = _rule(args)
    numerics = _numerics(args)
    rows = []
    if args.mode == "ruin":
        mc = estimate_ruin_mc(
            spec, args.component, args.level, rule, args.horizon_cap, args.seed, args.threads
        )
        is_ = estimate_ruin_is(
            spec, args.component, args.level, rule, args.seed + 1, args.threads,
            numerics=numerics,
        )
        level = args.level
        rows.append(_estimate_row("mc", level, mc))
        rows.append(
            _estimate_row(
                "is", level, is_,
                lundberg=_fmt(is_.meta["lundberg_bound"]),
                theta_star=_fmt(is_.meta["theta_star"]),
            )
        )
    else:
        mc = estimate_exceedance_mc(spec, args.target, args.horizon, rule, args.seed, args.threads)
        is_ = estimate_exceedance_is(
            spec, args.target, args.horizon, rule, args.seed + 1, args.threads,
            numerics=numerics,
        )
        level = args.horizon
        rows.append(_estimate_row("mc", level, mc))
        rows.append(
            _estimate_row(
                "is", level, is_,
                theta_twist=" ".join(_fmt(v) for v in is_.meta["theta_twist"]),
            )
        )
    kappa = speedup_ratio(mc, is_)
    rows.append(["kappa", _fmt(level), _fmt(kappa), "", "", "", "", "", "", ""])
    out = Path(args.out) / "compare.csv" if args.out else Path("compare.csv")
    _write_csv(out, _ESTIMATE_HEADER, rows, _manifest(args, config_path, started))
    print(json.dumps({"kappa": kappa, "mc": mc.estimate, "is": is_.estimate, "csv": str(out)}))
    return 0


# ---------------------------------------------------------------------------
# Reproduction of the experiment tables and figures
# ---------------------------------------------------------------------------

_TABLE1_LEVELS = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0]
_TABLE2_LEVELS = [1.0, 2.0, 3.0, 5.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 100.0, 200.0, 300.0]
_TABLE3_HORIZONS = [1.0, 2.0, 3.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 40.0, 50.0, 75.0, 100.0]
_MC_RUIN_FEASIBLE = 60.0
_MC_EXCEED_FEASIBLE = 10.0


def _levels(args, default):
    return list(default) if args.levels is None else [float(v) for v in args.levels]


def _seed_for(seed: int, tag: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(tag,)).generate_state(1, np.uint64)[0])


def cmd_reproduce(args) -> int:
    target = args.target
    started = time.time()
    rule = _rule(args)
    numerics = _numerics(args)
    out_dir = Path(args.out) if args.out else Path(".")
    det_path = bundled_config_path("bivariate_det")
    rand_path = bundled_config_path("bivariate_rand")
    spec_det = load_spec(det_path)
    spec_rand = load_spec(args.config) if args.config else load_spec(rand_path)
    config_path = args.config or str(rand_path)

    if target == "table1":
        ts_det = solve_theta_star(spec_det, 0, numerics)
        ts_rand = solve_theta_star(spec_rand, 0, numerics)
        rows = []
        for tag, u in enumerate(_levels(args, _TABLE1_LEVELS)):
            row = [_fmt(u)]
            for label, spec, ts in (("det", spec_det, ts_det), ("rand", spec_rand, ts_rand)):
                try:
                    r = estimate_ruin_is(
                        spec, 0, u, rule, _seed_for(args.seed, tag), args.threads,
                        theta_star=ts, numerics=numerics,
                    )
                    row += [_fmt(math.exp(-ts * u)), _fmt(r.estimate), r.runs]
                except HawkesError as exc:
                    row += ["n/a", f"error: {type(exc).__name__}", "n/a"]
            rows.append(row)
        header = ["u", "lundberg_det", "p_det", "n_det", "lundberg_rand", "p_rand", "n_rand"]
        _write_csv(out_dir / "table1.csv", header, rows, _manifest(args, config_path, started))
        print(json.dumps({"csv": str(out_dir / "table1.csv")}))
        return 0

    if target == "table2":
        ts = solve_theta_star(spec_rand, 0, numerics)
        rows = []
        for tag, u in enumerate(_levels(args, _TABLE2_LEVELS)):
            r_is = estimate_ruin_is(
                spec_rand, 0, u, rule, _seed_for(args.seed, 2 * tag), args.threads,
                theta_star=ts, numerics=numerics,
            )
            if u <= _MC_RUIN_FEASIBLE:
                r_mc = estimate_ruin_mc(
                    spec_rand, 0, u, rule, args.horizon_cap,
                    _seed_for(args.seed, 2 * tag + 1), args.threads,
                )
                mc_cols = [_fmt(r_mc.estimate), r_mc.runs]
                kappa = _fmt(speedup_ratio(r_mc, r_is))
            else:
                mc_cols, kappa = ["n/a", "n/a"], "n/a"
            rows.append(
                [_fmt(u)] + mc_cols
                + [_fmt(r_is.estimate), _fmt(r_is.variance), r_is.runs, kappa]
            )
        header = ["u", "p_mc", "n_mc", "p_is", "v_is", "n_is", "kappa"]
        _write_csv(out_dir / "table2.csv", header, rows, _manifest(args, config_path, started))
        print(json.dumps({"csv": str(out_dir / "table2.csv")}))
        return 0

    if target == "table3":
        a = np.array([10.0, 12.0])
        rows = []
        for tag, t in enumerate(_levels(args, _TABLE3_HORIZONS)):
            r_is = estimate_exceedance_is(
                spec_rand, a, t, rule, _seed_for(args.seed, 2 * tag), args.threads,
                numerics=numerics,
            )
            if t <= _MC_EXCEED_FEASIBLE:
                r_mc = estimate_exceedance_mc(
                    spec_rand, a, t, rule, _seed_for(args.seed, 2 * tag + 1), args.threads
                )
                mc_cols = [_fmt(r_mc.estimate), r_mc.runs]
                kappa = _fmt(speedup_ratio(r_mc, r_is))
            else:
                mc_cols, kappa = ["n/a", "n/a"], "n/a"
            rows.append(
                [_fmt(t)] + mc_cols
                + [_fmt(r_is.estimate), _fmt(r_is.variance), r_is.runs, kappa]
            )
        header = ["t", "q_mc", "n_mc", "q_is", "v_is", "n_is", "kappa"]
        _write_csv(out_dir / "table3.csv", header, rows, _manifest(args, config_path, started))
        print(json.dumps({"csv": str(out_dir / "table3.csv")}))
        return 0

    if target in ("fig1", "fig2"):
        spec = spec_det if target == "fig1" else spec_rand
        ts = solve_theta_star(spec, 0, numerics)
        rows = []
        for tag, u in enumerate(_levels(args, _TABLE1_LEVELS)):
            r = estimate_ruin_is(
                spec, 0, u, rule, _seed_for(args.seed, tag), args.threads,
                theta_star=ts, numerics=numerics,
            )
            rows.append([_fmt(u), _fmt(math.log(r.estimate) / u), _fmt(ts)])
        header = ["u", "log_estimate_over_u", "theta_star"]
        _write_csv(out_dir / f"{target}.csv", header, rows, _manifest(args, config_path, started))
        print(json.dumps({"csv": str(out_dir / f"{target}.csv")}))
        return 0

    if target == "fig3":
        a = np.array([10.0, 12.0])
        twist = dominant_point(spec_rand, a, numerics=numerics)
        rows = []
        for tag, t in enumerate(_levels(args, _TABLE3_HORIZONS)):
            r = estimate_exceedance_is(
                spec_rand, a, t, rule, _seed_for(args.seed, tag), args.threads,
                numerics=numerics,
            )
            rows.append([_fmt(t), _fmt(math.log(r.estimate) / t), _fmt(twist.rate)])
        header = ["t", "log_estimate_over_t", "rate"]
        _write_csv(out_dir / "fig3.csv", header, rows, _manifest(args, config_path, started))
        print(json.dumps({"csv": str(out_dir / "fig3.csv")}))
        return 0

    print(f"unknown reproduction target {target!r}", file=sys.stderr)
    return USAGE_EXIT


# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="hawkesim", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="cmd", required=True)

    def common(p, seed_required=False):
        p.add_argument("--config", help="model config path (JSON/TOML); default bundled")
        p.add_argument("--tol", action="append", metavar="NAME=VALUE",
                       help="numerics override, repeatable")
        p.add_argument("--seed", type=int, required=seed_required,
                       help="master seed (mandatory for estimators)")
        p.add_argument("--epsilon", type=float, default=0.05,
                       help="target relative standard error")
        p.add_argument("--threads", type=int, default=1, help="worker processes")
        p.add_argument("--out", help="output directory")
        p.add_argument("--max-runs", type=int, default=None, help="run cap")
        p.add_argument("--horizon-cap", type=float, default=100.0,
                       help="censoring horizon for MC ruin runs")

    p = sub.add_parser("validate", help="check stability and net profit")
    common(p)
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("cumulant", help="evaluate the limiting cumulant")
    common(p)
    p.add_argument("--theta", type=_vector, required=True)
    p.add_argument("--grad", action="store_true")
    p.set_defaults(fn=cmd_cumulant)

    p = sub.add_parser("boundary", help="PGF domain boundary along a direction")
    common(p)
    p.add_argument("--direction", type=_vector, required=True)
    p.set_defaults(fn=cmd_boundary)

    p = sub.add_parser("theta-star", help="Cramer root of the risk cumulant")
    common(p)
    p.add_argument("--component", type=int, required=True, help="0-based index")
    p.set_defaults(fn=cmd_theta_star)

    p = sub.add_parser("twist", help="dominant point twist for a target")
    common(p)
    p.add_argument("--target", type=_vector, required=True)
    p.set_defaults(fn=cmd_twist)

    p = sub.add_parser("twist-model", help="emit the twisted model as a config")
    common(p)
    p.add_argument("--theta", type=_vector, required=True)
    p.set_defaults(fn=cmd_twist_model)

    p = sub.add_parser("ruin", help="ruin probability estimator")
    common(p, seed_required=True)
    p.add_argument("--component", type=int, default=0)
    p.add_argument("--level", type=float, required=True)
    p.add_argument("--mc", action="store_true", help="plain Monte Carlo instead of IS")
    p.set_defaults(fn=cmd_ruin)

    p = sub.add_parser("exceed", help="exceedance probability estimator")
    common(p, seed_required=True)
    p.add_argument("--target", type=_vector, required=True)
    p.add_argument("--horizon", type=float, required=True)
    p.add_argument("--mc", action="store_true")
    p.set_defaults(fn=cmd_exceed)

    p = sub.add_parser("union", help="union exceedance by inclusion-exclusion")
    common(p, seed_required=True)
    p.add_argument("--target", type=_vector, required=True)
    p.add_argument("--horizon", type=float, required=True)
    p.set_defaults(fn=cmd_union)

    p = sub.add_parser("compare", help="MC vs IS with speedup ratio")
    common(p, seed_required=True)
    p.add_argument("--mode", choices=["ruin", "exceed"], required=True)
    p.add_argument("--component", type=int, default=0)
    p.add_argument("--level", type=float)
    p.add_argument("--target", type=_vector)
    p.add_argument("--horizon", type=float)
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("reproduce", help="reproduce experiment tables/figures")
    common(p, seed_required=True)
    p.add_argument("target", choices=["table1", "table2", "table3", "fig1", "fig2", "fig3"])
    p.add_argument("--levels", type=_vector, default=None,
                   help="override the level/horizon grid")
    p.set_defaults(fn=cmd_reproduce)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except SystemExit as exc:  # argparse --help/--version, usage and parse errors
        return 0 if exc.code is None else int(exc.code)
    except MaxRunsExceeded as exc:
        print(f"run cap exceeded: {exc}", file=sys.stderr)
        return RUNCAP_EXIT
    except (Unstable, ModelInvalid) as exc:
        print(json.dumps({"valid": False, "reason": str(exc)}), file=sys.stderr)
        return MODEL_EXIT
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return NUMERICAL_EXIT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT


if __name__ == "__main__":
    sys.exit(main())
