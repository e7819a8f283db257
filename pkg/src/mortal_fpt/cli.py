"""Command-line front end.

    mortal-fpt analytic   --lambda-bar 1 --kappa-bar 1 --m 1
    mortal-fpt simulate   --config onedim.cfg --lambda-bar 25 --n 1000000 --seed 7 --out r/
    mortal-fpt quadrature --config onedim.cfg --lambda-bar 10 100 --out q/
    mortal-fpt geodesic   --config slab2d.cfg --grid 512
    mortal-fpt sweep      --config sweep.cfg --out s/
    mortal-fpt report     --results s/results.csv --out plots/

Exit codes: 0 success, 2 usage or flag error, 3 invalid config or problem,
4 engine failure. Output directories default to $FPT_OUT_DIR.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import yaml

from . import __version__, analytic, experiments as ex, geodesic
from .errors import (
    ConfigError,
    FptError,
    NonpositiveDiffusivity,
    NonpositiveLength,
    ProblemValidationError,
    UnsupportedOrder,
    UnsupportedShape,
)
from .model import (
    InactivationLaw,
    InitialDistribution,
    ProblemSpec,
    disc_drift_problem,
    half_line_problem,
    problem_from_dict,
    slab_wall_problem,
    uniform_interval_problem,
    validate_problem,
)

ENV_OUT = "FPT_OUT_DIR"

RESULTS_FORMAT = "results-csv/1"
MANIFEST_FORMAT = "manifest/1"

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_ENGINE = 0, 2, 3, 4


class UsageError(Exception):
    """Bad flag value; the message names the flag."""


class EngineFailure(Exception):
    pass


# --------------------------------------------------------------------------
# config files
# --------------------------------------------------------------------------

_PLAN_KEYS = {
    "experiment_id", "problem", "compare", "study", "lambda_bar", "beta", "kappa_bar", "m",
    "methods", "n", "seed", "length", "geodesic_length", "dt_fraction", "workers", "grid", "n_eff_floor",
}


def _num(v) -> float:
    if isinstance(v, str) and v.strip().lower() in ("inf", "infinity", "perfect"):
        return math.inf
    return float(v)


def _list(v) -> list:
    return list(v) if isinstance(v, (list, tuple)) else [v]


def build_problem(d) -> ProblemSpec:
    """A problem from a preset mapping ({preset: name, ...}) or a full problem mapping."""
    if not isinstance(d, dict):
        raise ConfigError("problem: expected a mapping")
    if "preset" not in d:
        return problem_from_dict(d)
    kw = {k: v for k, v in d.items() if k != "preset"}
    name = d["preset"]
    try:
        if name == "half-line":
            return half_line_problem(
                L=float(kw.pop("L", 1.0)), D=float(kw.pop("D", 1.0)),
                kappa=_num(kw.pop("kappa", "inf")), far=float(kw.pop("far", 50.0)), **kw,
            )
        if name == "uniform-interval":
            return uniform_interval_problem(D=float(kw.pop("D", 1.0)), kappa=_num(kw.pop("kappa", "inf")), **kw)
        if name == "slab":
            return slab_wall_problem(with_wall=bool(kw.pop("with_wall", True)), D=float(kw.pop("D", 1.0)), **kw)
        if name == "disc":
            return disc_drift_problem(drift_strength=float(kw.pop("drift", 0.0)), D=float(kw.pop("D", 1.0)), **kw)
        if name == "quasi-stationary":
            base = half_line_problem(D=float(kw.pop("D", 1.0)))
            rate = float(kw.pop("rate", 1.0))
            if kw:
                raise TypeError(f"unexpected keys {sorted(kw)}")
            return replace(base, initial=InitialDistribution("quasi-stationary", rate=rate))
    except (TypeError, ValueError) as e:
        raise ConfigError(f"problem preset {name!r}: {e}") from e
    raise ConfigError(f"unknown problem preset {name!r}")


def load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
    except OSError as e:
        raise UsageError(f"--config: cannot read {path}: {e}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: not valid YAML: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    extra = set(data) - _PLAN_KEYS
    if extra:
        raise ConfigError(f"{path}: unknown keys {sorted(extra)}")
    if "problem" not in data:
        raise ConfigError(f"{path}: missing 'problem'")
    return data


def plan_from_config(cfg: dict, overrides: dict) -> ex.SweepPlan:
    merged = {**cfg, **{k: v for k, v in overrides.items() if v is not None}}
    problem = build_problem(merged["problem"])
    try:
        return ex.SweepPlan(
            problem=problem,
            lambda_bars=tuple(_num(v) for v in _list(merged.get("lambda_bar", [25.0]))),
            betas=tuple(_num(v) for v in _list(merged.get("beta", [1.0]))),
            kappa_bars=tuple(_num(v) for v in _list(merged.get("kappa_bar", ["inf"]))),
            orders=tuple(int(v) if float(v).is_integer() else float(v) for v in _list(merged.get("m", [1]))),
            methods=tuple(_list(merged.get("methods", list(ex.METHODS)))),
            n_trajectories=int(merged.get("n", 100_000)),
            seed=int(merged.get("seed", 0)),
            experiment_id=str(merged.get("experiment_id", "sweep")),
            length=None if merged.get("length") is None else float(merged["length"]),
            geodesic_length=None if merged.get("geodesic_length") is None else float(merged["geodesic_length"]),
            dt_fraction=float(merged.get("dt_fraction", 1.0)),
            workers=int(merged.get("workers", 1)),
            grid=None if merged.get("grid") is None else int(merged["grid"]),
            n_eff_floor=float(merged.get("n_eff_floor", 100.0)),
        )
    except (TypeError, ValueError) as e:
        raise ConfigError(f"sweep settings: {e}") from e


# --------------------------------------------------------------------------
# output handling
# --------------------------------------------------------------------------


def _out_dir(args, required: bool = True) -> Optional[Path]:
    out = args.out or os.environ.get(ENV_OUT)
    if not out:
        if required:
            raise UsageError(f"--out: no output directory given and ${ENV_OUT} is unset")
        return None
    return Path(out)


def _manifest(args, plan: Optional[ex.SweepPlan], started: float, **extra) -> dict:
    m = {
        "command": args.command,
        "argv": list(args.argv),
        "config_path": getattr(args, "config", None),
        "artifact_version": __version__,
        "formats": {"results_csv": RESULTS_FORMAT, "manifest": MANIFEST_FORMAT},
        "started": time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime(started)),
        "finished": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "wall_clock_s": round(time.time() - started, 3),
        **extra,
    }
    if plan is not None:
        m["resolved"] = plan.to_dict()
        m["seed"] = plan.seed
    return m


def _write(records, args, plan, started, **extra) -> Path:
    out = _out_dir(args)
    try:
        return ex.write_results(records, out, _manifest(args, plan, started, **extra), force=args.force)
    except FileExistsError as e:
        raise UsageError(f"--out: {e}") from e


def _print_records(records) -> None:
    for r in records:
        status = r.error or ""
        print(f"{r.experiment_id} {r.method} lambda={r.lambda_:.6g} beta={r.beta:g} m={r.m:g} "
              f"estimate={r.estimate:.8g} std_err={r.std_err:.3g} ratio={r.ratio:.6g} {status}".rstrip())


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_analytic(args) -> int:
    if args.m not in (1, 2) and not args.predict:
        raise UsageError(f"--m: {UnsupportedOrder.__name__}: closed form exists only for m in {{1, 2}}, got {args.m}")
    if args.predict:
        for flag in ("L", "D", "lambda_"):
            v = getattr(args, flag)
            if v is None or not v > 0:
                raise UsageError(f"--{flag.rstrip('_')}: a positive value is required with --predict")
        print(repr(analytic.asymptotic_moment_geodesic(args.L, args.D, args.lambda_, args.m)))
        return EXIT_OK
    if args.lambda_bar is None or not args.lambda_bar > 0:
        raise UsageError("--lambda-bar: a positive value is required")
    if not args.kappa_bar > 0:
        raise UsageError("--kappa-bar: must be positive (inf for a perfect target)")
    if args.beta != 1.0:
        raise UsageError(f"--beta: {UnsupportedShape.__name__}: closed form needs beta = 1")
    p = analytic.Dimensionless1DParams(args.lambda_bar, args.kappa_bar)
    if args.cv:
        print(repr(analytic.cv_1d_exact(p)))
    else:
        print(repr(analytic.conditional_moment_1d_exact(p, args.m)))
    return EXIT_OK


def _overrides(args) -> dict:
    return {
        "lambda_bar": args.lambda_bar,
        "beta": args.beta,
        "kappa_bar": args.kappa_bar,
        "m": args.m,
        "n": getattr(args, "n", None),
        "seed": getattr(args, "seed", None),
        "workers": getattr(args, "workers", None),
    }


def _load_plan(args, **forced) -> ex.SweepPlan:
    if not args.config:
        raise UsageError("--config: a config file is required")
    cfg = load_config(args.config)
    plan = plan_from_config(cfg, _overrides(args))
    if forced:
        plan = replace(plan, **forced)
    validate_problem(plan.problem)
    return plan


def cmd_simulate(args) -> int:
    started = time.time()
    plan = _load_plan(args, methods=("monte-carlo",))
    records = ex.run_convergence_study(plan)
    n = plan.n_trajectories
    for _ in range(args.retries):
        if not any(r.failed for r in records):
            break
        n *= 2
        redo = replace(plan, n_trajectories=n)
        fresh = ex.run_convergence_study(redo)
        records = [f if r.failed else r for r, f in zip(records, fresh)]
    _write(records, args, plan, started, final_n=n)
    _print_records(records)
    if all(r.failed for r in records):
        raise EngineFailure("every Monte Carlo point failed: " + "; ".join(sorted({r.error for r in records})))
    return EXIT_OK


def cmd_quadrature(args) -> int:
    started = time.time()
    plan = _load_plan(args, methods=("analytic", "quadrature"))
    records = ex.run_convergence_study(plan)
    quad_rows = [r for r in records if r.method == "quadrature"]
    _write(records, args, plan, started)
    _print_records(records)
    if quad_rows and all(r.failed for r in quad_rows):
        raise EngineFailure(quad_rows[0].error)
    return EXIT_OK


def cmd_geodesic(args) -> int:
    started = time.time()
    if not args.config:
        raise UsageError("--config: a config file is required")
    cfg = load_config(args.config)
    phys = build_problem(cfg["problem"])
    validate_problem(phys)
    grid = args.grid or cfg.get("grid")
    empty = phys.without_obstacles()
    r_phys = geodesic.problem_length(phys, grid)
    r_empty = geodesic.problem_length(empty, grid)
    print(f"L_phys {r_phys.length!r} ({r_phys.method})")
    print(f"L_empty {r_empty.length!r} ({r_empty.method})")
    out = _out_dir(args, required=False)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        if not args.force and ((out / "results.csv").exists() or (out / "manifest.json").exists()):
            raise UsageError(f"--out: {out} already holds results; pass --force to overwrite")
        lines = ["set,L,method,h"]
        for name, r in (("phys", r_phys), ("empty", r_empty)):
            lines.append(f"{name},{r.length!r},{r.method},{r.h!r}")
        ex.atomic_write(out / "results.csv", "\n".join(lines) + "\n")
        ex.atomic_write(out / "manifest.json",
                        json.dumps(_manifest(args, None, started, grid=grid), indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_sweep(args) -> int:
    started = time.time()
    if not args.config:
        raise UsageError("--config: a config file is required")
    cfg = load_config(args.config)
    plan = plan_from_config(cfg, _overrides(args))
    validate_problem(plan.problem)
    study = cfg.get("study", "convergence")
    extra = {"study": study}
    if study == "convergence":
        records = ex.run_convergence_study(plan)
    elif study == "initial":
        records = ex.run_initial_condition_study(plan)
    elif study == "obstacle":
        empty = build_problem(cfg["compare"]) if "compare" in cfg else plan.problem.without_obstacles()
        validate_problem(empty)
        rows = ex.run_obstacle_comparison(plan.problem, empty, plan)
        records = ex.obstacle_records(rows, plan.experiment_id)
        extra.update(L_phys=rows[0].L_phys, L_empty=rows[0].L_empty)
    else:
        raise ConfigError(f"unknown study {study!r}; use convergence, obstacle or initial")
    _write(records, args, plan, started, **extra)
    _print_records(records)
    if records and all(r.failed for r in records):
        raise EngineFailure("every sweep point failed")
    return EXIT_OK


GNUPLOT_TEMPLATE = """\
# estimate / prediction against the inactivation rate, one curve per method
set datafile separator ","
set key autotitle columnhead
set logscale x
set xlabel "lambda"
set ylabel "estimate / prediction"
set key top right
set grid
data = "{data}"
methods = "{methods}"
set terminal pngcairo size 900,600
set output "ratio.png"
plot for [meth in methods] data using (strcol(2) eq meth ? $3 : NaN):13 \\
     with linespoints pointtype 7 title meth, \\
     1 with lines dashtype 2 lc rgb "gray" notitle
set output "estimate.png"
set logscale y
set ylabel "conditional moment"
plot for [meth in methods] data using (strcol(2) eq meth ? $3 : NaN):7:8 \\
     with yerrorbars title meth, \\
     data using 3:12 with lines dashtype 2 title "prediction"
"""


def cmd_report(args) -> int:
    started = time.time()
    src = Path(args.results)
    if not src.is_file():
        raise UsageError(f"--results: no such file {src}")
    with open(src, newline="") as fh:
        header = next(csv.reader(fh), [])
    if tuple(header) != ex.CSV_COLUMNS:
        raise ConfigError(f"{src}: header does not match the results format")
    rows = ex.read_results(src)
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    targets = [out / "results.csv", out / "plot.gp", out / "manifest.json"]
    if not args.force and any(p.exists() for p in targets):
        raise UsageError(f"--out: {out} already holds a report; pass --force to overwrite")
    ex.atomic_write(out / "results.csv", src.read_text())
    methods = " ".join(dict.fromkeys(r["method"] for r in rows))
    ex.atomic_write(out / "plot.gp", GNUPLOT_TEMPLATE.format(data="results.csv", methods=methods))
    ex.atomic_write(out / "manifest.json",
                    json.dumps(_manifest(args, None, started, source=str(src), rows=len(rows)),
                               indent=2, sort_keys=True) + "\n")
    print(f"wrote {out / 'plot.gp'} for {len(rows)} rows")
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------


def _positive_int(flag):
    def conv(s):
        try:
            v = int(s)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{flag} expects an integer, got {s!r}")
        if v < 1:
            raise argparse.ArgumentTypeError(f"{flag} must be positive, got {v}")
        return v
    return conv


def _float_arg(s):
    try:
        return _num(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {s!r}")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mortal-fpt", description="Conditional first-passage times of mortal searchers.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("analytic", help="closed forms and large-rate predictors")
    a.add_argument("--lambda-bar", type=_float_arg)
    a.add_argument("--kappa-bar", type=_float_arg, default=math.inf)
    a.add_argument("--m", type=int, default=1)
    a.add_argument("--beta", type=_float_arg, default=1.0)
    a.add_argument("--cv", action="store_true", help="print the coefficient of variation instead")
    a.add_argument("--predict", action="store_true", help="print (L / (2 sqrt(D lambda)))^m")
    a.add_argument("--L", type=_float_arg)
    a.add_argument("--D", type=_float_arg)
    a.add_argument("--lambda", dest="lambda_", type=_float_arg)
    a.set_defaults(func=cmd_analytic)

    def sweep_flags(q, mc: bool):
        q.add_argument("--config", required=False)
        q.add_argument("--lambda-bar", type=_float_arg, nargs="+")
        q.add_argument("--beta", type=_float_arg, nargs="+")
        q.add_argument("--kappa-bar", type=_float_arg, nargs="+")
        q.add_argument("--m", type=_float_arg, nargs="+")
        q.add_argument("--out")
        q.add_argument("--force", action="store_true", help="overwrite existing results")
        if mc:
            q.add_argument("--n", type=_positive_int("--n"))
            q.add_argument("--seed", type=int)
            q.add_argument("--workers", type=_positive_int("--workers"))

    s = sub.add_parser("simulate", help="Monte Carlo conditional moments")
    sweep_flags(s, True)
    s.add_argument("--retries", type=int, default=1, help="reruns with doubled n for failed points")
    s.set_defaults(func=cmd_simulate)

    q = sub.add_parser("quadrature", help="conditional moments from a closed-form CDF")
    sweep_flags(q, False)
    q.set_defaults(func=cmd_quadrature)

    g = sub.add_parser("geodesic", help="geodesic lengths with and without obstacles")
    g.add_argument("--config")
    g.add_argument("--grid", type=_positive_int("--grid"))
    g.add_argument("--out")
    g.add_argument("--force", action="store_true")
    g.set_defaults(func=cmd_geodesic)

    w = sub.add_parser("sweep", help="run a study described by a config file")
    sweep_flags(w, True)
    w.set_defaults(func=cmd_sweep)

    r = sub.add_parser("report", help="emit a gnuplot script for a results file")
    r.add_argument("--results", required=True)
    r.add_argument("--out")
    r.add_argument("--force", action="store_true")
    r.set_defaults(func=cmd_report)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        args.argv = argv
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (UnsupportedOrder, UnsupportedShape, NonpositiveLength, NonpositiveDiffusivity) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, ProblemValidationError) as e:
        print(f"invalid: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INVALID
    except (EngineFailure, FptError) as e:
        print(f"engine failure: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_ENGINE


if __name__ == "__main__":
    sys.exit(main())
