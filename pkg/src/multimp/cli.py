"""Command-line front end.

Exit codes: 0 completed (SATISFIED or a plain report), 1 completed with a
VIOLATED finding, 2 usage or configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, euler, mp_check, needle, problems, rank_one, report
from .errors import ConfigError, NumericalError

EXIT_OK, EXIT_VIOLATED, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3
COMMANDS = ("list-problems", "check-lh", "check-mp", "euler-residual", "needle-sweep", "excess-landscape")


def _floats(text):
    try:
        vals = [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals or not all(math.isfinite(v) for v in vals):
        raise argparse.ArgumentTypeError(f"expected finite numbers, got {text!r}")
    return vals


def _param(text):
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"--param expects key=value, got {text!r}")
    return key.strip(), value.strip()


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _positive_float(text):
    v = float(text)
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def build_parser():
    parser = argparse.ArgumentParser(prog="multimp", description="Checks of the rank-one maximum principle for multiple integrals.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def common(p, problem=True):
        p.add_argument("--out", help="write the JSON report here (default stdout)")
        p.add_argument("--seed", type=int, default=0)
        if problem:
            src = p.add_mutually_exclusive_group(required=True)
            src.add_argument("--problem", choices=problems.catalog_names())
            src.add_argument("--problem-file", help="JSON problem definition")
            p.add_argument("--param", type=_param, action="append", default=[], metavar="KEY=VALUE")
            p.add_argument("--f-expr", help="replace the integrand by this expression")
        return p

    common(sub.add_parser("list-problems", help="list catalog problems"), problem=False)

    p = common(sub.add_parser("check-lh", help="Legendre-Hadamard screen of the quadratic part in z"))
    p.add_argument("--point", type=_floats, help="evaluation point t (default: domain centre)")
    p.add_argument("--starts", type=_positive_int, default=8)
    p.add_argument("--resolution", type=_positive_int, default=360, help="grid-oracle angles per sphere")

    p = common(sub.add_parser("check-mp", help="search for rank-one directions with negative excess"))
    p.add_argument("--point", type=_floats, action="append", help="check at t (repeatable; default 5^n interior grid)")
    p.add_argument("--r-max", type=_positive_float, default=mp_check.DEFAULT_R_MAX)
    p.add_argument("--r-steps", type=_positive_int, default=16)
    p.add_argument("--starts", type=_positive_int, default=8)
    p.add_argument("--tol", type=_positive_float, default=mp_check.DEFAULT_TOL)

    p = common(sub.add_parser("euler-residual", help="Euler-Lagrange residual of the candidate"))
    p.add_argument("--resolution", type=_positive_int, default=64)
    p.add_argument("--tol", type=_positive_float, default=1e-6)
    p.add_argument("--include-boundary", action="store_true")
    p.add_argument("--csv", help="write the residual field as CSV")

    p = common(sub.add_parser("needle-sweep", help="increment of the functional under shrinking needles"))
    p.add_argument("--tau", type=_floats, help="needle centre (default: domain centre)")
    p.add_argument("--xi", type=_floats, help="unit vector in R^nu (default e1)")
    p.add_argument("--eta", type=_floats, help="unit vector in R^2 (default e1); write --eta=-1,0 for negative entries")
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--sigmas", type=_floats, default=[1e-2, 3e-3, 1e-3, 3e-4])
    p.add_argument("--degree", type=int, default=5, choices=(1, 2, 5))
    p.add_argument("--level", type=int, default=0)
    p.add_argument("--csv", help="write (sigma, delta_F, fit_residual) rows as CSV")

    p = common(sub.add_parser("excess-landscape", help="tabulate the excess over (r, xi angle, eta angle)"))
    p.add_argument("--point", type=_floats, help="evaluation point t (default: domain centre)")
    p.add_argument("--r-values", type=_floats, default=[0.5, 1.0, 2.0, 4.0])
    p.add_argument("--resolution", type=_positive_int, default=36)
    p.add_argument("--csv", help="write the rows as CSV")
    return parser


def _load(args):
    params = dict(args.param)
    if args.problem is not None:
        inst = problems.catalog_get(args.problem, params)
    else:
        if params:
            raise ConfigError("--param applies to catalog problems; put parameters in the definition file")
        inst = problems.load_problem(Path(args.problem_file))
    if args.f_expr:
        constants = {k: v for k, v in inst.params.items() if k != "resolution"}
        L = problems.Lagrangian.from_expr(args.f_expr, inst.n, inst.nu, constants, name=f"{inst.name}+f_expr")
        inst = problems.ProblemInstance(inst.name, L, inst.candidate, inst.params)
    return inst


def _point(inst, value):
    t = inst.domain.center_point() if value is None else np.array(value, dtype=float)
    if t.shape != (inst.n,):
        raise ConfigError(f"point must have {inst.n} coordinates")
    if not inst.domain.contains(t):
        raise ConfigError(f"point {t.tolist()} lies outside the domain")
    return t


def _unit(value, d, what):
    v = np.eye(d)[0] if value is None else np.array(value, dtype=float)
    if v.shape != (d,):
        raise ConfigError(f"{what} must have {d} components")
    if abs(np.linalg.norm(v) - 1.0) > 1e-12:
        raise ConfigError(f"{what} must be a unit vector")
    return v


def _write_csv(path, text):
    Path(path).write_text(text, newline="")
    return str(path)


def _run_check_lh(args, inst):
    t = _point(inst, args.point)
    L, cand = inst.lagrangian, inst.candidate
    x, z = cand.value(t), cand.slope(t)
    hessian = rank_one.from_hessian(L, t, x, z)
    form = hessian.scaled(0.5)
    lh = rank_one.lh_minimize(form, starts=args.starts, seed=args.seed)
    grid_min, (gxi, geta) = rank_one.grid_oracle(form, args.resolution, return_argmin=True)
    cls = rank_one.classify(lh.min_value)
    result = {
        "point": t, "slope": z,
        "min_value": lh.min_value,
        "argmin": {"xi": lh.xi, "eta": lh.eta},
        "iterations": lh.iterations, "starts": lh.starts_used,
        "classification": cls,
        "van_hove_margin": lh.min_value,
        "grid_oracle": {"resolution": args.resolution, "min_value": grid_min,
                        "argmin": {"xi": gxi, "eta": geta}, "gap": lh.min_value - grid_min},
        "eigenvalues": form.eigenvalues(),
        "negative_eigenvalues": int(np.sum(form.eigenvalues() < -rank_one.NONNEGATIVE_TOL)),
        "hessian_eigenvalues": hessian.eigenvalues(),
        "form": "quadratic part (1/2) f_zz; hessian_eigenvalues are those of f_zz itself",
    }
    mismatches = []
    if inst.claims.get("lh_strictly_positive") and cls != "strictly_positive":
        mismatches.append(f"lh_strictly_positive: documented as strictly positive, computed minimum "
                          f"{report._float(lh.min_value)} classifies as {cls}")
    if inst.claims.get("full_form_indefinite") and result["negative_eigenvalues"] == 0:
        mismatches.append("full_form_indefinite: documented as indefinite, computed eigenvalues are all nonnegative")
    status = mp_check.VIOLATED if cls == "indefinite" else mp_check.SATISFIED
    options = {"point": t, "starts": args.starts, "resolution": args.resolution,
               "nonnegative_tol": rank_one.NONNEGATIVE_TOL, "strict_tol": rank_one.STRICT_TOL}
    return status, options, result, mismatches, None


def _run_check_mp(args, inst):
    pts = None if args.point is None else [_point(inst, p) for p in args.point]
    rep = mp_check.check_rank_one_mp(inst, pts, r_max=args.r_max, r_steps=args.r_steps,
                                     starts=args.starts, tol=args.tol, seed=args.seed)
    mismatches = []
    claim = inst.claims.get("mp_satisfied")
    if claim is not None and (rep.verdict == mp_check.SATISFIED) != claim and rep.verdict != mp_check.INCONCLUSIVE:
        mismatches.append(f"mp_satisfied: documented {claim}, computed verdict {rep.verdict}")
    options = dict(rep.options)
    options["points"] = "default interior grid" if pts is None else [p.tolist() for p in pts]
    return rep.verdict, options, rep.to_dict(), mismatches, None


def _run_euler(args, inst):
    res = euler.euler_residual(inst, args.resolution, args.include_boundary)
    passed = res.max_abs <= args.tol
    result = dict(res.to_dict(), tol=args.tol, passed=passed)
    csv_path = _write_csv(args.csv, res.residual_field.to_csv("residual")) if args.csv else None
    options = {"resolution": args.resolution, "tol": args.tol, "include_boundary": args.include_boundary}
    return (mp_check.SATISFIED if passed else mp_check.VIOLATED), options, result, [], csv_path


def _run_needle(args, inst):
    if inst.n != 2:
        raise ConfigError("needle sweeps need n = 2")
    tau = _point(inst, args.tau)
    xi = _unit(args.xi, inst.nu, "xi")
    eta = _unit(args.eta, 2, "eta")
    quad = needle.TriangleQuadrature(args.degree, args.level)
    sweep = needle.asymptotic_sweep(inst, tau, xi, eta, args.amplitude, args.sigmas, quad)
    result = sweep.to_dict()
    result["rows"] = [{"sigma": s, "delta_F": v, "fit_residual": r} for s, v, r in sweep.rows]
    result["minor_slope_norms"] = sweep.minor_slopes
    geom = needle.build_needle(tau, xi, eta, args.sigmas[-1], args.amplitude).geometry
    result["geometry_at_smallest_sigma"] = geom.to_dict()
    csv_path = _write_csv(args.csv, sweep.to_csv()) if args.csv else None
    options = {"tau": tau, "xi": xi, "eta": eta, "amplitude": args.amplitude, "sigmas": args.sigmas,
               "degree": args.degree, "level": args.level}
    return sweep.status, options, result, [], csv_path


def _run_landscape(args, inst):
    t = _point(inst, args.point)
    land = mp_check.excess_landscape(inst, t, args.r_values, args.resolution)
    csv_path = _write_csv(args.csv, report.csv_text(land.HEADER, land.rows)) if args.csv else None
    options = {"point": t, "r_values": args.r_values, "resolution": args.resolution}
    return "OK", options, land.to_dict(), [], csv_path


_RUNNERS = {"check-lh": _run_check_lh, "check-mp": _run_check_mp, "euler-residual": _run_euler,
            "needle-sweep": _run_needle, "excess-landscape": _run_landscape}


def _execute(args):
    if args.command == "list-problems":
        result = {"problems": [{"name": k, "description": problems.catalog_description(k)}
                               for k in problems.catalog_names()]}
        return {"schema_version": report.SCHEMA_VERSION, "command": args.command, "status": "OK",
                "problem": None, "options": {}, "seed": args.seed, "result": result}
    inst = _load(args)
    status, options, result, mismatches, csv_path = _RUNNERS[args.command](args, inst)
    problem = inst.describe()
    if args.f_expr:
        problem["f_expr"] = args.f_expr
    doc = {"schema_version": report.SCHEMA_VERSION, "command": args.command, "status": status,
           "problem": problem, "options": options, "seed": args.seed}
    if inst.claims:
        doc["claims"] = dict(sorted(inst.claims.items()))
        doc["claim_mismatches"] = mismatches
    doc["csv"] = csv_path
    doc["result"] = result
    return doc


def run(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        doc = _execute(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"multimp: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"multimp: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    text = report.dumps(doc)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_VIOLATED if doc["status"] == mp_check.VIOLATED else EXIT_OK


def main():
    sys.exit(run())
