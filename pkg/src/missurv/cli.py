"""Command-line frontend: fit, hazard, simulate.

Results (JSON or curve CSV) go to stdout; logs and the human-readable
simulation tables go to stderr.  Error exits print a JSON object with a
stable machine-readable ``code`` field (exit 1 for data errors, 2 for
solver errors).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import baseline, cox, hazard, simulation
from .curves import curve_to_csv
from .data import read_csv
from .errors import DimensionMismatch, InvalidCSV, MissurvError
from . import type2 as t2


def _format_json(obj) -> str:
    """JSON with floats at 17 significant digits (lossless round trip)."""
    if isinstance(obj, dict):
        inner = ",".join(f"{json.dumps(str(k))}:{_format_json(v)}" for k, v in obj.items())
        return "{" + inner + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_format_json(v) for v in obj) + "]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "null"
        if math.isinf(x):
            return '"inf"' if x > 0 else '"-inf"'
        return format(x, ".17g")
    if obj is None:
        return "null"
    return json.dumps(obj)


def _emit(obj):
    sys.stdout.write(_format_json(obj) + "\n")


def _fail(err: MissurvError) -> int:
    _emit({"error": {"code": err.code, "message": str(err)}})
    print(f"error [{err.code}]: {err}", file=sys.stderr)
    return err.exit_code


def _load_d_matrix(path: str, p: int) -> np.ndarray:
    try:
        d = np.loadtxt(path, ndmin=2)
    except (OSError, ValueError) as exc:
        raise InvalidCSV(f"cannot read D matrix from {path}: {exc}") from None
    if d.shape != (p, p):
        raise DimensionMismatch(f"D matrix is {d.shape[0]}x{d.shape[1]}, need {p}x{p}")
    return d


def _fit_payload(fit, extra_key, extra_value):
    warnings = []
    if fit.method.endswith("+pinv"):
        warnings.append("singular V2; pseudo-inverse weight used")
    return {
        "beta": list(fit.beta),
        "se": list(fit.se),
        "covariance": [list(row) for row in fit.covariance],
        "method": fit.method,
        extra_key: extra_value,
        "iterations": fit.iterations,
        "final_score_norm": fit.final_score_norm,
        "warnings": warnings,
    }


def cmd_fit(args) -> int:
    ds = read_csv(args.input, args.missing_type)
    method = args.method
    d_matrix = None
    if method.startswith("combined:"):
        d_matrix = _load_d_matrix(method.split(":", 1)[1], ds.p)
        method = "combined"
    if args.missing_type == "type1":
        if method == "adaptive":
            fit = cox.adaptive_fit(ds)
        elif method == "combined":
            fit = cox.solve(ds, cox.Combined(d_matrix))
        else:
            fit = cox.solve(ds, method)
        _emit(_fit_payload(fit, "rho_hat", fit.rho_hat))
    else:
        if method == "adaptive":
            fit = t2.fit_phi(ds, "adaptive")
        elif method == "combined":
            fit = t2.fit_phi(ds, d_matrix)
        else:
            fit = t2.solve_phi(ds, method)
        _emit(_fit_payload(fit, "tau_hat", fit.tau_hat))
    return 0


def cmd_hazard(args) -> int:
    ds = read_csv(args.input, "type1")
    est = args.estimator
    t = args.eval_time

    if est == "adaptive":
        if t is None:
            raise InvalidCSV("estimator 'adaptive' requires --eval-time")
        value, variance, alpha = hazard.adaptive_survival(ds, t)
        _emit({"estimate": value, "variance": variance, "alpha": alpha})
        return 0

    if est in ("breslow", "baseline1", "baseline2"):
        if est == "breslow":
            fit = cox.solve(ds, "full")
            curve = baseline.breslow(ds, fit.beta)
        else:
            fit = cox.adaptive_fit(ds)
            which = 1 if est == "baseline1" else 2
            curve = (baseline.baseline_lambda1 if which == 1
                     else baseline.baseline_lambda2)(ds, fit)
        if t is not None:
            payload = {"estimate": curve.value_at(t)}
            if est != "breslow":
                payload["variance"] = baseline.baseline_variance(ds, fit, which, t)
            _emit(payload)
        else:
            sys.stdout.write(curve_to_csv(curve))
        return 0

    builders = {
        "nelson-aalen": hazard.nelson_aalen,
        "kaplan-meier": hazard.kaplan_meier,
        "lambda1": hazard.lambda1,
        "lambda2": hazard.lambda2,
        "lo": hazard.lo_estimator,
    }
    if est.startswith("alpha:"):
        alpha = float(est.split(":", 1)[1])
        curve = hazard.lambda_alpha(ds, alpha)
    elif est in builders:
        curve = builders[est](ds)
    else:
        raise InvalidCSV(f"unknown estimator {est!r}")

    if t is not None:
        _emit({"estimate": curve.value_at(t), "variance": curve.variance_at(t)})
    else:
        sys.stdout.write(curve_to_csv(curve))
    return 0


def _block_label(design) -> str:
    return (f"model={design.model} rho_or_tau={design.rho_or_tau:g} "
            f"censoring={design.target_censoring:g} n={design.n}")


def _text_table(reports) -> str:
    lines = []
    for rep in reports:
        lines.append(_block_label(rep.design))
        header = f"  {'estimator':<14} {'mean':>9} {'var':>9}"
        onesample = rep.design.model == "onesample"
        if onesample:
            header += f" {'var*n':>9} {'mean-alpha':>10}"
        else:
            header += f" {'reject':>7}"
        header += f" {'failed':>6}"
        lines.append(header)
        for s in rep.stats:
            row = f"  {s.estimator:<14} {s.mean:>9.4f} {s.variance:>9.4f}"
            if onesample:
                var_n = s.variance * rep.design.n
                alpha = f"{s.mean_alpha:.3f}" if s.mean_alpha is not None else "-"
                row += f" {var_n:>9.4f} {alpha:>10}"
            else:
                rate = f"{s.rejection_rate:.3f}" if s.rejection_rate is not None else "-"
                row += f" {rate:>7}"
            row += f" {s.n_failed:>6d}"
            if s.flagged:
                row += "  [>1% failed]"
            lines.append(row)
        for key, ratio in rep.efficiency_ratios.items():
            lines.append(f"  var ratio {key}: {ratio:.3f}")
        lines.append("")
    return "\n".join(lines)


def cmd_simulate(args) -> int:
    if args.reps is not None and args.reps < 1:
        raise InvalidCSV("--reps must be at least 1")
    if args.design:
        with open(args.design) as fh:
            payload = json.load(fh)
        blocks = payload if isinstance(payload, list) else [payload]
        designs = [simulation.SimDesign.from_dict(b) for b in blocks]
        if args.reps is not None or args.seed is not None:
            designs = [
                simulation.SimDesign.from_dict({
                    **d.to_dict(),
                    "reps": args.reps if args.reps is not None else d.reps,
                    "master_seed": (args.seed if args.seed is not None
                                    else d.master_seed),
                }) for d in designs
            ]
        name = "custom"
    else:
        builder = simulation.TABLES[args.table]
        kwargs = {}
        if args.reps is not None:
            kwargs["reps"] = args.reps
        if args.seed is not None:
            kwargs["master_seed"] = args.seed
        designs = builder(**kwargs)
        name = args.table

    reports = [simulation.run(d, threads=args.threads) for d in designs]
    print(_text_table(reports), file=sys.stderr)
    _emit({"table": name, "blocks": [r.to_dict() for r in reports]})
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="missurv",
        description="Survival analysis with missing failure indicators",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit a regression estimator to a CSV")
    p_fit.add_argument("--input", required=True)
    p_fit.add_argument("--method", default="adaptive",
                       help="full | complete-case | s1 | adaptive | combined:D-file")
    p_fit.add_argument("--missing-type", choices=["type1", "type2"], default="type1")
    p_fit.set_defaults(func=cmd_fit)

    p_haz = sub.add_parser("hazard", help="hazard/survival curve or point estimate")
    p_haz.add_argument("--input", required=True)
    p_haz.add_argument("--estimator", required=True,
                       help="nelson-aalen | kaplan-meier | lambda1 | lambda2 | "
                            "alpha:<value> | adaptive | lo | breslow | baseline1 | baseline2")
    p_haz.add_argument("--eval-time", type=float, default=None)
    p_haz.set_defaults(func=cmd_hazard)

    p_sim = sub.add_parser("simulate", help="run a Monte Carlo study")
    group = p_sim.add_mutually_exclusive_group(required=True)
    group.add_argument("--table", choices=sorted(simulation.TABLES))
    group.add_argument("--design", help="JSON design file (one block or a list)")
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.add_argument("--reps", type=int, default=None)
    p_sim.add_argument("--threads", type=int,
                       default=int(os.environ.get("MISSURV_THREADS", "1")))
    p_sim.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MissurvError as err:
        return _fail(err)


if __name__ == "__main__":
    sys.exit(main())
