"""Command-line interface.

Every subcommand writes a JSON document or a CSV table to ``--out`` (or
stdout) and echoes the invocation's settings into it.  Exit status is 0 on
success, 1 on invalid input and 2 when a search did not converge; in the
last case the best result found is still written and flagged.

Examples::

    kieferweiss fss --family poisson --theta0 0.5 --theta1 0.7 --alpha 0.1 --beta 0.1
    kieferweiss design-modified --family poisson --theta0 0.5 --theta1 0.7 \\
        --theta 0.58464 --lambda0 305.94 --lambda1 326.39 --out plan.json
    kieferweiss evaluate --plan plan.json --thetas 0.5 0.58464 0.7
    kieferweiss compare --family geometric --theta0 1 --theta1 2 --alpha 0.1 --beta 0.1
"""
from __future__ import annotations

import argparse
from concurrent.futures import ProcessPoolExecutor
import csv
from dataclasses import replace
import io
import json
import math
import os
import sys

from .design import DesignProblem, ResourceError, TestPlan, design_modified, design_truncated
from .evaluate import performance
from .expfam import family_from_name
from .fss import efficiency_ratios, fss, fss_bracket
from .solve import FIT_CONFIG, NonConvergence, kw_delta, solve_kiefer_weiss
from .sprt import SprtDesign, fit_sprt, sprt_plan_auto

ALPHA_GRID = (0.1, 0.05, 0.025, 0.01, 0.005, 0.001, 0.0005)
ASYMMETRIC = (0.1, 0.0005)

COMPARE_COLUMNS = [
    "lambda0", "lambda1", "theta", "H", "N_theta", "N_theta0", "N_theta1", "Q99", "delta",
    "log_A", "log_B", "N_theta_W", "N_theta0_W", "N_theta1_W", "Q99_W", "FSS",
    "R", "R0", "R1", "QR", "R_W", "R0_W", "R1_W", "QR_W",
]
# laid out like the reference tables; everything else gets two decimals
_FORMATS = {"alpha": "{:g}", "beta": "{:g}", "theta": "{:.5f}", "H": "{:d}", "Q99": "{:d}", "Q99_W": "{:d}",
            "delta": "{:.0E}", "log_A": "{:.4f}", "log_B": "{:.4f}"}


class UsageError(Exception):
    """Invalid invocation; reported with exit status 1."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage, which is reserved for non-convergence here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("model")
    g.add_argument("--family", choices=["poisson", "binomial", "negative_binomial", "geometric"])
    g.add_argument("--m", type=int, help="binomial number of trials")
    g.add_argument("--r", type=int, help="negative binomial number of successes")
    g.add_argument("--theta0", type=float)
    g.add_argument("--theta1", type=float)
    g = common.add_argument_group("criterion")
    g.add_argument("--alpha", type=float)
    g.add_argument("--beta", type=float)
    g.add_argument("--theta", type=float)
    g.add_argument("--lambda0", type=float)
    g.add_argument("--lambda1", type=float)
    g.add_argument("--penalty-c", type=float, default=0.0)
    g.add_argument("--horizon-cap", type=int)
    g.add_argument("--level", type=float, default=0.99, help="quantile level for the sample number")
    g = common.add_argument_group("output")
    g.add_argument("--format", choices=["json", "csv"])
    g.add_argument("--out", help="output file (default: stdout)")
    g = common.add_argument_group("solver")
    g.add_argument("--max-iter", type=int, default=FIT_CONFIG.max_iter)
    g.add_argument("--tol", type=float, default=FIT_CONFIG.ftol_abs, help="simplex tolerance on objective values")

    parser = _Parser(prog="kieferweiss", description="Optimal sequential tests for discrete exponential families.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("design-modified", parents=[common], help="optimal plan for fixed theta and multipliers")
    sub.add_parser("design-kw", parents=[common], help="approximate Kiefer-Weiss test for nominal errors")
    p = sub.add_parser("evaluate", parents=[common], help="performance of a saved plan or of an SPRT")
    p.add_argument("--plan", help="plan JSON written by design-modified")
    p.add_argument("--log-a", type=float, help="SPRT lower log boundary (natural log)")
    p.add_argument("--log-b", type=float, help="SPRT upper log boundary (natural log)")
    p.add_argument("--thetas", type=float, nargs="+", required=True)
    sub.add_parser("sprt-fit", parents=[common], help="SPRT boundaries matching nominal errors")
    sub.add_parser("fss", parents=[common], help="fractional fixed sample size")
    p = sub.add_parser("compare", parents=[common], help="one table column: optimal test, SPRT and FSS")
    p.add_argument("--log-a", type=float, help="use these SPRT boundaries instead of fitting")
    p.add_argument("--log-b", type=float)
    p = sub.add_parser("reproduce-table", parents=[common], help="all columns of a table")
    p.add_argument("--alphas", type=float, nargs="+", default=list(ALPHA_GRID),
                   help="alpha = beta values of the symmetric columns")
    p.add_argument("--no-asymmetric", action="store_true", help="skip the (0.1, 0.0005) column")
    return parser


def _require(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise UsageError(f"{args.command} needs {flags}")


def _model(args):
    _require(args, "family")
    return family_from_name(args.family, m=args.m, r=args.r)


def _config(args) -> dict:
    skip = {"out"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _fit_config(args):
    return replace(FIT_CONFIG, max_iter=args.max_iter, ftol_abs=args.tol)


def _sprt_config(args):
    return replace(FIT_CONFIG, step=0.05, max_iter=args.max_iter, ftol_abs=args.tol)


def _fmt(name, v):
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    if isinstance(v, int) and name not in _FORMATS:
        return str(v)
    return _FORMATS.get(name, "{:.2f}").format(v)


def compare_row(model, theta0, theta1, alpha, beta, *, theta=None, lambdas=None, sprt_bounds=None,
                level=0.99, fit_config=None, sprt_config=None) -> tuple[dict, bool]:
    """One column of a comparison table as a dict keyed by :data:`COMPARE_COLUMNS`.

    The optimal test is searched for unless ``theta`` and ``lambdas`` are
    given; the SPRT is fitted unless ``sprt_bounds`` is given.  The second
    return value is False when a search failed to converge.
    """
    ok = True
    if theta is not None and lambdas is not None:
        plan = design_modified(DesignProblem(model, theta0, theta1, theta, *lambdas))
        delta, _, _ = kw_delta(plan, model, theta)
        lam0, lam1 = lambdas
    else:
        res = solve_kiefer_weiss(model, theta0, theta1, alpha, beta, config=fit_config, level=level)
        ok = ok and res.converged
        plan, theta, delta, lam0, lam1 = res.plan, res.theta, res.delta, res.lambda0, res.lambda1
    rep = {k: performance(plan, model, t, theta0, theta1, level)
           for k, t in (("theta", theta), ("theta0", theta0), ("theta1", theta1))}

    if sprt_bounds is None:
        try:
            sd = fit_sprt(model, theta0, theta1, alpha, beta, config=sprt_config)
        except NonConvergence as exc:
            sd, ok = exc.best, False
    else:
        sd = SprtDesign(*sprt_bounds)
    wplan = sprt_plan_auto(sd, model, theta0, theta1, thetas=(theta0, theta, theta1))
    wrep = {k: performance(wplan, model, t, theta0, theta1, level)
            for k, t in (("theta", theta), ("theta0", theta0), ("theta1", theta1))}

    f = fss(model, theta0, theta1, alpha, beta)
    r = efficiency_ratios(f, rep["theta"].asn, rep["theta0"].asn, rep["theta1"].asn, rep["theta"].quantile_99)
    rw = efficiency_ratios(f, wrep["theta"].asn, wrep["theta0"].asn, wrep["theta1"].asn, wrep["theta"].quantile_99)
    row = {
        "lambda0": lam0, "lambda1": lam1, "theta": theta, "H": int(rep["theta"].max_n),
        "N_theta": rep["theta"].asn, "N_theta0": rep["theta0"].asn, "N_theta1": rep["theta1"].asn,
        "Q99": int(rep["theta"].quantile_99), "delta": delta,
        "log_A": sd.log_a, "log_B": sd.log_b,
        "N_theta_W": wrep["theta"].asn, "N_theta0_W": wrep["theta0"].asn, "N_theta1_W": wrep["theta1"].asn,
        "Q99_W": int(wrep["theta"].quantile_99), "FSS": f,
        "R": r["R"], "R0": r["R0"], "R1": r["R1"], "QR": r["QR"],
        "R_W": rw["R"], "R0_W": rw["R0"], "R1_W": rw["R1"], "QR_W": rw["QR"],
    }
    return row, ok


def _table_column(job):
    family, m, r, theta0, theta1, alpha, beta, level, fit_config, sprt_config = job
    model = family_from_name(family, m=m, r=r)
    row, ok = compare_row(model, theta0, theta1, alpha, beta, level=level, fit_config=fit_config,
                          sprt_config=sprt_config)
    return {"alpha": alpha, "beta": beta, **row}, ok


def _csv_text(rows, columns, config, formatted=True) -> str:
    buf = io.StringIO()
    buf.write("# config: " + json.dumps(config, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(c, row[c]) if formatted else ("" if row[c] is None else row[c]) for c in columns])
    return buf.getvalue()


def _emit(args, payload, default_format="json", csv_rows=None, csv_columns=None, formatted=False):
    fmt = args.format or default_format
    config = _config(args)
    if fmt == "json":
        text = json.dumps({"config": config, **payload}, indent=2, default=_json_default) + "\n"
    else:
        if csv_rows is None:
            raise UsageError(f"{args.command} has no CSV form")
        text = _csv_text(csv_rows, csv_columns, config, formatted)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json_default(o):
    if hasattr(o, "tolist"):
        return o.tolist()
    if hasattr(o, "item"):
        return o.item()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def cmd_design_modified(args) -> int:
    _require(args, "theta0", "theta1", "theta", "lambda0", "lambda1")
    model = _model(args)
    pr = DesignProblem(model, args.theta0, args.theta1, args.theta, args.lambda0, args.lambda1,
                       penalty_c=args.penalty_c)
    if args.horizon_cap is not None:
        plan = design_truncated(pr, args.horizon_cap)
    else:
        plan = design_modified(pr)
    stages = [{**st, "threshold": t} for st, t in zip(plan.to_dict()["stages"], plan.to_dict()["accept_thresholds"])]
    stages.append({"n": plan.horizon, "a": None, "b": None, "threshold": int(plan.thresholds[-1])})
    _emit(args, {"plan": plan.to_dict()}, csv_rows=stages, csv_columns=["n", "a", "b", "threshold"])
    return 0


def cmd_design_kw(args) -> int:
    _require(args, "theta0", "theta1", "alpha", "beta")
    model = _model(args)
    res = solve_kiefer_weiss(model, args.theta0, args.theta1, args.alpha, args.beta, config=_fit_config(args),
                             level=args.level)
    _emit(args, {"result": res.to_dict()})
    return 0 if res.converged else 2


def cmd_evaluate(args) -> int:
    if args.plan:
        with open(args.plan, encoding="utf-8") as fh:
            doc = json.load(fh)
        plan = TestPlan.from_dict(doc.get("plan", doc))
        pr = plan.problem
        model, theta0, theta1 = pr.model, pr.theta0, pr.theta1
        source = {"plan_file": args.plan}
    else:
        _require(args, "log_a", "log_b", "theta0", "theta1")
        model, theta0, theta1 = _model(args), args.theta0, args.theta1
        plan = sprt_plan_auto(SprtDesign(args.log_a, args.log_b), model, theta0, theta1,
                              thetas=(theta0, theta1, *args.thetas))
        source = {"sprt": {"log_a": args.log_a, "log_b": args.log_b, "cap": plan.horizon}}
    reports = [performance(plan, model, t, theta0, theta1, args.level) for t in args.thetas]
    rows = [{k: v for k, v in r.to_dict().items() if k != "tail"} for r in reports]
    _emit(args, {**source, "reports": [r.to_dict() for r in reports]}, csv_rows=rows,
          csv_columns=["theta", "oc", "alpha", "beta", "asn", "quantile_99", "max_n"])
    return 0


def cmd_sprt_fit(args) -> int:
    _require(args, "theta0", "theta1", "alpha", "beta")
    model = _model(args)
    try:
        d, status = fit_sprt(model, args.theta0, args.theta1, args.alpha, args.beta, config=_sprt_config(args)), 0
    except NonConvergence as exc:
        d, status = exc.best, 2
    _emit(args, {"sprt": {**d.to_dict(), "converged": status == 0}})
    return status


def cmd_fss(args) -> int:
    _require(args, "theta0", "theta1", "alpha", "beta")
    model = _model(args)
    value = fss(model, args.theta0, args.theta1, args.alpha, args.beta)
    n_star = fss_bracket(model, args.theta0, args.theta1, args.alpha, args.beta)
    row = {"fss": value, "n_star": n_star}
    _emit(args, row, csv_rows=[row], csv_columns=["fss", "n_star"])
    return 0


def cmd_compare(args) -> int:
    _require(args, "theta0", "theta1", "alpha", "beta")
    model = _model(args)
    given = None
    if args.theta is not None or args.lambda0 is not None or args.lambda1 is not None:
        _require(args, "theta", "lambda0", "lambda1")
        given = (args.lambda0, args.lambda1)
    bounds = None
    if args.log_a is not None or args.log_b is not None:
        _require(args, "log_a", "log_b")
        bounds = (args.log_a, args.log_b)
    row, ok = compare_row(model, args.theta0, args.theta1, args.alpha, args.beta, theta=args.theta,
                          lambdas=given, sprt_bounds=bounds, level=args.level, fit_config=_fit_config(args),
                          sprt_config=_sprt_config(args))
    _emit(args, {"row": row, "converged": ok}, default_format="csv", csv_rows=[row],
          csv_columns=COMPARE_COLUMNS, formatted=True)
    return 0 if ok else 2


def cmd_reproduce_table(args) -> int:
    _require(args, "theta0", "theta1")
    _model(args)  # validate the family flags before starting workers
    pairs = [(a, a) for a in args.alphas]
    if not args.no_asymmetric:
        pairs.append(ASYMMETRIC)
    for a, b in pairs:
        if not (0 < a < 1 and 0 < b < 1):
            raise ValueError("alpha and beta must lie in (0, 1)")
    jobs = [(args.family, args.m, args.r, args.theta0, args.theta1, a, b, args.level, _fit_config(args),
             _sprt_config(args)) for a, b in pairs]
    workers = int(os.environ.get("KW_THREADS", "0")) or os.cpu_count() or 1
    workers = max(1, min(workers, len(jobs)))
    if workers == 1:
        results = [_table_column(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_table_column, jobs))
    rows = [r for r, _ in results]
    ok = all(flag for _, flag in results)
    _emit(args, {"rows": rows, "converged": ok}, default_format="csv", csv_rows=rows,
          csv_columns=["alpha", "beta", *COMPARE_COLUMNS], formatted=True)
    return 0 if ok else 2


COMMANDS = {
    "design-modified": cmd_design_modified,
    "design-kw": cmd_design_kw,
    "evaluate": cmd_evaluate,
    "sprt-fit": cmd_sprt_fit,
    "fss": cmd_fss,
    "compare": cmd_compare,
    "reproduce-table": cmd_reproduce_table,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ValueError, KeyError, OSError, ResourceError) as exc:
        print(f"kieferweiss {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
