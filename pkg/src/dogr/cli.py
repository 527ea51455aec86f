"""Command-line workflow: synth, vif, fit, predict, select-k, evaluate, report.

Exit codes: 0 success, 1 usage error, 2 data or numerical error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from dogr.evaluation import CvConfig, nested_cv
from dogr.exceptions import DogrError
from dogr.inference import coefficient_report, coefficient_rows, predict_rows, radar_export
from dogr.model import FitConfig, fit
from dogr.numerics import wls_fit
from dogr.preprocess import (
    SyntheticSpec,
    atomic_write,
    dataset_to_csv,
    generate_synthetic,
    load_csv,
    read_table,
    rows_to_csv,
    vif_prune,
)
from dogr.selection import sweep
from dogr.serialize import dumps, load_model, model_to_json

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2
_INIT = {"random": "random_responsibilities", "kmeans": "kmeans_on_xy"}
_MODE = {"global": "global_weights", "posterior": "posterior_weights"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _floats(text):
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text):
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _add_fit_flags(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--tol", type=float, default=1e-6, help="relative log-likelihood tolerance")
    p.add_argument("--ridge", type=float, default=1e-6, help="relative covariance ridge")
    p.add_argument("--restarts", type=int, default=1)
    p.add_argument("--init", choices=sorted(_INIT), default="random")


def _add_common(p):
    p.add_argument("--precision", type=int, default=17, help="significant digits in numeric output")


def _checked(factory, **kwargs):
    try:
        return factory(**kwargs)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _fit_config(args, k=None) -> FitConfig:
    return _checked(
        FitConfig,
        n_components=k if k is not None else args.k,
        max_iterations=args.max_iters,
        rel_tolerance=args.tol,
        seed=args.seed,
        init_strategy=_INIT[args.init],
        covariance_ridge=args.ridge,
        n_restarts=args.restarts,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dogr", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="write the two-subgroup synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sizes", type=_ints, default=SyntheticSpec.component_sizes)
    p.add_argument("--x-means", type=_floats, default=SyntheticSpec.x_means)
    p.add_argument("--x-variances", type=_floats, default=SyntheticSpec.x_variances)
    p.add_argument("--intercepts", type=_floats, default=SyntheticSpec.intercepts)
    p.add_argument("--slopes", type=_floats, default=SyntheticSpec.slopes)
    p.add_argument("--residual-variance", type=float, default=SyntheticSpec.residual_variance)
    _add_common(p)

    p = sub.add_parser("vif", help="drop multicollinear features")
    p.add_argument("--input", required=True)
    p.add_argument("--outcome", required=True)
    p.add_argument("--out", required=True, help="reduced CSV")
    p.add_argument("--report", help="VIF report JSON (default: stdout)")
    p.add_argument("--threshold", type=float, default=5.0)
    _add_common(p)

    p = sub.add_parser("fit", help="fit a model and write it as JSON")
    p.add_argument("--input", required=True)
    p.add_argument("--outcome", required=True)
    p.add_argument("--out", required=True, help="model JSON")
    p.add_argument("--k", type=int, required=True)
    _add_fit_flags(p)
    _add_common(p)

    p = sub.add_parser("predict", help="predict outcomes for a feature CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=sorted(_MODE), default="posterior")
    _add_common(p)

    p = sub.add_parser("select-k", help="BIC sweep over the number of components")
    p.add_argument("--input", required=True)
    p.add_argument("--outcome", required=True)
    p.add_argument("--k-min", type=int, default=1)
    p.add_argument("--k-max", type=int, default=6)
    p.add_argument("--out", help="CSV, or JSON if the name ends in .json (default: stdout CSV)")
    p.add_argument("--threads", type=int, default=os.cpu_count())
    _add_fit_flags(p)
    _add_common(p)

    p = sub.add_parser("evaluate", help="nested cross-validation against pooled regression")
    p.add_argument("--input", required=True)
    p.add_argument("--outcome", required=True)
    p.add_argument("--out", help="report JSON (a table is always printed)")
    p.add_argument("--predictions", help="per-row held-out predictions CSV")
    p.add_argument("--outer-folds", type=int, default=5)
    p.add_argument("--inner-folds", type=int, default=5)
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--k-min", type=int, default=1)
    p.add_argument("--k-max", type=int, default=6)
    p.add_argument("--mode", choices=sorted(_MODE), default="posterior")
    p.add_argument("--threads", type=int, default=os.cpu_count())
    _add_fit_flags(p)
    _add_common(p)

    p = sub.add_parser("report", help="coefficient tests and radar-chart data")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True, help="output prefix")
    p.add_argument("--input", help="training CSV, needed for the coefficient report")
    p.add_argument("--outcome", help="outcome column of --input (default: the model's)")
    _add_common(p)
    return parser


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(args):
    spec = _checked(
        SyntheticSpec,
        component_sizes=args.sizes,
        x_means=args.x_means,
        x_variances=args.x_variances,
        intercepts=args.intercepts,
        slopes=args.slopes,
        residual_variance=args.residual_variance,
        seed=args.seed,
    )
    d = generate_synthetic(spec)
    atomic_write(args.out, dataset_to_csv(d, args.precision))
    print(f"wrote {d.n} rows to {args.out}")


def cmd_vif(args):
    d = load_csv(args.input, args.outcome)
    reduced, report = vif_prune(d, args.threshold)
    text = dumps(report.to_dict(), args.precision)
    atomic_write(args.out, dataset_to_csv(reduced, args.precision))
    if args.report:
        atomic_write(args.report, text)
    else:
        sys.stdout.write(text)


def cmd_fit(args):
    cfg = _fit_config(args)
    d = load_csv(args.input, args.outcome)
    m = fit(d, cfg)
    atomic_write(args.out, model_to_json(m, args.precision))
    print(f"K={m.n_components} iterations={m.iterations} converged={m.converged} "
          f"log_likelihood={m.log_likelihood_value:.{args.precision}g}")
    for k, c in enumerate(m.components):
        coef = ", ".join(f"{v:.6g}" for v in c.coefficients)
        print(f"  component {k}: weight={c.weight:.6g} coefficients=[{coef}] "
              f"residual_variance={c.residual_variance:.6g}")


def cmd_predict(args):
    m = load_model(args.model)
    header, body = read_table(args.input)
    missing = [n for n in m.feature_names if n not in header]
    extra = [h for h in header if h not in m.feature_names and h != m.outcome_name]
    if missing or extra:
        raise DogrError(
            f"{args.input}: feature columns do not match the model; "
            f"missing {missing}, unexpected {extra}"
        )
    X = body[:, [header.index(n) for n in m.feature_names]]
    pred = predict_rows(m, X, _MODE[args.mode])
    rows = [(i, v) for i, v in enumerate(pred)]
    atomic_write(args.out, rows_to_csv(["row", "prediction"], rows, args.precision))


def cmd_select_k(args):
    if args.k_min < 1 or args.k_max < args.k_min:
        raise UsageError("need 1 <= --k-min <= --k-max")
    cfg = _fit_config(args, k=args.k_min)
    d = load_csv(args.input, args.outcome)
    result = sweep(d, range(args.k_min, args.k_max + 1), cfg, threads=args.threads)
    table = result.table()
    if args.out and args.out.endswith(".json"):
        atomic_write(args.out, dumps({"best_k": result.best_k, "rows": table}, args.precision))
    else:
        cols = ["K", "loglik", "params", "bic", "selected", "error"]
        text = rows_to_csv(cols, [[r[c] for c in cols] for r in table], args.precision)
        if args.out:
            atomic_write(args.out, text)
        else:
            sys.stdout.write(text)
    print(f"best K = {result.best_k}", file=sys.stderr)


def cmd_evaluate(args):
    if args.k_min < 1 or args.k_max < args.k_min:
        raise UsageError("need 1 <= --k-min <= --k-max")
    cv = _checked(
        CvConfig,
        outer_folds=args.outer_folds,
        inner_folds=args.inner_folds,
        repeats=args.repeats,
        k_grid=tuple(range(args.k_min, args.k_max + 1)),
        seed=args.seed,
        prediction_mode=_MODE[args.mode],
    )
    cfg = _fit_config(args, k=args.k_min)
    d = load_csv(args.input, args.outcome)
    report = nested_cv(d, cv, cfg, threads=args.threads)
    if args.out:
        atomic_write(args.out, dumps(report.to_dict(), args.precision))
    if args.predictions:
        cols = ["row", "y_true", "y_pred_dogr", "y_pred_mlr", "fold"]
        atomic_write(args.predictions, rows_to_csv(cols, report.prediction_rows(d), args.precision))
    print(report.table())


def cmd_report(args):
    m = load_model(args.model)
    radar = radar_export(m)
    outputs = {f"{args.out}.radar.json": dumps(radar, args.precision)}
    if args.input:
        d = load_csv(args.input, args.outcome or m.outcome_name)
        if tuple(d.feature_names) != m.feature_names:
            raise DogrError(
                f"{args.input}: features {list(d.feature_names)} differ from model {list(m.feature_names)}"
            )
        pooled = wls_fit(d.features, d.outcome, np.ones(d.n))
        rows = coefficient_rows(coefficient_report(m, pooled))
        cols = ["feature", "component", "beta", "se", "z", "p", "reversal"]
        outputs[f"{args.out}.coefficients.csv"] = rows_to_csv(
            cols, [[r[c] for c in cols] for r in rows], args.precision
        )
    for path, text in outputs.items():
        atomic_write(path, text)
        print(f"wrote {path}")


COMMANDS = {
    "synth": cmd_synth,
    "vif": cmd_vif,
    "fit": cmd_fit,
    "predict": cmd_predict,
    "select-k": cmd_select_k,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
}


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"dogr {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DogrError, OSError, ValueError) as exc:
        print(f"dogr {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def main():
    sys.exit(run())
