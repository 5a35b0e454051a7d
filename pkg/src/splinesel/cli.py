"""Command-line interface.

Exit status: 0 on success, 2 on usage or configuration errors, 1 on
runtime errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import bspline
from .config import PipelineConfig
from .errors import ConfigError, SplineselError
from .mi import MiEstimatorConfig
from .models import (
    CvGrid,
    cv_select_components,
    cv_select_meta,
    fit_latent,
    fit_linear,
    fit_rbfn,
    load_model,
    nmse,
    save_model,
)
from .pipeline import EXPORTS, PipelineReport, benchmark_complexity, export_plot_data, run_pipeline
from .selection import forward_backward
from .spectra import LAYOUTS, load_spectra


def _ints(text):
    return [int(v) for v in text.split(",") if v.strip()]


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _sizes(text):
    out = []
    for item in text.split(","):
        parts = item.lower().split("x")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError(f"size {item!r} is not NxnxP")
        out.append(tuple(int(p) for p in parts))
    return out


def _columns(arg, n):
    cols = list(range(n)) if arg is None else _ints(arg)
    if not cols or min(cols) < 0 or max(cols) >= n:
        raise ConfigError(f"--columns must index 0..{n - 1}")
    return cols


def cmd_compress(args):
    data = load_spectra(args.data, args.layout)
    w = data.wavelengths
    if args.n is not None:
        basis = bspline.basis_for_size(args.n, args.order, w[0], w[-1])
        curve = None
    else:
        n_range = bspline.default_n_range(w.size)
        n_range = (args.n_min or n_range[0], args.n_max or n_range[1])
        choice = bspline.select_basis_size(data, n_range, _ints(args.orders), args.strategy)
        basis = choice.basis(w[0], w[-1])
        curve = choice.loo_curve
    R = bspline.projection_matrix(basis, w)
    bspline.compressed_to_csv(bspline.compress(R, data), args.out)
    info = {**basis.describe(), "n_functions": basis.n_functions}
    if curve is not None:
        info["loo_curve"] = [list(c) for c in curve]
    if args.basis_out:
        Path(args.basis_out).write_text(json.dumps(info, indent=2) + "\n", encoding="utf-8")
    print(f"basis: order={basis.order} intervals={basis.intervals} "
          f"n={basis.n_functions} on [{basis.w_min:g}, {basis.w_max:g}]")


def cmd_select(args):
    data = load_spectra(args.data, "target_first_column")
    cfg = MiEstimatorConfig(k=args.mi_k, seed=args.mi_seed)
    trace = forward_backward(data.responses, data.target, cfg,
                             max_size=args.max_size, min_delta=args.min_delta)
    if args.out:
        trace.to_csv(args.out)
    sel = ",".join(str(i) for i in trace.final_subset)
    print(f"selected: {sel}")
    print(f"mi: {trace.final_mi:.6f}")


def cmd_train(args):
    data = load_spectra(args.data, "target_first_column")
    cols = _columns(args.columns, data.n_wavelengths)
    X, y = data.responses[:, cols], data.target
    meta = {"columns": cols, "n_data_columns": data.n_wavelengths}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        if args.method == "rbfn":
            grid = CvGrid(_ints(args.neurons), _floats(args.scales), args.folds, args.seed)
            M, scale = cv_select_meta(X, y, grid).best
            model = fit_rbfn(X, y, M, scale, seed=args.seed, standardize=True)
            meta.update(neurons=M, width_scale=scale)
        elif args.method == "lr":
            model = fit_linear(X, y)
        else:
            a = args.components
            if a is None:
                a = cv_select_components(X, y, args.method, args.max_components,
                                         args.folds, args.seed).best[0]
            model = fit_latent(X, y, args.method, a)
            meta.update(components=model.n_components)
    save_model(model, args.out, meta)
    print(f"wrote {args.out}")


def cmd_predict(args):
    model, meta = load_model(args.model)
    data = load_spectra(args.data, args.layout)
    expected = meta.get("n_data_columns")
    if expected is not None and expected != data.n_wavelengths:
        raise SplineselError(
            f"dimension mismatch: model was trained on {expected} columns, "
            f"data has {data.n_wavelengths}"
        )
    cols = meta.get("columns", list(range(data.n_wavelengths)))
    pred = model.predict(data.responses[:, cols])
    out = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        writer = csv.writer(out)
        if data.has_target:
            writer.writerow(["y_true", "y_pred"])
            for t, p in zip(data.target, pred):
                writer.writerow([repr(float(t)), repr(float(p))])
        else:
            writer.writerow(["y_pred"])
            for p in pred:
                writer.writerow([repr(float(p))])
    finally:
        if args.out:
            out.close()


def cmd_evaluate(args):
    with open(args.predictions, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or not {"y_true", "y_pred"} <= set(rows[0]):
        raise ConfigError("predictions file needs columns y_true,y_pred")
    y_true = np.array([float(r["y_true"]) for r in rows])
    y_pred = np.array([float(r["y_pred"]) for r in rows])
    variance = args.variance if args.variance is not None else float(np.var(y_true))
    print(f"NMSE {nmse(y_true, y_pred, variance):.6g}")


def cmd_pipeline(args):
    cfg = PipelineConfig.from_file(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    cfg.validate()
    report = run_pipeline(cfg)
    out = args.out or cfg.output
    report.save(out)
    print(report.summary())
    print(f"wrote {out}")


def cmd_benchmark(args):
    rows = benchmark_complexity(args.sizes, seed=args.seed, max_size=args.max_size,
                                repeats=args.repeats)
    keys = ["N", "n", "P", "crossover", "time_compressed", "time_raw", "ratio"]
    out = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        writer = csv.writer(out)
        writer.writerow(keys)
        for r in rows:
            writer.writerow(["" if r[k] is None else r[k] for k in keys])
    finally:
        if args.out:
            out.close()


def cmd_export(args):
    report = PipelineReport.load(args.report)
    variables = _ints(args.variables) if args.variables else None
    export_plot_data(report, args.what, args.out, variables)
    print(f"wrote {args.out}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="splinesel", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=func)
        p.add_argument("--seed", type=int, default=None if name == "pipeline" else 0)
        return p

    p = add("compress", cmd_compress, "project spectra on a B-spline basis")
    p.add_argument("--data", required=True)
    p.add_argument("--layout", choices=LAYOUTS, default="target_first_column")
    p.add_argument("--orders", default="4")
    p.add_argument("--n-min", type=int)
    p.add_argument("--n-max", type=int)
    p.add_argument("--strategy", choices=("exhaustive", "coarse_to_fine"), default="coarse_to_fine")
    p.add_argument("--n", type=int, help="fixed basis size (skips the LOO search)")
    p.add_argument("--order", type=int, default=4, help="order used with --n")
    p.add_argument("--out", required=True)
    p.add_argument("--basis-out")

    p = add("select", cmd_select, "forward-backward MI selection of columns")
    p.add_argument("--data", required=True)
    p.add_argument("--mi-k", type=int, default=6)
    p.add_argument("--mi-seed", type=int, default=0)
    p.add_argument("--max-size", type=int)
    p.add_argument("--min-delta", type=float, default=0.0)
    p.add_argument("--out")

    p = add("train", cmd_train, "fit a prediction model")
    p.add_argument("--data", required=True)
    p.add_argument("--method", choices=("rbfn", "lr", "pcr", "plsr"), required=True)
    p.add_argument("--columns")
    p.add_argument("--neurons", default="2,3,5,8,12,20,30")
    p.add_argument("--scales", default="0.5,1,2,4,8")
    p.add_argument("--components", type=int)
    p.add_argument("--max-components", type=int, default=20)
    p.add_argument("--folds", type=int, default=3)
    p.add_argument("--out", required=True)

    p = add("predict", cmd_predict, "apply a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--layout", choices=LAYOUTS, default="target_first_column")
    p.add_argument("--out")

    p = add("evaluate", cmd_evaluate, "NMSE of a predictions file")
    p.add_argument("--predictions", required=True)
    p.add_argument("--variance", type=float)

    p = add("pipeline", cmd_pipeline, "run the full method from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out")

    p = add("benchmark", cmd_benchmark, "time compressed vs raw-variable selection")
    p.add_argument("--sizes", type=_sizes, default=_sizes("400x80x40,400x80x80,400x80x160"))
    p.add_argument("--max-size", type=int, default=3)
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--out")

    p = add("export", cmd_export, "write plot-ready CSV from a report")
    p.add_argument("--report", required=True)
    p.add_argument("--what", choices=EXPORTS, required=True)
    p.add_argument("--variables")
    p.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (SplineselError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
