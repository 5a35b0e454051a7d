"""End-to-end method: compression, MI selection, wavelength ranges, models.

``run_pipeline`` executes every requested method on one train/test split
and returns a :class:`PipelineReport`. Only training targets are handed to
the fitting stages; test targets are read once, for the final NMSE.
"""

from __future__ import annotations

import copy
import csv
import json
import math
import time
import warnings
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import bspline
from .config import METHOD_LABELS, PipelineConfig, read_split_file
from .errors import PreconditionError, SplineselError, StageError
from .mi import MiEstimatorConfig
from .models import (
    CvGrid,
    cv_select_components,
    cv_select_meta,
    fit_latent,
    fit_linear,
    fit_rbfn,
    important_wavelengths_linear,
    nmse,
    union_variance,
)
from .selection import SubsetScorer, forward_backward
from .spectra import SpectraSet, Standardizer, load_spectra, standardize, stratified_split
from .synthetic import make_spectra

REPORT_SCHEMA = 1


@contextmanager
def _stage(name: str, timing: Dict[str, float]):
    t0 = time.perf_counter()
    try:
        yield
    except StageError:
        raise
    except (SplineselError, ValueError, np.linalg.LinAlgError) as exc:
        raise StageError(name, exc) from exc
    finally:
        timing[name] = timing.get(name, 0.0) + time.perf_counter() - t0


def _intervals(pairs) -> List[List[float]]:
    return [[float(lo), float(hi)] for lo, hi in pairs]


@dataclass
class PipelineReport:
    """Report document plus convenience accessors.

    ``doc`` is the JSON-serializable content; ``doc["timing"]`` is the only
    part that changes between identical runs.
    """

    doc: dict

    @property
    def methods(self) -> Dict[str, dict]:
        return self.doc["methods"]

    def nmse(self, method: str) -> float:
        return self.methods[method]["nmse_test"]

    def intervals(self, method: str) -> List[Tuple[float, float]]:
        return [tuple(iv) for iv in self.methods[method]["intervals"]]

    def without_timing(self) -> dict:
        d = copy.deepcopy(self.doc)
        d.pop("timing", None)
        return d

    def to_json(self) -> str:
        return json.dumps(self.doc, indent=2) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "PipelineReport":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")))

    def summary(self) -> str:
        lines = [f"{'Method':<24}{'Variables':>10}  NMSE (test)"]
        for key, m in self.methods.items():
            lines.append(f"{m['label']:<24}{m['n_variables']:>10}  {m['nmse_test']:.3e}")
        return "\n".join(lines)


def _select(features, y, config: PipelineConfig, warn: List[str], label: str):
    """Forward-backward selection with an empty-result fallback."""
    if config.mi_standardize:
        features = Standardizer.fit(features).transform(features)
        y = Standardizer.fit(y[:, None]).transform(y[:, None])[:, 0]
    mi_cfg = MiEstimatorConfig(k=config.mi_k, jitter_scale=config.mi_jitter, seed=config.mi_seed)
    scorer = SubsetScorer(features, y, mi_cfg)
    trace = forward_backward(scorer, max_size=config.max_size, min_delta=config.min_delta)
    subset = list(trace.final_subset)
    if not subset:
        singles = [scorer([f]) for f in range(features.shape[1])]
        subset = [int(np.argmax(singles))]
        msg = f"{label}: no feature has positive MI; falling back to feature {subset[0]}"
        warn.append(msg)
        warnings.warn(msg, stacklevel=3)
    return trace, subset


def _fit_rbfn_cv(X_train, y_train, config: PipelineConfig):
    grid = CvGrid(config.rbfn_neurons, config.rbfn_scales, config.cv_folds, config.seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cv = cv_select_meta(X_train, y_train, grid, standardize=True)
        M, scale = cv.best
        model = fit_rbfn(X_train, y_train, M, scale, seed=config.seed, standardize=True)
    return model, cv


def run_pipeline(config: PipelineConfig, spectra: Optional[SpectraSet] = None,
                 split=None) -> PipelineReport:
    """Run the configured methods on one split and evaluate them on its test part."""
    timing: Dict[str, float] = {}
    warn: List[str] = []
    with _stage("load", timing):
        if spectra is None:
            config.validate()
            spectra = load_spectra(config.data, config.layout)
        else:
            config.validate(need_data=False)
        if not spectra.has_target:
            raise PreconditionError("the pipeline needs spectra with a target")
        if split is None:
            if config.split_file:
                split = read_split_file(config.split_file, spectra.n_spectra)
            else:
                split = stratified_split(spectra, config.test_fraction, config.seed)
        split.check_covers(spectra.n_spectra)
        train, test = split.train_indices, split.test_indices
        if config.standardize:
            spectra = standardize(spectra, train)

    w = spectra.wavelengths
    X = spectra.responses
    y_work = np.array(spectra.target)
    if config.audit_isolation:
        y_work[test] = np.nan  # poisoned until final evaluation
    y_train = y_work[train]

    methods = [m for m in ("pcr", "plsr", "mi_rbfn", "bspline_mi_rbfn", "bspline_mi_lr")
               if m in config.methods]
    doc = {
        "schema": REPORT_SCHEMA,
        "config": config.to_dict(),
        "data": {
            "n_spectra": spectra.n_spectra,
            "n_wavelengths": spectra.n_wavelengths,
            "w_min": float(w[0]),
            "w_max": float(w[-1]),
            "n_train": int(train.size),
            "n_test": int(test.size),
        },
        "split": {"train": train.tolist(), "test": test.tolist(), "seed": split.seed},
        "wavelengths": w.tolist(),
        "methods": {},
        "selections": {},
        "warnings": warn,
    }
    predictions: Dict[str, np.ndarray] = {}

    if any(m.startswith("bspline") for m in methods):
        with _stage("basis", timing):
            n_range = bspline.default_n_range(w.size)
            n_range = (config.n_min or n_range[0], config.n_max or n_range[1])
            choice = bspline.select_basis_size(
                SpectraSet(w, X[train]), n_range, config.orders, config.basis_strategy
            )
            basis = choice.basis(w[0], w[-1])
            R = bspline.projection_matrix(basis, w)
            coef = bspline.compress(R, SpectraSet(w, X)).coefficients
            doc["basis"] = {
                **basis.describe(),
                "n_functions": basis.n_functions,
                "loo": choice.loo,
                "loo_curve": [[n, d, v] for n, d, v in choice.loo_curve],
            }
        with _stage("selection_bspline", timing):
            trace, subset = _select(coef[train], y_train, config, warn, "bspline")
        with _stage("ranges", timing):
            ranges = [bspline.wavelength_range(R, i, config.epsilon) for i in subset]
            merged = _intervals(bspline.merge_ranges(ranges))
            doc["selections"]["bspline"] = {
                "trace": trace.to_dict(),
                "variables": subset,
                "ranges": [[r.variable_index, r.lower, r.upper] for r in ranges],
                "intervals": merged,
            }
        if "bspline_mi_rbfn" in methods:
            with _stage("model_bspline_mi_rbfn", timing):
                model, cv = _fit_rbfn_cv(coef[train][:, subset], y_train, config)
                predictions["bspline_mi_rbfn"] = model.predict(coef[test][:, subset])
                doc["methods"]["bspline_mi_rbfn"] = {
                    "variables": subset,
                    "intervals": merged,
                    "meta": {"neurons": int(cv.best[0]), "width_scale": float(cv.best[1])},
                    "cv_table": cv.table,
                    "degenerate_kernels": model.degenerate_kernels,
                }
        if "bspline_mi_lr" in methods:
            with _stage("model_bspline_mi_lr", timing):
                lin = fit_linear(coef[train][:, subset], y_train)
                predictions["bspline_mi_lr"] = lin.predict(coef[test][:, subset])
                doc["methods"]["bspline_mi_lr"] = {
                    "variables": subset,
                    "intervals": merged,
                    "meta": {"rank_deficient": lin.rank_deficient},
                }

    if "mi_rbfn" in methods:
        with _stage("selection_raw", timing):
            trace_raw, raw_subset = _select(X[train], y_train, config, warn, "raw")
            raw_intervals = _intervals(bspline.merge_ranges((w[j], w[j]) for j in raw_subset))
            doc["selections"]["raw"] = {
                "trace": trace_raw.to_dict(),
                "variables": raw_subset,
                "wavelengths": [float(w[j]) for j in raw_subset],
                "intervals": raw_intervals,
            }
        with _stage("model_mi_rbfn", timing):
            model, cv = _fit_rbfn_cv(X[train][:, raw_subset], y_train, config)
            predictions["mi_rbfn"] = model.predict(X[test][:, raw_subset])
            doc["methods"]["mi_rbfn"] = {
                "variables": raw_subset,
                "intervals": raw_intervals,
                "meta": {"neurons": int(cv.best[0]), "width_scale": float(cv.best[1])},
                "cv_table": cv.table,
                "degenerate_kernels": model.degenerate_kernels,
            }

    for kind in ("pcr", "plsr"):
        if kind not in methods:
            continue
        with _stage(f"model_{kind}", timing):
            cv = cv_select_components(X[train], y_train, kind, config.max_components,
                                      config.cv_folds, config.seed)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                latent = fit_latent(X[train], y_train, kind, cv.best[0])
            predictions[kind] = latent.predict(X[test])
            alpha = latent.linear.full_coefficients()
            doc["methods"][kind] = {
                "variables": list(range(w.size)),
                "components": int(latent.n_components),
                "intervals": _intervals(important_wavelengths_linear(latent, w, config.epsilon)),
                "meta": {"components": int(latent.n_components)},
                "cv_table": cv.table,
                "linear_coefficients": alpha.tolist(),
            }

    with _stage("evaluate", timing):
        y_true = np.asarray(spectra.target)
        variance = union_variance(y_true[train], y_true[test])
        for m in methods:
            entry = doc["methods"][m]
            entry["label"] = METHOD_LABELS[m]
            entry["n_variables"] = (entry["components"] if m in ("pcr", "plsr")
                                    else len(entry["variables"]))
            entry["nmse_test"] = nmse(y_true[test], predictions[m], variance)
            if not math.isfinite(entry["nmse_test"]):
                raise PreconditionError(f"{m}: non-finite test error")
        doc["variance_union"] = variance
        doc["methods"] = {m: doc["methods"][m] for m in methods}

    doc["timing"] = timing
    return PipelineReport(doc)


def _write_rows(path, header: Sequence[str], rows) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(header)
        for r in rows:
            out.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


EXPORTS = ("coefficient_rows", "loo_curve", "selected_coefficients", "linear_coefficients")


def _normalized(a: np.ndarray) -> np.ndarray:
    a = np.abs(a)
    m = a.max()
    return a / m if m > 0 else a


def export_plot_data(report: PipelineReport, what: str, path, variables=None) -> Path:
    """Write plot-ready CSV for one report artifact.

    ``coefficient_rows``: one column per selected B-spline variable with the
    normalized absolute projection weights, one row per wavelength.
    ``selected_coefficients``: the column-wise maximum of those profiles.
    ``loo_curve``: one row per evaluated basis size.
    ``linear_coefficients``: normalized absolute PCR/PLSR coefficients.
    """
    doc = report.doc
    path = Path(path)
    w = np.asarray(doc["wavelengths"])
    if what not in EXPORTS:
        raise PreconditionError(f"unknown export {what!r}; choose from {EXPORTS}")
    if what == "loo_curve":
        if "basis" not in doc:
            raise PreconditionError("report has no loo_curve: the basis stage did not run")
        _write_rows(path, ["n_functions", "order", "loo"], doc["basis"]["loo_curve"])
        return path
    if what in ("coefficient_rows", "selected_coefficients"):
        if "basis" not in doc or "bspline" not in doc["selections"]:
            raise PreconditionError(
                f"report has no {what}: the bspline selection stage did not run"
            )
        b = doc["basis"]
        basis = bspline.build_basis(b["w_min"], b["w_max"], b["intervals"], b["order"])
        R = bspline.projection_matrix(basis, w).entries
        chosen = doc["selections"]["bspline"]["variables"] if variables is None else list(variables)
        profiles = np.array([_normalized(R[i]) for i in chosen])
        if what == "coefficient_rows":
            _write_rows(path, ["wavelength"] + [f"A{i}" for i in chosen],
                        np.column_stack([w, profiles.T]).tolist())
        else:
            _write_rows(path, ["wavelength", "normalized_weight"],
                        np.column_stack([w, profiles.max(0)]).tolist())
        return path
    linear = [m for m in ("pcr", "plsr") if m in doc["methods"]]
    if not linear:
        raise PreconditionError("report has no linear_coefficients: no PCR/PLSR model was fitted")
    cols = [_normalized(np.asarray(doc["methods"][m]["linear_coefficients"])) for m in linear]
    _write_rows(path, ["wavelength"] + linear, np.column_stack([w] + cols).tolist())
    return path


def crossover_value(N: int, n: int, P: int) -> float:
    """``1/P + (n/N)^3``; compressed selection is cheaper when this is below 1."""
    return 1.0 / P + (n / N) ** 3


def _timed(fn, repeats: int) -> float:
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def benchmark_complexity(sizes: Sequence[Tuple[int, int, int]], seed: int = 0,
                         max_size: int = 3, mi_k: int = 6, repeats: int = 1,
                         order: int = 4) -> List[dict]:
    """Time compressed-pipeline selection against selection on raw variables.

    For each ``(N, n, P)``: (a) coarse-to-fine basis search on
    ``[N/20, N/2]`` plus compression onto ``n`` functions plus
    forward-backward selection on the coefficients; (b) forward-backward
    selection on the ``N`` raw variables. Both selections use the exhaustive
    O(d P^2) neighbour search and stop after ``max_size`` forward steps.
    Rows where ``P <= mi_k`` carry only the crossover value.
    """
    mi_cfg = MiEstimatorConfig(k=mi_k, seed=seed, method="brute")
    rows = []
    for N, n, P in sizes:
        row = {"N": N, "n": n, "P": P, "crossover": crossover_value(N, n, P),
               "time_compressed": None, "time_raw": None, "ratio": None}
        if P > mi_k:
            data = make_spectra(P, N, seed=seed).spectra
            w, X, y = data.wavelengths, data.responses, data.target
            lo, hi = bspline.default_n_range(N)
            lo, hi = max(lo, order + 1), max(hi, order + 1)

            def compressed():
                bspline.select_basis_size(SpectraSet(w, X), (lo, hi), (order,), "coarse_to_fine")
                R = bspline.projection_matrix(bspline.basis_for_size(n, order, w[0], w[-1]), w)
                A = X @ R.entries.T
                return forward_backward(A, y, mi_cfg, max_size=max_size)

            def raw():
                return forward_backward(X, y, mi_cfg, max_size=max_size)

            row["time_compressed"] = _timed(compressed, repeats)
            row["time_raw"] = _timed(raw, repeats)
            row["ratio"] = row["time_compressed"] / row["time_raw"]
        rows.append(row)
    return rows


def growth_exponent(rows: Sequence[dict], key: str) -> float:
    """Least-squares slope of log(time) against log(P)."""
    pts = [(math.log(r["P"]), math.log(r[key])) for r in rows if r[key]]
    if len(pts) < 2:
        raise PreconditionError("need at least two timed rows")
    x, t = np.array(pts).T
    return float(np.polyfit(x, t, 1)[0])

