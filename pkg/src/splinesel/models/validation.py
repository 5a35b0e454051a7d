"""Stratified k-fold selection of meta-parameters and the NMSE criterion."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from ..errors import PreconditionError
from ..spectra import kfold_stratified
from .linear import fit_latent
from .rbfn import _fit_from_clusters, kmeans, predict_rbfn

DEFAULT_NEURONS = (2, 3, 5, 8, 12, 20, 30)
DEFAULT_SCALES = (0.5, 1.0, 2.0, 4.0, 8.0)


def nmse(y_true, y_pred, variance: float) -> float:
    """Mean squared error divided by ``variance``."""
    y_true = np.asarray(y_true, dtype=float).ravel()
    y_pred = np.asarray(y_pred, dtype=float).ravel()
    if y_true.size != y_pred.size:
        raise PreconditionError(f"{y_true.size} targets but {y_pred.size} predictions")
    if not variance > 0:
        raise PreconditionError("variance must be positive")
    return float(np.mean((y_true - y_pred) ** 2) / variance)


def union_variance(*parts) -> float:
    """Population variance of the target over the union of the given sets."""
    return float(np.var(np.concatenate([np.ravel(p) for p in parts])))


@dataclass
class CvGrid:
    neuron_counts: Sequence[int] = DEFAULT_NEURONS
    width_scales: Sequence[float] = DEFAULT_SCALES
    folds: int = 3
    seed: int = 0

    def __post_init__(self):
        if not len(self.neuron_counts) or not len(self.width_scales):
            raise PreconditionError("CV grid needs at least one neuron count and one width scale")


@dataclass
class CvResult:
    best: Tuple
    table: List[dict] = field(default_factory=list)

    @property
    def best_mse(self) -> float:
        return min(r["cv_mse"] for r in self.table if np.isfinite(r["cv_mse"]))


def _folds(y, folds, seed):
    y = np.asarray(y, dtype=float).ravel()
    return kfold_stratified(np.arange(y.size), y, folds, seed)


def cv_select_meta(X, y, grid: CvGrid = None, standardize: bool = True) -> CvResult:
    """Choose ``(M, width_scale)`` by stratified k-fold validation MSE.

    Ties go to the smaller ``M``, then the smaller scale. Cells whose ``M``
    exceeds a training fold's size are recorded with ``cv_mse = nan``.
    """
    grid = grid or CvGrid()
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float).ravel()
    if y.size < 3 * max(grid.neuron_counts):
        warnings.warn(f"only {y.size} samples for up to {max(grid.neuron_counts)} neurons",
                      UserWarning, stacklevel=2)
    folds = _folds(y, grid.folds, grid.seed)
    Ms = sorted(set(int(m) for m in grid.neuron_counts))
    scales = sorted(set(float(s) for s in grid.width_scales))
    sse = {(m, s): 0.0 for m in Ms for s in scales}
    feasible = {m: True for m in Ms}

    for f, val in enumerate(folds):
        train = np.setdiff1d(np.arange(y.size), val)
        Xtr, Xva = X[train], X[val]
        mean = scale = None
        if standardize:
            mean = Xtr.mean(0)
            scale = Xtr.std(0)
            scale = np.where(scale > 0, scale, 1.0)
            Xtr = (Xtr - mean) / scale
        for m in Ms:
            if m > train.size:
                feasible[m] = False
                continue
            km = kmeans(Xtr, m, grid.seed)
            for s in scales:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    model = _fit_from_clusters(Xtr, y[train], km, s, mean, scale)
                sse[(m, s)] += float(np.sum((y[val] - predict_rbfn(model, Xva)) ** 2))

    table = []
    for m in Ms:
        for s in scales:
            mse = sse[(m, s)] / y.size if feasible[m] else float("nan")
            table.append({"neurons": m, "width_scale": s, "cv_mse": mse})
    finite = [r for r in table if np.isfinite(r["cv_mse"])]
    if not finite:
        raise PreconditionError("no grid cell is feasible for this training set size")
    best = min(finite, key=lambda r: (r["cv_mse"], r["neurons"], r["width_scale"]))
    return CvResult((best["neurons"], best["width_scale"]), table)


def cv_select_components(X, y, kind: str, max_components: int, folds: int = 3,
                         seed: int = 0) -> CvResult:
    """Choose the PCR/PLSR component count by stratified k-fold validation MSE."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    splits = _folds(y, folds, seed)
    smallest = min(y.size - v.size for v in splits)
    upper = min(max_components, smallest - 1, X.shape[1])
    if upper < 1:
        raise PreconditionError("training folds are too small for any component")
    sse = np.zeros(upper)
    for val in splits:
        train = np.setdiff1d(np.arange(y.size), val)
        for a in range(1, upper + 1):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                model = fit_latent(X[train], y[train], kind, a)
            sse[a - 1] += float(np.sum((y[val] - model.predict(X[val])) ** 2))
    table = [{"components": a, "cv_mse": sse[a - 1] / y.size} for a in range(1, upper + 1)]
    best = min(table, key=lambda r: (r["cv_mse"], r["components"]))
    return CvResult((best["components"],), table)
