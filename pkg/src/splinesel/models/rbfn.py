"""Radial basis function network with vector-quantized centers."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from ..errors import ConditioningWarning, PreconditionError

RIDGE = 1e-8
MAX_LLOYD_ITER = 100
_DEGENERATE_KERNEL = 1e-12


@dataclass
class KMeansResult:
    centers: np.ndarray
    assignments: np.ndarray
    variances: np.ndarray
    distortions: List[float] = field(default_factory=list)

    @property
    def n_iter(self) -> int:
        return len(self.distortions)


def _sq_dist(X, C):
    d2 = (X * X).sum(1)[:, None] - 2.0 * X @ C.T + (C * C).sum(1)[None, :]
    return np.maximum(d2, 0.0)


def _kmeans_pp(X, M, rng):
    P = X.shape[0]
    chosen = [int(rng.integers(P))]
    d2 = _sq_dist(X, X[chosen])[:, 0]
    for _ in range(1, M):
        total = d2.sum()
        if total > 0:
            nxt = int(rng.choice(P, p=d2 / total))
        else:
            free = np.setdiff1d(np.arange(P), chosen)
            nxt = int(rng.choice(free))
        chosen.append(nxt)
        d2 = np.minimum(d2, _sq_dist(X, X[[nxt]])[:, 0])
    return X[chosen].copy()


def kmeans(X, M: int, seed: int = 0, max_iter: int = MAX_LLOYD_ITER) -> KMeansResult:
    """Lloyd iterations from a seeded k-means++ start.

    Stops when assignments stop changing or after ``max_iter`` iterations.
    ``variances`` holds each cluster's mean squared distance to its center,
    floored at ``1e-12`` times the data variance.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    P = X.shape[0]
    if not 1 <= M <= P:
        raise PreconditionError(f"need 1 <= M <= P, got M={M}, P={P}")
    rng = np.random.default_rng(seed)
    centers = _kmeans_pp(X, M, rng)
    assign = None
    distortions = []
    for _ in range(max_iter):
        d2 = _sq_dist(X, centers)
        new = np.argmin(d2, axis=1)
        distortions.append(float(d2[np.arange(P), new].mean()))
        if assign is not None and np.array_equal(new, assign):
            break
        assign = new
        counts = np.bincount(assign, minlength=M)
        for j in np.flatnonzero(counts == 0):
            # reseed an empty cluster on the worst-represented point
            far = int(np.argmax(d2[np.arange(P), assign]))
            centers[j] = X[far]
            assign[far] = j
            d2[far] = 0.0
        counts = np.bincount(assign, minlength=M)
        sums = np.zeros_like(centers)
        np.add.at(sums, assign, X)
        centers = sums / counts[:, None]

    member_d2 = ((X - centers[assign]) ** 2).sum(1)
    counts = np.bincount(assign, minlength=M)
    var = np.bincount(assign, weights=member_d2, minlength=M) / np.maximum(counts, 1)
    data_var = float(((X - X.mean(0)) ** 2).sum(1).mean())
    floor = 1e-12 * (data_var if data_var > 0 else 1.0)
    return KMeansResult(centers, assign, np.maximum(var, floor), distortions)


@dataclass
class RbfnModel:
    centers: np.ndarray
    widths: np.ndarray
    weights: np.ndarray
    bias: float
    width_scale: float
    input_mean: Optional[np.ndarray] = None
    input_scale: Optional[np.ndarray] = None
    degenerate_kernels: bool = False
    ridge_used: bool = False

    @property
    def n_inputs(self) -> int:
        return self.centers.shape[1]

    def predict(self, X) -> np.ndarray:
        return predict_rbfn(self, X)


def _kernels(Z, centers, widths, width_scale):
    d2 = _sq_dist(Z, centers)
    return np.exp(-d2 / (width_scale * widths) ** 2)


def _prepare(model: RbfnModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None] if model.n_inputs == 1 else X[None, :]
    if X.shape[1] != model.n_inputs:
        raise PreconditionError(
            f"model expects {model.n_inputs} inputs, got {X.shape[1]}"
        )
    if model.input_mean is not None:
        X = (X - model.input_mean) / model.input_scale
    return X


def _solve_output_layer(K, y):
    A = np.column_stack([K, np.ones(K.shape[0])])
    coef, _, rank, _ = np.linalg.lstsq(A, y, rcond=None)
    ridge = rank < A.shape[1]
    if ridge:
        Aaug = np.vstack([A, np.sqrt(RIDGE) * np.eye(A.shape[1])])
        yaug = np.concatenate([y, np.zeros(A.shape[1])])
        coef = np.linalg.lstsq(Aaug, yaug, rcond=None)[0]
    return coef[:-1], float(coef[-1]), ridge


def _fit_from_clusters(Z, y, km: KMeansResult, width_scale, mean=None, scale=None) -> RbfnModel:
    widths = np.sqrt(km.variances)
    K = _kernels(Z, km.centers, widths, width_scale)
    degenerate = bool(np.any(K.max(axis=1) < _DEGENERATE_KERNEL))
    weights, bias, ridge = _solve_output_layer(K, y)
    return RbfnModel(km.centers, widths, weights, bias, float(width_scale),
                     mean, scale, degenerate, ridge)


def fit_rbfn(X, y, M: int, width_scale: float = 1.0, seed: int = 0,
             standardize: bool = False) -> RbfnModel:
    """Fit an RBFN with ``M`` Gaussian units.

    Centers come from k-means, each unit's squared width is its cluster's
    variance, and the output weights and bias are the least-squares
    solution of the kernel design (ridge ``1e-8`` if it is rank deficient).
    With ``standardize=True`` inputs are scaled by the training statistics,
    which are stored in the model.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] != y.size:
        raise PreconditionError("X and y have different numbers of samples")
    if width_scale <= 0:
        raise PreconditionError("width_scale must be positive")
    mean = scale = None
    if standardize:
        mean = X.mean(0)
        scale = X.std(0)
        scale = np.where(scale > 0, scale, 1.0)
        X = (X - mean) / scale
    km = kmeans(X, M, seed)
    model = _fit_from_clusters(X, y, km, width_scale, mean, scale)
    if model.degenerate_kernels:
        warnings.warn("some training samples are far from every center",
                      ConditioningWarning, stacklevel=2)
    return model


def predict_rbfn(model: RbfnModel, X) -> np.ndarray:
    """Weighted sum of Gaussian kernels plus bias."""
    Z = _prepare(model, X)
    K = _kernels(Z, model.centers, model.widths, model.width_scale)
    return K @ model.weights + model.bias
