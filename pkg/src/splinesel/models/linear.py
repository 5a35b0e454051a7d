"""Linear regression on standardized inputs, PCR and PLS regression."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from ..errors import ConditioningWarning, PreconditionError


@dataclass
class LinearModel:
    """``y = intercept + sum(coefficients * (x[columns] - input_means) / input_stds)``.

    Zero-variance input columns are dropped at fit time; ``columns`` lists the
    kept ones out of ``n_inputs``.
    """

    coefficients: np.ndarray
    intercept: float
    input_means: np.ndarray
    input_stds: np.ndarray
    columns: np.ndarray
    n_inputs: int
    rank_deficient: bool = False

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None] if self.n_inputs == 1 else X[None, :]
        if X.shape[1] != self.n_inputs:
            raise PreconditionError(f"model expects {self.n_inputs} inputs, got {X.shape[1]}")
        Z = (X[:, self.columns] - self.input_means) / self.input_stds
        return Z @ self.coefficients + self.intercept

    def full_coefficients(self) -> np.ndarray:
        """Standardized-space coefficients for every input (0 where dropped)."""
        out = np.zeros(self.n_inputs)
        out[self.columns] = self.coefficients
        return out

    def raw_coefficients(self) -> Tuple[np.ndarray, float]:
        """Slopes and intercept in the original input units."""
        slopes = np.zeros(self.n_inputs)
        slopes[self.columns] = self.coefficients / self.input_stds
        return slopes, float(self.intercept - np.sum(slopes[self.columns] * self.input_means))


def _standardize(X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    mean = X.mean(0)
    std = X.std(0)
    keep = std > 1e-12 * np.maximum(np.abs(mean), np.finfo(float).tiny)
    cols = np.flatnonzero(keep)
    Z = (X[:, cols] - mean[cols]) / std[cols]
    return X, Z, cols, mean[cols], std[cols]


def fit_linear(X, y) -> LinearModel:
    """Ordinary least squares on standardized inputs.

    A rank-deficient design gets the minimum-norm solution and
    ``rank_deficient=True``.
    """
    X, Z, cols, mean, std = _standardize(X)
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] != y.size:
        raise PreconditionError("X and y have different numbers of samples")
    if X.shape[0] <= cols.size:
        raise PreconditionError(
            f"need more samples ({X.shape[0]}) than usable inputs ({cols.size})"
        )
    ybar = y.mean()
    coef, _, rank, _ = np.linalg.lstsq(Z, y - ybar, rcond=None)
    return LinearModel(coef, float(ybar), mean, std, cols, X.shape[1], bool(rank < cols.size))


@dataclass
class LatentModel:
    kind: str  # "pcr" or "plsr"
    n_components: int
    weights: np.ndarray  # q_kept x n_components projection directions
    linear: LinearModel

    def predict(self, X) -> np.ndarray:
        return self.linear.predict(X)

    def as_linear(self) -> LinearModel:
        return self.linear


def _pcr(Z, yc, a):
    _, s, Vt = np.linalg.svd(Z, full_matrices=False)
    V = Vt[:a].T
    T = Z @ V
    b = np.linalg.lstsq(T, yc, rcond=None)[0]
    return V @ b, V


def _pls1(Z, yc, a):
    E = Z.copy()
    f = yc.copy()
    W, L, q = [], [], []
    for _ in range(a):
        w = E.T @ f
        norm = np.linalg.norm(w)
        if norm <= 1e-12 * max(np.linalg.norm(Z.T @ yc), np.finfo(float).tiny):
            break
        w /= norm
        t = E @ w
        tt = t @ t
        p = E.T @ t / tt
        qa = f @ t / tt
        E -= np.outer(t, p)
        f -= qa * t
        W.append(w)
        L.append(p)
        q.append(qa)
    W = np.array(W).T
    L = np.array(L).T
    beta = W @ np.linalg.solve(L.T @ W, np.array(q))
    return beta, W


def fit_latent(X, y, kind: str, n_components: int) -> LatentModel:
    """PCR or PLS1 regression with ``n_components`` latent variables.

    Inputs are standardized and the target centered. PCR regresses on the
    leading principal components; PLSR extracts one component at a time
    and deflates both blocks. Either way the result is also expressed as
    an equivalent :class:`LinearModel`.
    """
    if kind not in ("pcr", "plsr"):
        raise PreconditionError(f"unknown latent model kind {kind!r}")
    X, Z, cols, mean, std = _standardize(X)
    y = np.asarray(y, dtype=float).ravel()
    P, q = Z.shape
    if X.shape[0] != y.size:
        raise PreconditionError("X and y have different numbers of samples")
    upper = min(P - 1, q)
    if not 1 <= n_components <= upper:
        raise PreconditionError(f"n_components must lie in [1, {upper}], got {n_components}")
    rank = int(np.linalg.matrix_rank(Z))
    a = n_components
    if a > rank:
        warnings.warn(f"{a} components requested but the inputs have rank {rank}",
                      ConditioningWarning, stacklevel=2)
        a = rank
    ybar = y.mean()
    yc = y - ybar
    if kind == "pcr":
        beta, W = _pcr(Z, yc, a)
    else:
        beta, W = _pls1(Z, yc, a)
    lin = LinearModel(beta, float(ybar), mean, std, cols, X.shape[1], a < q)
    return LatentModel(kind, W.shape[1], W, lin)


def important_wavelengths_linear(model, wavelengths, epsilon: float = 0.01) -> List[Tuple[float, float]]:
    """Wavelength intervals whose standardized coefficient exceeds ``epsilon * max``.

    Consecutive passing grid points are merged into one interval.
    """
    if not 0.0 < epsilon < 1.0:
        raise PreconditionError(f"epsilon must lie in (0, 1), got {epsilon}")
    lin = model.as_linear() if isinstance(model, LatentModel) else model
    alpha = np.abs(lin.full_coefficients())
    w = np.asarray(wavelengths, dtype=float)
    if w.size != alpha.size:
        raise PreconditionError(f"{w.size} wavelengths for {alpha.size} coefficients")
    mask = alpha > epsilon * alpha.max()
    out = []
    j = 0
    while j < mask.size:
        if mask[j]:
            start = j
            while j + 1 < mask.size and mask[j + 1]:
                j += 1
            out.append((float(w[start]), float(w[j])))
        j += 1
    return out
