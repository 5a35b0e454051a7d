"""Nearest-neighbour (Kraskov, algorithm 1) mutual information estimation.

For each sample the distance to its k-th neighbour in the joint space is
taken under the max-norm (Chebyshev inside the feature block, absolute
difference for the target); marginal neighbours strictly closer than that
distance are counted in each block. Results are in nats.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import DegenerateSampleWarning, DomainError, PreconditionError

_EULER_GAMMA = 0.57721566490153286061
# Bernoulli-number coefficients B_2k / (2k) of the asymptotic series
_ASYMPTOTIC = (1 / 12, -1 / 120, 1 / 252, -1 / 240, 1 / 132, -691 / 32760)

_BRUTE_CHUNK = 256


def digamma(v):
    """Digamma function for positive arguments (scalar or array).

    Shifts the argument upward with ``psi(v) = psi(v + 1) - 1/v`` until it
    reaches 6, then applies the asymptotic expansion.
    """
    x = np.asarray(v, dtype=float)
    if np.any(~(x > 0)):
        raise DomainError("digamma is only defined here for v > 0")
    x = x.copy()
    acc = np.zeros_like(x)
    low = x < 6.0
    while np.any(low):
        acc[low] -= 1.0 / x[low]
        x[low] += 1.0
        low = x < 6.0
    inv2 = 1.0 / (x * x)
    series = np.zeros_like(x)
    for c in reversed(_ASYMPTOTIC):
        series = (series + c) * inv2
    out = acc + np.log(x) - 0.5 / x - series
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class MiEstimatorConfig:
    k: int = 6
    jitter_scale: float = 1e-10
    seed: int = 0
    method: str = "auto"  # "brute", "kdtree" or "auto"

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise PreconditionError(f"k must be a positive integer, got {self.k}")
        if self.method not in ("auto", "brute", "kdtree"):
            raise PreconditionError(f"unknown neighbour search {self.method!r}")
        if self.jitter_scale < 0:
            raise PreconditionError("jitter_scale must be non-negative")


@dataclass(frozen=True)
class JointSample:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        y = np.asarray(self.y, dtype=float).ravel()
        if x.ndim != 2 or x.shape[0] != y.size:
            raise PreconditionError(
                f"x has {x.shape[0]} rows but y has {y.size} entries"
            )
        if x.shape[1] == 0:
            raise PreconditionError("feature block is empty")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise PreconditionError("sample contains non-finite values")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def size(self) -> int:
        return self.y.size


def _dejitter(col: np.ndarray, rng: np.random.Generator, scale: float) -> np.ndarray:
    if np.unique(col).size == col.size or scale == 0:
        return col
    amp = col.std()
    if amp == 0:
        amp = max(abs(col[0]), 1.0)
    return col + scale * amp * rng.uniform(-1.0, 1.0, col.size)


def _break_ties(x: np.ndarray, y: np.ndarray, config: MiEstimatorConfig):
    rng = np.random.default_rng(config.seed)
    xs = np.column_stack([_dejitter(x[:, j], rng, config.jitter_scale) for j in range(x.shape[1])])
    return xs, _dejitter(y, rng, config.jitter_scale)


def neighbour_counts_brute(x: np.ndarray, y: np.ndarray, k: int):
    """Marginal counts ``(n_x, n_y)`` by exhaustive pairwise distances."""
    P = y.size
    nx = np.empty(P, dtype=np.int64)
    ny = np.empty(P, dtype=np.int64)
    for lo in range(0, P, _BRUTE_CHUNK):
        hi = min(P, lo + _BRUTE_CHUNK)
        dx = np.abs(x[lo:hi, None, 0] - x[None, :, 0])
        for j in range(1, x.shape[1]):
            np.maximum(dx, np.abs(x[lo:hi, None, j] - x[None, :, j]), out=dx)
        dy = np.abs(y[lo:hi, None] - y[None, :])
        rows = np.arange(hi - lo)
        dx[rows, rows + lo] = np.inf
        dy[rows, rows + lo] = np.inf
        dz = np.maximum(dx, dy)
        eps = np.partition(dz, k - 1, axis=1)[:, k - 1]
        nx[lo:hi] = np.count_nonzero(dx < eps[:, None], axis=1)
        ny[lo:hi] = np.count_nonzero(dy < eps[:, None], axis=1)
    return nx, ny


def neighbour_counts_kdtree(x: np.ndarray, y: np.ndarray, k: int):
    """Same counts as :func:`neighbour_counts_brute`, using k-d trees."""
    z = np.column_stack([x, y])
    dist, _ = cKDTree(z).query(z, k=k + 1, p=np.inf)
    eps = dist[:, k]
    # strict inequality: shrink the closed ball radius by one ulp
    r = np.nextafter(eps, -np.inf)
    nx = cKDTree(x).query_ball_point(x, r, p=np.inf, return_length=True) - 1
    ny = cKDTree(y[:, None]).query_ball_point(y[:, None], r, p=np.inf, return_length=True) - 1
    return np.maximum(nx, 0), np.maximum(ny, 0)


def mutual_information(x, y, config: Optional[MiEstimatorConfig] = None) -> float:
    """Estimate I(x; y) in nats.

    Parameters
    ----------
    x : array (P,) or (P, d)
        Feature block.
    y : array (P,)
        Target.
    config : MiEstimatorConfig, optional
        Neighbour count, tie-breaking jitter and search method.
    """
    config = config or MiEstimatorConfig()
    sample = x if isinstance(x, JointSample) else JointSample(x, y)
    P, k = sample.size, config.k
    if P <= k:
        raise PreconditionError(f"need more than k={k} samples, got {P}")
    if np.ptp(sample.y) == 0:
        warnings.warn("target has zero variance; estimate is degenerate",
                      DegenerateSampleWarning, stacklevel=2)
    xs, ys = _break_ties(sample.x, sample.y, config)

    method = config.method
    if method == "auto":
        method = "kdtree" if P > 400 else "brute"
    if method == "brute":
        nx, ny = neighbour_counts_brute(xs, ys, k)
    else:
        nx, ny = neighbour_counts_kdtree(xs, ys, k)
    terms = digamma(nx + 1.0) + digamma(ny + 1.0)
    return float(digamma(float(k)) + digamma(float(P)) - math.fsum(terms) / P)


def mutual_information_subset(
    features, columns: Sequence[int], y, config: Optional[MiEstimatorConfig] = None
) -> float:
    """MI between the chosen feature columns and ``y``."""
    cols = list(columns)
    if not cols:
        raise PreconditionError("column set is empty")
    features = np.asarray(features, dtype=float)
    if min(cols) < 0 or max(cols) >= features.shape[1]:
        raise PreconditionError(f"columns out of range 0..{features.shape[1] - 1}")
    return mutual_information(features[:, cols], y, config)
