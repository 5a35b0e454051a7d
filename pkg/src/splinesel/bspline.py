"""Uniform-knot B-spline bases and least-squares compression of spectra.

The projection from N spectral samples to n coefficients is computed from a
banded QR factorization of the design matrix. Samples are sorted, so all
rows falling in knot interval ``k`` share the same ``d`` nonzero columns
``k .. k+d-1``; the factorization processes one interval at a time, reducing
the interval's rows together with the ``d-1`` partially accumulated rows
carried from the previous interval (sequential Householder accumulation).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg.lapack import dtbtrs

from .errors import (
    DomainError,
    IllPosedLooError,
    PreconditionError,
    SingularDesignError,
)
from .spectra import SpectraSet, save_spectra

LEVERAGE_GUARD = 1.0 - 1e-10
_RANK_TOL = 1e-10


@dataclass(frozen=True)
class BsplineBasis:
    """Clamped B-spline basis of order ``order`` on ``intervals`` equal knot spans."""

    order: int
    intervals: int
    w_min: float
    w_max: float

    @property
    def n_functions(self) -> int:
        return self.intervals - 1 + self.order

    @property
    def knots(self) -> np.ndarray:
        return np.linspace(self.w_min, self.w_max, self.intervals + 1)

    @property
    def extended_knots(self) -> np.ndarray:
        d = self.order
        t = self.knots
        return np.concatenate([np.full(d - 1, t[0]), t, np.full(d - 1, t[-1])])

    def describe(self) -> dict:
        return {
            "order": self.order,
            "intervals": self.intervals,
            "w_min": self.w_min,
            "w_max": self.w_max,
        }


def build_basis(w_min: float, w_max: float, p: int, d: int) -> BsplineBasis:
    """Basis of ``p - 1 + d`` B-splines of order ``d`` on ``p`` uniform intervals."""
    if int(p) != p or p < 1:
        raise PreconditionError(f"number of intervals must be a positive integer, got {p}")
    if int(d) != d or d < 1:
        raise PreconditionError(f"order must be a positive integer, got {d}")
    if not (np.isfinite(w_min) and np.isfinite(w_max)) or not w_min < w_max:
        raise PreconditionError(f"need finite w_min < w_max, got [{w_min}, {w_max}]")
    return BsplineBasis(int(d), int(p), float(w_min), float(w_max))


def basis_for_size(n: int, d: int, w_min: float, w_max: float) -> BsplineBasis:
    """Basis with ``n`` functions of order ``d``."""
    if n < d:
        raise PreconditionError(f"a basis of order {d} has at least {d} functions, got n={n}")
    return build_basis(w_min, w_max, n - d + 1, d)


def _interval_index(basis: BsplineBasis, w: np.ndarray) -> np.ndarray:
    # half-open [t_k, t_k+1), last interval closed at w_max
    k = np.searchsorted(basis.knots, w, side="right") - 1
    return np.clip(k, 0, basis.intervals - 1)


def basis_band(basis: BsplineBasis, w) -> Tuple[np.ndarray, np.ndarray]:
    """Nonzero basis values at each point.

    Returns ``(starts, values)``: point ``m`` has nonzero functions
    ``starts[m] .. starts[m] + d - 1`` with values ``values[m]``. Values come
    from the Cox-de Boor recursion over the clamped knot vector, arranged as
    the usual triangular table so only the ``d`` active functions are built.
    """
    w = np.atleast_1d(np.asarray(w, dtype=float))
    if np.any(~np.isfinite(w)) or np.any(w < basis.w_min) or np.any(w > basis.w_max):
        bad = w[~((w >= basis.w_min) & (w <= basis.w_max))]
        raise DomainError(
            f"{bad[0]!r} lies outside [{basis.w_min}, {basis.w_max}]"
        )
    d = basis.order
    ext = basis.extended_knots
    k = _interval_index(basis, w)
    span = k + d - 1

    vals = np.zeros((w.size, d))
    vals[:, 0] = 1.0
    left = np.empty((w.size, d))
    right = np.empty((w.size, d))
    for j in range(1, d):
        left[:, j] = w - ext[span + 1 - j]
        right[:, j] = ext[span + j] - w
        saved = np.zeros(w.size)
        for r in range(j):
            temp = vals[:, r] / (right[:, r + 1] + left[:, j - r])
            vals[:, r] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        vals[:, j] = saved
    return k, vals


def evaluate_basis(basis: BsplineBasis, w: float) -> np.ndarray:
    """All ``n`` basis functions at the single point ``w``."""
    starts, vals = basis_band(basis, [w])
    out = np.zeros(basis.n_functions)
    out[starts[0]:starts[0] + basis.order] = vals[0]
    return out


def design_matrix(basis: BsplineBasis, w) -> np.ndarray:
    """Dense ``len(w) x n`` matrix of basis values."""
    starts, vals = basis_band(basis, w)
    B = np.zeros((starts.size, basis.n_functions))
    rows = np.arange(starts.size)[:, None]
    B[rows, starts[:, None] + np.arange(basis.order)] = vals
    return B


class _BandedFactor:
    """Upper-triangular banded factor ``U`` of the design matrix plus ``Q1^T rhs``."""

    def __init__(self, basis: BsplineBasis, wavelengths: np.ndarray, rhs: np.ndarray):
        d, p, n = basis.order, basis.intervals, basis.n_functions
        w = np.asarray(wavelengths, dtype=float)
        if n > w.size:
            raise PreconditionError(
                f"basis has {n} functions but only {w.size} wavelengths are available"
            )
        starts, vals = basis_band(basis, w)
        self.basis = basis
        self.starts = starts
        self.values = vals

        r = rhs.shape[1]
        ab = np.zeros((d, n))  # LAPACK upper band storage, ab[d-1+i-j, j] = U[i, j]
        Z = np.zeros((n, r))
        carry = np.zeros((d - 1, d + r))
        bounds = np.searchsorted(starts, np.arange(p + 1))
        cols = np.arange(d)
        for k in range(p):
            lo, hi = bounds[k], bounds[k + 1]
            block = np.vstack([carry, np.hstack([vals[lo:hi], rhs[lo:hi]])])
            top = np.zeros((d, d + r))
            if block.shape[0]:
                R = np.linalg.qr(block, mode="r")
                m = min(d, R.shape[0])
                top[:m] = R[:m]
            last = k == p - 1
            nrows = d if last else 1
            for i in range(nrows):
                row = k + i
                ab[d - 1 - cols[: d - i], row + cols[: d - i]] = top[i, i:d]
                Z[row] = top[i, d:]
            if not last:
                carry = np.hstack([top[1:d, 1:d], np.zeros((d - 1, 1)), top[1:d, d:]])

        diag = np.abs(ab[d - 1])
        bad = np.flatnonzero(diag <= _RANK_TOL * max(diag.max(), np.finfo(float).tiny))
        if bad.size:
            empty = np.flatnonzero(np.diff(bounds) == 0)
            if empty.size:
                k = int(empty[0])
                t = basis.knots
                where = f"interval {k} [{t[k]:g}, {t[k + 1]:g}] contains no wavelength"
            else:
                where = f"column {int(bad[0])} is not determined by the samples"
            raise SingularDesignError(f"design matrix is rank deficient: {where}")
        self.ab = ab
        self.Z = Z

    def solve(self, rhs: np.ndarray, transpose: bool = False) -> np.ndarray:
        x, info = dtbtrs(self.ab, rhs, uplo="U", trans="T" if transpose else "N")
        if info != 0:
            raise SingularDesignError(f"triangular solve failed (info={info})")
        return x

    def coefficients(self) -> np.ndarray:
        return self.solve(self.Z)

    def leverages(self) -> Tuple[np.ndarray, np.ndarray]:
        """Diagonal ``h`` of the hat matrix ``H = B (B^T B)^-1 B^T`` and ``1 - h``.

        Where ``h > 1/2`` the complement is recovered from the off-diagonal
        part of the hat column, ``g = sum_{j != k} H_jk^2``: idempotence gives
        ``u = u^2 + g`` for ``u = 1 - h``, and the small root avoids the
        cancellation in ``1 - h``.
        """
        d = self.basis.order
        Bt = np.zeros((self.basis.n_functions, self.starts.size))
        cols = np.arange(self.starts.size)
        for j in range(d):
            Bt[self.starts + j, cols] = self.values[:, j]
        W = self.solve(Bt, transpose=True)
        h = np.einsum("ij,ij->j", W, W)
        u = 1.0 - h
        high = np.flatnonzero(h > 0.5)
        if high.size:
            Hcols = self.fitted(self.solve(W[:, high]))
            Hcols[high, np.arange(high.size)] = 0.0
            g = np.einsum("ij,ij->j", Hcols, Hcols)
            u[high] = 2.0 * g / (1.0 + np.sqrt(np.maximum(1.0 - 4.0 * g, 0.0)))
        return h, u

    def fitted(self, coef: np.ndarray) -> np.ndarray:
        d = self.basis.order
        idx = self.starts[:, None] + np.arange(d)
        return np.einsum("mj,mjr->mr", self.values, coef[idx])


@dataclass(frozen=True)
class ProjectionMatrix:
    """``n x N`` linear map from spectral samples to B-spline coefficients."""

    entries: np.ndarray
    basis: BsplineBasis
    wavelengths: np.ndarray

    def __matmul__(self, other):
        return self.entries @ other


def projection_matrix(basis: BsplineBasis, wavelengths) -> ProjectionMatrix:
    """Least-squares projection ``R = (B^T B)^-1 B^T`` for the given sampling."""
    w = np.asarray(wavelengths, dtype=float)
    fac = _BandedFactor(basis, w, np.eye(w.size))
    R = fac.coefficients()
    R.setflags(write=False)
    w = w.copy()
    w.setflags(write=False)
    return ProjectionMatrix(R, basis, w)


@dataclass(frozen=True)
class CompressedSet:
    """Per-spectrum B-spline coefficients (one column per basis function)."""

    coefficients: np.ndarray
    basis: BsplineBasis
    target: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.coefficients.shape[1] != self.basis.n_functions:
            raise PreconditionError("coefficient columns do not match the basis size")

    def as_spectra(self) -> SpectraSet:
        """Coefficients as a SpectraSet whose 'wavelengths' are 1..n."""
        return SpectraSet(
            np.arange(1.0, self.basis.n_functions + 1), self.coefficients, self.target
        )


def compress(R: ProjectionMatrix, spectra: SpectraSet) -> CompressedSet:
    """Replace each spectrum by its B-spline coefficients."""
    if spectra.wavelengths.shape != R.wavelengths.shape or not np.array_equal(
        spectra.wavelengths, R.wavelengths
    ):
        raise PreconditionError("spectra wavelengths differ from the projection's wavelengths")
    coef = spectra.responses @ R.entries.T
    return CompressedSet(coef, R.basis, spectra.target)


def reconstruct(compressed: CompressedSet, wavelengths) -> np.ndarray:
    """Evaluate the spline of every row of coefficients at ``wavelengths``."""
    return compressed.coefficients @ design_matrix(compressed.basis, wavelengths).T


def _loo_errors(basis: BsplineBasis, wavelengths, samples: np.ndarray) -> np.ndarray:
    """LOO error of each column of ``samples`` (N x P) via the leverage identity."""
    w = np.asarray(wavelengths, dtype=float)
    fac = _BandedFactor(basis, w, samples)
    h, u = fac.leverages()
    if np.any(u <= 1.0 - LEVERAGE_GUARD):
        k = int(np.argmin(u))
        raise IllPosedLooError(
            f"leverage {h[k]:.12f} at wavelength {w[k]:g}: removing it leaves "
            f"the {basis.n_functions}-function fit underdetermined"
        )
    resid = samples - fac.fitted(fac.coefficients())
    loo = resid / u[:, None]
    return np.mean(loo**2, axis=0)


def loo_error_spectrum(basis: BsplineBasis, wavelengths, sample) -> float:
    """Mean squared leave-one-out prediction error of one spectrum."""
    s = np.asarray(sample, dtype=float).reshape(-1, 1)
    return float(_loo_errors(basis, wavelengths, s)[0])


def total_loo(basis: BsplineBasis, spectra: SpectraSet) -> float:
    """Sum of the per-spectrum leave-one-out errors."""
    if spectra.n_spectra == 0:
        return 0.0
    errs = _loo_errors(basis, spectra.wavelengths, spectra.responses.T)
    return math.fsum(errs)


@dataclass(frozen=True)
class BasisSelection:
    n_functions: int
    order: int
    loo_curve: List[Tuple[int, int, float]]

    @property
    def loo(self) -> float:
        for n, d, v in self.loo_curve:
            if n == self.n_functions and d == self.order:
                return v
        raise KeyError((self.n_functions, self.order))

    def basis(self, w_min: float, w_max: float) -> BsplineBasis:
        return basis_for_size(self.n_functions, self.order, w_min, w_max)


def default_n_range(n_wavelengths: int) -> Tuple[int, int]:
    """The ``[N/20, N/2]`` search interval."""
    return max(2, n_wavelengths // 20), max(2, n_wavelengths // 2)


def select_basis_size(
    spectra: SpectraSet,
    n_range: Optional[Tuple[int, int]] = None,
    orders: Iterable[int] = (4,),
    strategy: str = "exhaustive",
    probes: int = 10,
) -> BasisSelection:
    """Pick ``(n, d)`` minimizing the total leave-one-out error.

    ``n_range`` is inclusive. With ``strategy="coarse_to_fine"`` each order
    is first probed at ``probes`` equispaced sizes, then every size between
    the neighbours of the best probe is evaluated. Totals within ``1e-12`` of
    the spectra's mean energy of the minimum count as ties, resolved toward
    smaller ``n`` and then smaller ``d``.
    """
    orders = sorted({int(d) for d in orders})
    if not orders:
        raise PreconditionError("no candidate orders given")
    N = spectra.n_wavelengths
    lo, hi = default_n_range(N) if n_range is None else (int(n_range[0]), int(n_range[1]))
    if lo > hi:
        raise PreconditionError(f"empty size range [{lo}, {hi}]")
    if lo < max(orders) + 1 or hi > N:
        raise PreconditionError(
            f"size range [{lo}, {hi}] must lie within [{max(orders) + 1}, {N}]"
        )
    if strategy not in ("exhaustive", "coarse_to_fine"):
        raise PreconditionError(f"unknown strategy {strategy!r}")

    w = spectra.wavelengths
    cache = {}

    def loo(n, d):
        if (n, d) not in cache:
            cache[(n, d)] = total_loo(basis_for_size(n, d, w[0], w[-1]), spectra)
        return cache[(n, d)]

    for d in orders:
        if strategy == "exhaustive":
            for n in range(lo, hi + 1):
                loo(n, d)
            continue
        grid = sorted(set(np.round(np.linspace(lo, hi, probes)).astype(int).tolist()))
        vals = [loo(n, d) for n in grid]
        best = int(np.argmin(vals))
        a = grid[max(best - 1, 0)]
        b = grid[min(best + 1, len(grid) - 1)]
        for n in range(a, b + 1):
            loo(n, d)

    curve = sorted((n, d, v) for (n, d), v in cache.items())
    energy = math.fsum(float(np.mean(s**2)) for s in spectra.responses)
    vmin = min(v for _, _, v in curve)
    tol = 1e-12 * energy
    n_best, d_best, _ = min((c for c in curve if c[2] <= vmin + tol), key=lambda c: (c[0], c[1]))
    return BasisSelection(n_best, d_best, curve)


@dataclass(frozen=True)
class WavelengthRange:
    variable_index: int
    lower: float
    upper: float
    epsilon: float
    lower_index: int
    upper_index: int

    def as_tuple(self) -> Tuple[float, float]:
        return (self.lower, self.upper)


def wavelength_range(R: ProjectionMatrix, i: int, epsilon: float = 0.01) -> WavelengthRange:
    """Wavelength interval on which row ``i`` (0-based) of ``R`` is significant.

    The lower bound is the first sample whose weight reaches ``epsilon``
    times the row's largest absolute weight; the upper bound is the last.
    """
    if not 0.0 < epsilon < 1.0:
        raise PreconditionError(f"epsilon must lie in (0, 1), got {epsilon}")
    n = R.entries.shape[0]
    if not 0 <= i < n:
        raise PreconditionError(f"variable index {i} outside 0..{n - 1}")
    a = np.abs(R.entries[i])
    significant = np.flatnonzero(a >= epsilon * a.max())
    lo, hi = int(significant[0]), int(significant[-1])
    w = R.wavelengths
    return WavelengthRange(i, float(w[lo]), float(w[hi]), float(epsilon), lo, hi)


def merge_ranges(ranges: Iterable) -> List[Tuple[float, float]]:
    """Union of closed intervals as sorted, maximal disjoint intervals."""
    spans = sorted(
        r.as_tuple() if isinstance(r, WavelengthRange) else (float(r[0]), float(r[1]))
        for r in ranges
    )
    merged: List[List[float]] = []
    for lo, hi in spans:
        if merged and lo <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    return [(lo, hi) for lo, hi in merged]


def projection_to_csv(R: ProjectionMatrix, path, rows: Optional[Sequence[int]] = None) -> None:
    """One line per wavelength, one column per requested row of ``R``."""
    rows = range(R.entries.shape[0]) if rows is None else list(rows)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(["wavelength"] + [f"R{i}" for i in rows])
        for j, wj in enumerate(R.wavelengths):
            out.writerow([repr(float(wj))] + [repr(float(R.entries[i, j])) for i in rows])


def compressed_to_csv(compressed: CompressedSet, path) -> None:
    save_spectra(compressed.as_spectra(), path)
