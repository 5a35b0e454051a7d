"""Spectra container, CSV ingestion and distribution-preserving splits."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .errors import FormatError, PreconditionError, ValidationError

LAYOUTS = ("target_first_column", "no_target")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SpectraSet:
    """P spectra sampled on N shared, strictly increasing wavelengths.

    Arrays are copied and made read-only on construction.
    """

    wavelengths: np.ndarray
    responses: np.ndarray
    target: Optional[np.ndarray] = None

    def __post_init__(self):
        w = np.asarray(self.wavelengths, dtype=float)
        x = np.asarray(self.responses, dtype=float)
        if w.ndim != 1:
            raise ValidationError("wavelengths must be one-dimensional")
        if w.size < 2:
            raise ValidationError("at least two wavelengths are required")
        if x.ndim == 1 and x.size == 0:
            x = x.reshape(0, w.size)
        if x.ndim != 2 or x.shape[1] != w.size:
            raise ValidationError(
                f"responses must have shape (P, {w.size}), got {x.shape}"
            )
        if not np.all(np.isfinite(w)):
            raise ValidationError("wavelengths contain non-finite values")
        if np.any(np.diff(w) <= 0):
            j = int(np.argmax(np.diff(w) <= 0))
            raise ValidationError(
                f"wavelengths must be strictly increasing (column {j + 1}: "
                f"{w[j]} then {w[j + 1]})"
            )
        if not np.all(np.isfinite(x)):
            raise ValidationError("responses contain non-finite values")
        object.__setattr__(self, "wavelengths", _frozen(w))
        object.__setattr__(self, "responses", _frozen(x))
        if self.target is not None:
            y = np.asarray(self.target, dtype=float).ravel()
            if y.size != x.shape[0]:
                raise ValidationError(
                    f"target has {y.size} entries but there are {x.shape[0]} spectra"
                )
            if not np.all(np.isfinite(y)):
                raise ValidationError("target contains non-finite values")
            object.__setattr__(self, "target", _frozen(y))

    @property
    def n_spectra(self) -> int:
        return self.responses.shape[0]

    @property
    def n_wavelengths(self) -> int:
        return self.wavelengths.size

    @property
    def has_target(self) -> bool:
        return self.target is not None

    def subset(self, indices) -> "SpectraSet":
        idx = np.asarray(indices, dtype=int)
        y = None if self.target is None else self.target[idx]
        return SpectraSet(self.wavelengths, self.responses[idx], y)


@dataclass(frozen=True)
class SplitAssignment:
    train_indices: np.ndarray
    test_indices: np.ndarray
    seed: Optional[int] = None

    def __post_init__(self):
        tr = np.sort(np.asarray(self.train_indices, dtype=int))
        te = np.sort(np.asarray(self.test_indices, dtype=int))
        if np.intersect1d(tr, te).size:
            raise ValidationError("train and test indices overlap")
        object.__setattr__(self, "train_indices", tr)
        object.__setattr__(self, "test_indices", te)

    def check_covers(self, n: int) -> None:
        both = np.concatenate([self.train_indices, self.test_indices])
        if both.size != n or not np.array_equal(np.sort(both), np.arange(n)):
            raise ValidationError(f"split does not cover 0..{n - 1} exactly")


def load_spectra(path, layout: str = "target_first_column") -> SpectraSet:
    """Read a comma-separated spectra file.

    With ``layout="target_first_column"`` the header is ``target,w1,...,wN``
    and each row ``y,x1,...,xN``; with ``"no_target"`` the target column is
    absent.
    """
    if layout not in LAYOUTS:
        raise PreconditionError(f"unknown layout {layout!r}; expected one of {LAYOUTS}")
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise FormatError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    if layout == "target_first_column":
        if len(header) < 3:
            raise FormatError(f"{path}: header needs a target column and >= 2 wavelengths")
        header = header[1:]
    try:
        wavelengths = np.array([float(h) for h in header])
    except ValueError as exc:
        raise FormatError(f"{path}: wavelength header is not numeric ({exc})") from None

    width = len(header) + (1 if layout == "target_first_column" else 0)
    values = np.empty((len(body), width))
    for i, row in enumerate(body):
        if len(row) != width:
            raise FormatError(
                f"{path}: row {i + 2} has {len(row)} fields, expected {width}"
            )
        try:
            values[i] = [float(c) for c in row]
        except ValueError as exc:
            raise FormatError(f"{path}: row {i + 2}: {exc}") from None

    if layout == "target_first_column":
        return SpectraSet(wavelengths, values[:, 1:], values[:, 0])
    return SpectraSet(wavelengths, values)


def save_spectra(spectra: SpectraSet, path, header=None) -> None:
    """Write ``spectra`` in the layout matching whether a target is present."""
    header = spectra.wavelengths if header is None else header
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        cols = [repr(float(h)) for h in header]
        if spectra.has_target:
            w.writerow(["target"] + cols)
            for y, row in zip(spectra.target, spectra.responses):
                w.writerow([repr(float(y))] + [repr(float(v)) for v in row])
        else:
            w.writerow(cols)
            for row in spectra.responses:
                w.writerow([repr(float(v)) for v in row])


def _sorted_order(target: np.ndarray) -> np.ndarray:
    return np.argsort(target, kind="stable")


def stratified_split(spectra: SpectraSet, test_fraction: float, seed: int = 0) -> SplitAssignment:
    """Split into train/test while roughly preserving the target distribution.

    Samples are sorted by target and cut into consecutive blocks of
    ``ceil(1 / test_fraction)``; each block contributes a number of test
    samples proportional to its size (largest-remainder rounding so the
    total is ``round(test_fraction * P)``), drawn at random inside the block.
    """
    if not spectra.has_target:
        raise PreconditionError("stratified_split requires a target")
    if not 0.0 < test_fraction < 1.0:
        raise PreconditionError("test_fraction must lie in (0, 1)")
    n = spectra.n_spectra
    if n < 4:
        raise PreconditionError("stratified_split requires at least 4 spectra")
    n_test = int(math.floor(test_fraction * n + 0.5))
    if not 1 <= n_test <= n - 1:
        raise PreconditionError(f"test_fraction={test_fraction} leaves an empty side for P={n}")

    rng = np.random.default_rng(seed)
    order = _sorted_order(spectra.target)
    block = max(1, math.ceil(1.0 / test_fraction - 1e-9))
    blocks = [order[i:i + block] for i in range(0, n, block)]

    quota = np.array([len(b) * n_test / n for b in blocks])
    counts = np.floor(quota).astype(int)
    missing = n_test - counts.sum()
    if missing > 0:
        frac = quota - counts
        # random tie-breaking among equal remainders
        tie = rng.permutation(len(blocks))
        ranked = sorted(range(len(blocks)), key=lambda i: (-frac[i], tie[i]))
        for i in ranked[:missing]:
            counts[i] += 1

    test = [rng.choice(b, size=c, replace=False) for b, c in zip(blocks, counts) if c]
    test = np.concatenate(test) if test else np.empty(0, dtype=int)
    train = np.setdiff1d(np.arange(n), test)
    return SplitAssignment(train, test, seed)


def kfold_stratified(indices, target, k: int = 3, seed: int = 0) -> List[np.ndarray]:
    """Partition ``indices`` into ``k`` folds representative of the target.

    ``target`` is indexed by the entries of ``indices``. Indices are sorted by
    target and dealt out block by block: each block of ``k`` consecutive
    samples sends one member to every fold in random order.
    """
    idx = np.asarray(indices, dtype=int)
    if k < 2:
        raise PreconditionError("k must be at least 2")
    if idx.size < k:
        raise PreconditionError(f"cannot build {k} folds from {idx.size} samples")
    y = np.asarray(target, dtype=float)[idx]
    rng = np.random.default_rng(seed)
    order = idx[_sorted_order(y)]

    labels = np.empty(idx.size, dtype=int)
    for start in range(0, idx.size, k):
        size = min(k, idx.size - start)
        labels[start:start + size] = rng.permutation(k)[:size]
    return [np.sort(order[labels == f]) for f in range(k)]


@dataclass
class Standardizer:
    """Per-variable centering and scaling with statistics from a fit set."""

    mean: np.ndarray = field(default=None)
    scale: np.ndarray = field(default=None)

    @classmethod
    def fit(cls, x) -> "Standardizer":
        x = np.asarray(x, dtype=float)
        mean = x.mean(axis=0)
        scale = x.std(axis=0)
        scale = np.where(scale > 0, scale, 1.0)
        return cls(mean, scale)

    def transform(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.mean) / self.scale


def standardize(spectra: SpectraSet, train_indices: Sequence[int]) -> SpectraSet:
    """Zero-mean, unit-variance columns using training-set statistics only."""
    st = Standardizer.fit(spectra.responses[np.asarray(train_indices, dtype=int)])
    return SpectraSet(spectra.wavelengths, st.transform(spectra.responses), spectra.target)
