"""Synthetic smooth spectra with known informative bands."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .spectra import SpectraSet


@dataclass(frozen=True)
class SyntheticData:
    spectra: SpectraSet
    band_amplitudes: np.ndarray  # P x n_bands
    bands: List[Tuple[float, float]]  # (center, width) of each informative band

    def band_intervals(self, n_widths: float = 2.0) -> List[Tuple[float, float]]:
        return [(c - n_widths * s, c + n_widths * s) for c, s in self.bands]


def _gauss(w, c, s):
    return np.exp(-0.5 * ((w - c) / s) ** 2)


def make_spectra(
    n_spectra: int,
    n_wavelengths: int,
    target: str = "nonlinear",
    noise: float = 0.05,
    seed: int = 0,
    w_min: float = 400.0,
    w_max: float = 1000.0,
    spectral_noise: float = 1e-3,
) -> SyntheticData:
    """Smooth spectra whose target depends on two localized absorption bands.

    Each spectrum is a random baseline plus five nuisance peaks plus two
    informative bands with amplitudes ``a1, a2 ~ U(0, 1)``. The target is
    ``cos(2 pi a1) + cos(2 pi a2)`` (``"nonlinear"``, both bands
    equally informative and neither linearly so) or ``a1 + 2 a2``
    (``"linear"``), plus Gaussian noise of standard deviation ``noise``.
    """
    rng = np.random.default_rng(seed)
    w = np.linspace(w_min, w_max, n_wavelengths)
    span = w_max - w_min
    bands = [(w_min + 0.25 * span, 0.02 * span), (w_min + 0.7 * span, 0.02 * span)]
    nuisance = [(w_min + f * span, 0.04 * span) for f in (0.05, 0.45, 0.55, 0.88, 0.97)]

    P = n_spectra
    amps = rng.uniform(0.0, 1.0, (P, len(bands)))
    X = 0.5 + 0.1 * rng.normal(size=(P, 1)) + 0.05 * rng.normal(size=(P, 1)) * (w - w.mean()) / span
    for c, s in nuisance:
        X = X + rng.uniform(0.2, 1.0, (P, 1)) * _gauss(w, c, s)
    for j, (c, s) in enumerate(bands):
        X = X + amps[:, [j]] * _gauss(w, c, s)
    X = X + spectral_noise * rng.normal(size=X.shape)

    a1, a2 = amps[:, 0], amps[:, 1]
    if target == "nonlinear":
        y = np.cos(2 * np.pi * a1) + np.cos(2 * np.pi * a2)
    elif target == "linear":
        y = a1 + 2.0 * a2
    else:
        raise ValueError(f"unknown target kind {target!r}")
    y = y + noise * rng.normal(size=P)
    return SyntheticData(SpectraSet(w, X, y), amps, bands)
