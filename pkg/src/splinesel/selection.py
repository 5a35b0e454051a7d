"""Greedy forward-backward search for the feature subset of highest MI."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Tuple

import numpy as np

from .errors import PreconditionError
from .mi import MiEstimatorConfig, mutual_information

Subset = Tuple[int, ...]


@dataclass(frozen=True)
class SelectionStep:
    phase: str  # "forward" or "backward"
    candidate: int
    subset: Subset
    mi: float


@dataclass
class SelectionTrace:
    steps: List[SelectionStep] = field(default_factory=list)
    final_subset: Subset = ()
    final_mi: float = 0.0
    forward_evaluations: int = 0
    backward_evaluations: int = 0

    @property
    def n_evaluations(self) -> int:
        return self.forward_evaluations + self.backward_evaluations

    def to_dict(self) -> dict:
        return {
            "steps": [
                {"phase": s.phase, "candidate": s.candidate,
                 "subset": list(s.subset), "mi": s.mi}
                for s in self.steps
            ],
            "final_subset": list(self.final_subset),
            "final_mi": self.final_mi,
            "forward_evaluations": self.forward_evaluations,
            "backward_evaluations": self.backward_evaluations,
        }

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            out = csv.writer(fh)
            out.writerow(["step", "phase", "candidate", "subset", "mi"])
            for i, s in enumerate(self.steps, 1):
                out.writerow([i, s.phase, s.candidate,
                              " ".join(map(str, s.subset)), repr(s.mi)])


class SubsetScorer:
    """Scores subsets by MI with the target, memoized on the sorted index tuple.

    ``score`` replaces the estimator with an arbitrary set function, which is
    how the search is exercised on synthetic objectives.
    """

    def __init__(self, features, y, config: Optional[MiEstimatorConfig] = None,
                 score: Optional[Callable[[Subset], float]] = None):
        self.features = np.asarray(features, dtype=float)
        if self.features.ndim != 2:
            raise PreconditionError("features must be a (P, n) matrix")
        self.y = None if y is None else np.asarray(y, dtype=float)
        self.config = config or MiEstimatorConfig()
        self._score = score
        self._cache: Dict[Subset, float] = {}
        self.estimates = 0

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def __call__(self, subset: Iterable[int]) -> float:
        key = tuple(sorted(subset))
        if not key:
            return 0.0
        if key not in self._cache:
            self.estimates += 1
            if self._score is not None:
                self._cache[key] = float(self._score(key))
            else:
                self._cache[key] = mutual_information(
                    self.features[:, list(key)], self.y, self.config
                )
        return self._cache[key]


def _scorer(features, y, mi_config, score) -> SubsetScorer:
    if isinstance(features, SubsetScorer):
        return features
    s = SubsetScorer(features, y, mi_config, score)
    if s.n_features < 1:
        raise PreconditionError("no features to select from")
    if score is None and s.y.size <= s.config.k:
        raise PreconditionError(f"need more than k={s.config.k} samples, got {s.y.size}")
    return s


def _forward(scorer: SubsetScorer, trace: SelectionTrace, max_size, min_delta) -> None:
    n = scorer.n_features
    current: List[int] = []
    current_mi = 0.0  # MI of the empty set
    while len(current) < n and (max_size is None or len(current) < max_size):
        best, best_mi = -1, -np.inf
        for f in range(n):
            if f in current:
                continue
            m = scorer(current + [f])
            trace.forward_evaluations += 1
            if m > best_mi:
                best, best_mi = f, m
        if not best_mi > current_mi + min_delta:
            break
        current.append(best)
        current_mi = best_mi
        trace.steps.append(SelectionStep("forward", best, tuple(sorted(current)), best_mi))
    trace.final_subset = tuple(sorted(current))
    trace.final_mi = current_mi


def _backward(scorer: SubsetScorer, trace: SelectionTrace, start, min_delta) -> None:
    current = sorted(set(int(f) for f in start))
    current_mi = scorer(current)
    while len(current) > 1:
        best, best_mi = -1, -np.inf
        for f in current:
            m = scorer([g for g in current if g != f])
            trace.backward_evaluations += 1
            if m > best_mi:
                best, best_mi = f, m
        if not best_mi > current_mi + min_delta:
            break
        current.remove(best)
        current_mi = best_mi
        trace.steps.append(SelectionStep("backward", best, tuple(current), best_mi))
    trace.final_subset = tuple(current)
    trace.final_mi = current_mi


def forward_phase(features, y=None, mi_config: Optional[MiEstimatorConfig] = None,
                  max_size: Optional[int] = None, min_delta: float = 0.0,
                  score=None) -> SelectionTrace:
    """Add features one at a time while the subset MI strictly increases.

    Each iteration scores every unselected feature joined to the current
    subset and keeps the best (lowest index on ties) if it beats the current
    MI by more than ``min_delta``.
    """
    scorer = _scorer(features, y, mi_config, score)
    if max_size is not None and max_size < 1:
        raise PreconditionError("max_size must be at least 1")
    trace = SelectionTrace()
    _forward(scorer, trace, max_size, min_delta)
    return trace


def backward_phase(features, y=None, start_subset=(), mi_config=None,
                   min_delta: float = 0.0, score=None) -> SelectionTrace:
    """Drop features one at a time while removal strictly increases the MI.

    Never removes the last remaining feature.
    """
    if len(start_subset) == 0:
        raise PreconditionError("backward phase needs a non-empty start subset")
    scorer = _scorer(features, y, mi_config, score)
    if min(start_subset) < 0 or max(start_subset) >= scorer.n_features:
        raise PreconditionError("start subset indexes a missing feature")
    trace = SelectionTrace()
    _backward(scorer, trace, start_subset, min_delta)
    return trace


def forward_backward(features, y=None, mi_config=None, max_size: Optional[int] = None,
                     min_delta: float = 0.0, score=None) -> SelectionTrace:
    """Forward phase followed by a backward phase on its result."""
    scorer = _scorer(features, y, mi_config, score)
    trace = forward_phase(scorer, max_size=max_size, min_delta=min_delta)
    if trace.final_subset:
        _backward(scorer, trace, trace.final_subset, min_delta)
    return trace
