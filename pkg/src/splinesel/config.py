"""Flat ``key = value`` configuration files for the pipeline."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Tuple

from .errors import ConfigError
from .models.validation import DEFAULT_NEURONS, DEFAULT_SCALES

METHODS = ("bspline_mi_rbfn", "bspline_mi_lr", "mi_rbfn", "pcr", "plsr")
METHOD_LABELS = {
    "pcr": "PCR",
    "plsr": "PLSR",
    "mi_rbfn": "MI + RBFN",
    "bspline_mi_rbfn": "B-Splines + MI + RBFN",
    "bspline_mi_lr": "B-Splines + MI + LR",
}


def parse_key_values(text: str, source: str = "<config>") -> Dict[str, str]:
    """``key = value`` per line; ``#`` starts a comment; blank lines ignored."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _list(value: str, cast):
    items = [v.strip() for v in value.split(",") if v.strip()]
    return tuple(cast(v) for v in items)


def _bool(value: str) -> bool:
    v = value.lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _optional_int(value: str) -> Optional[int]:
    return None if value.lower() in ("", "none") else int(value)


@dataclass
class PipelineConfig:
    data: Optional[str] = None
    layout: str = "target_first_column"
    test_fraction: float = 0.25
    split_file: Optional[str] = None
    seed: int = 0
    orders: Tuple[int, ...] = (4,)
    n_min: Optional[int] = None
    n_max: Optional[int] = None
    basis_strategy: str = "coarse_to_fine"
    epsilon: float = 0.01
    mi_k: int = 6
    mi_seed: int = 0
    mi_jitter: float = 1e-10
    mi_standardize: bool = True
    max_size: Optional[int] = None
    min_delta: float = 0.0
    methods: Tuple[str, ...] = METHODS
    rbfn_neurons: Tuple[int, ...] = DEFAULT_NEURONS
    rbfn_scales: Tuple[float, ...] = DEFAULT_SCALES
    max_components: int = 20
    cv_folds: int = 3
    standardize: bool = False
    audit_isolation: bool = False
    output: str = "report.json"

    def validate(self, need_data: bool = True) -> "PipelineConfig":
        if need_data:
            if not self.data:
                raise ConfigError("'data' is required")
            if not Path(self.data).is_file():
                raise ConfigError(f"data file {self.data!r} does not exist")
        if self.split_file and not Path(self.split_file).is_file():
            raise ConfigError(f"split file {self.split_file!r} does not exist")
        if self.layout != "target_first_column":
            raise ConfigError("the pipeline needs layout = target_first_column")
        if not self.split_file and not 0 < self.test_fraction < 1:
            raise ConfigError("test_fraction must lie in (0, 1)")
        if not self.orders or min(self.orders) < 1:
            raise ConfigError("orders must be positive integers")
        if self.basis_strategy not in ("exhaustive", "coarse_to_fine"):
            raise ConfigError(f"unknown basis_strategy {self.basis_strategy!r}")
        if not 0 < self.epsilon < 1:
            raise ConfigError("epsilon must lie in (0, 1)")
        if self.mi_k < 1:
            raise ConfigError("mi_k must be positive")
        if self.max_size is not None and self.max_size < 1:
            raise ConfigError("max_size must be positive")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown or not self.methods:
            raise ConfigError(f"unknown or empty methods {unknown}; choose from {METHODS}")
        if not self.rbfn_neurons or not self.rbfn_scales:
            raise ConfigError("RBFN grids must be non-empty")
        if self.cv_folds < 2 or self.max_components < 1:
            raise ConfigError("cv_folds >= 2 and max_components >= 1 required")
        return self

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    @classmethod
    def from_mapping(cls, values: Dict[str, str], base_dir: Optional[Path] = None) -> "PipelineConfig":
        casts = {
            "data": str, "layout": str, "split_file": str, "basis_strategy": str,
            "output": str,
            "test_fraction": float, "epsilon": float, "mi_jitter": float,
            "min_delta": float,
            "seed": int, "mi_k": int, "mi_seed": int, "max_components": int,
            "cv_folds": int,
            "n_min": _optional_int, "n_max": _optional_int, "max_size": _optional_int,
            "orders": lambda v: _list(v, int),
            "methods": lambda v: _list(v, str),
            "rbfn_neurons": lambda v: _list(v, int),
            "rbfn_scales": lambda v: _list(v, float),
            "mi_standardize": _bool, "standardize": _bool, "audit_isolation": _bool,
        }
        kwargs = {}
        for key, value in values.items():
            if key not in casts:
                raise ConfigError(f"unknown configuration key {key!r}")
            try:
                kwargs[key] = casts[key](value)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key!r}: {exc}") from None
        if base_dir is not None:
            for key in ("data", "split_file", "output"):
                if kwargs.get(key) and not Path(kwargs[key]).is_absolute():
                    kwargs[key] = str(base_dir / kwargs[key])
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_mapping(parse_key_values(text, str(path)), path.parent)


def read_split_file(path, n_samples: int):
    """Split file: ``test = i, j, ...`` and optionally ``train = ...`` (0-based)."""
    from .spectra import SplitAssignment

    values = parse_key_values(Path(path).read_text(encoding="utf-8"), str(path))
    extra = set(values) - {"train", "test"}
    if extra or "test" not in values:
        raise ConfigError(f"{path}: expected keys 'test' and optionally 'train'")
    try:
        test = _list(values["test"], int)
        train = _list(values["train"], int) if "train" in values else None
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if train is None:
        train = tuple(sorted(set(range(n_samples)) - set(test)))
    split = SplitAssignment(train, test, None)
    try:
        split.check_covers(n_samples)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return split
