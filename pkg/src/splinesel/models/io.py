"""Versioned JSON documents for fitted models."""

import json
from pathlib import Path

import numpy as np

from ..errors import FormatError
from .linear import LatentModel, LinearModel
from .rbfn import RbfnModel

SCHEMA = 1


def _arr(a):
    return None if a is None else np.asarray(a, dtype=float).tolist()


def model_to_dict(model, meta=None) -> dict:
    if isinstance(model, RbfnModel):
        doc = {
            "kind": "rbfn",
            "centers": _arr(model.centers),
            "widths": _arr(model.widths),
            "weights": _arr(model.weights),
            "bias": model.bias,
            "width_scale": model.width_scale,
            "input_mean": _arr(model.input_mean),
            "input_scale": _arr(model.input_scale),
        }
    else:
        kind, ncomp = "linear", None
        if isinstance(model, LatentModel):
            kind, ncomp, model = model.kind, model.n_components, model.linear
        doc = {
            "kind": kind,
            "n_components": ncomp,
            "coefficients": _arr(model.coefficients),
            "intercept": model.intercept,
            "input_means": _arr(model.input_means),
            "input_stds": _arr(model.input_stds),
            "columns": [int(c) for c in model.columns],
            "n_inputs": model.n_inputs,
        }
    doc = {"schema": SCHEMA, **doc}
    if meta:
        doc["meta"] = meta
    return doc


def model_from_dict(doc: dict):
    """Rebuild a predictor. PCR/PLSR documents load as their LinearModel."""
    if doc.get("schema") != SCHEMA:
        raise FormatError(f"unsupported model schema {doc.get('schema')!r}")
    kind = doc.get("kind")
    if kind == "rbfn":
        opt = lambda k: None if doc.get(k) is None else np.asarray(doc[k])  # noqa: E731
        return RbfnModel(
            np.asarray(doc["centers"], dtype=float).reshape(len(doc["centers"]), -1),
            np.asarray(doc["widths"], dtype=float),
            np.asarray(doc["weights"], dtype=float),
            float(doc["bias"]),
            float(doc["width_scale"]),
            opt("input_mean"),
            opt("input_scale"),
        )
    if kind in ("linear", "pcr", "plsr"):
        return LinearModel(
            np.asarray(doc["coefficients"], dtype=float),
            float(doc["intercept"]),
            np.asarray(doc["input_means"], dtype=float),
            np.asarray(doc["input_stds"], dtype=float),
            np.asarray(doc["columns"], dtype=int),
            int(doc["n_inputs"]),
        )
    raise FormatError(f"unknown model kind {kind!r}")


def save_model(model, path, meta=None) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model, meta), indent=2) + "\n",
                          encoding="utf-8")


def load_model(path):
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not a JSON document ({exc})") from None
    return model_from_dict(doc), doc.get("meta", {})
