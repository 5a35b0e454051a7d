from .io import load_model, model_from_dict, model_to_dict, save_model
from .linear import (
    LatentModel,
    LinearModel,
    fit_latent,
    fit_linear,
    important_wavelengths_linear,
)
from .rbfn import KMeansResult, RbfnModel, fit_rbfn, kmeans, predict_rbfn
from .validation import (
    CvGrid,
    CvResult,
    cv_select_components,
    cv_select_meta,
    nmse,
    union_variance,
)

__all__ = [
    "CvGrid", "CvResult", "KMeansResult", "LatentModel", "LinearModel", "RbfnModel",
    "cv_select_components", "cv_select_meta", "fit_latent", "fit_linear", "fit_rbfn",
    "important_wavelengths_linear", "kmeans", "load_model", "model_from_dict",
    "model_to_dict", "nmse", "predict_rbfn", "save_model", "union_variance",
]
