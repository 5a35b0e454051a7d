"""Spectral variable selection on B-spline coefficients with mutual information."""

from .bspline import (
    BsplineBasis,
    CompressedSet,
    ProjectionMatrix,
    WavelengthRange,
    build_basis,
    compress,
    loo_error_spectrum,
    merge_ranges,
    projection_matrix,
    select_basis_size,
    total_loo,
    wavelength_range,
)
from .config import PipelineConfig
from .mi import MiEstimatorConfig, mutual_information, mutual_information_subset
from .pipeline import PipelineReport, benchmark_complexity, export_plot_data, run_pipeline
from .selection import SelectionTrace, backward_phase, forward_backward, forward_phase
from .spectra import SpectraSet, SplitAssignment, kfold_stratified, load_spectra, stratified_split

__all__ = [
    "BsplineBasis", "CompressedSet", "MiEstimatorConfig", "PipelineConfig", "PipelineReport",
    "ProjectionMatrix", "SelectionTrace", "SpectraSet", "SplitAssignment", "WavelengthRange",
    "backward_phase", "benchmark_complexity", "build_basis", "compress", "export_plot_data",
    "forward_backward", "forward_phase", "kfold_stratified", "load_spectra",
    "loo_error_spectrum", "merge_ranges", "mutual_information", "mutual_information_subset",
    "projection_matrix", "run_pipeline", "select_basis_size", "stratified_split", "total_loo",
    "wavelength_range",
]
__version__ = "0.1.0"
