"""Mean-function estimation for functional data observed on discrete design grids."""

from .bands import SimultaneousBand, band_from_dataset, estimate_covariance, simultaneous_band
from .bandwidth import bandwidth_grid, grid_search_supnorm, loocv
from .errors import (
    DatasetParseError,
    DegenerateWindow,
    IllConditionedWindow,
    InvalidData,
    NoValidBandwidth,
    NumericalFailure,
)
from .estimation import CurveDataset, EstimateCurve, EstimatorConfig, decompose_error, estimate_on_grid, evaluation_grid
from .grid import Grid, quantile_grid, uniform_grid
from .io import read_dataset, subsample_columns, write_dataset
from .kernels import epanechnikov_product, get_kernel, triangular_product
from .rates import RateInputs, optimal_bandwidth, optimal_rate, rate_bound
from .simulation import SimulationModel, mean_mu0, run_replications
from .weights import weight_matrix

__version__ = "0.1.0"

__all__ = [
    "CurveDataset",
    "DatasetParseError",
    "DegenerateWindow",
    "EstimateCurve",
    "EstimatorConfig",
    "Grid",
    "IllConditionedWindow",
    "InvalidData",
    "NoValidBandwidth",
    "NumericalFailure",
    "RateInputs",
    "SimulationModel",
    "SimultaneousBand",
    "band_from_dataset",
    "bandwidth_grid",
    "decompose_error",
    "epanechnikov_product",
    "estimate_covariance",
    "estimate_on_grid",
    "evaluation_grid",
    "get_kernel",
    "grid_search_supnorm",
    "loocv",
    "mean_mu0",
    "optimal_bandwidth",
    "optimal_rate",
    "quantile_grid",
    "rate_bound",
    "read_dataset",
    "run_replications",
    "simultaneous_band",
    "subsample_columns",
    "triangular_product",
    "uniform_grid",
    "weight_matrix",
    "write_dataset",
]
