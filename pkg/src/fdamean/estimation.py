"""Mean-function estimates from averaged curves, sup-norm errors and the error decomposition."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidData
from .grid import Grid
from .weights import weight_matrix

__all__ = [
    "CurveDataset",
    "EstimatorConfig",
    "EstimateCurve",
    "ErrorDecomposition",
    "average_curves",
    "evaluation_grid",
    "estimate_on_grid",
    "estimate_from_mean",
    "sup_norm_error",
    "decompose_error",
]


@dataclass(frozen=True)
class CurveDataset:
    """``n`` curves observed on a common product design.

    ``y`` has shape ``(n, p1)`` with columns in the grid's flat order.  NaN
    marks a missing observation; column means use the available rows.
    """

    grid: Grid
    y: np.ndarray
    mean_curve: np.ndarray = field(init=False, repr=False)
    counts: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        y = np.array(self.y, dtype=float, ndmin=2)
        if y.ndim != 2:
            raise InvalidData(f"observations must be a matrix, got shape {y.shape}")
        if y.shape[1] != self.grid.p1:
            raise InvalidData(f"expected {self.grid.p1} columns, got {y.shape[1]}")
        if y.shape[0] < 1:
            raise InvalidData("need at least one curve")
        if np.any(np.isinf(y)):
            raise InvalidData("observations must be finite or NaN")
        y.setflags(write=False)
        object.__setattr__(self, "y", y)
        counts = np.sum(~np.isnan(y), axis=0)
        if np.any(counts == 0):
            raise InvalidData(f"design column(s) {np.flatnonzero(counts == 0).tolist()} have no observations")
        with np.errstate(invalid="ignore"):
            mean = np.nansum(y, axis=0) / counts
        mean.setflags(write=False)
        counts.setflags(write=False)
        object.__setattr__(self, "mean_curve", mean)
        object.__setattr__(self, "counts", counts)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def mask(self) -> np.ndarray:
        """True where an observation is present."""
        return ~np.isnan(self.y)

    @property
    def has_missing(self) -> bool:
        return bool(np.any(np.isnan(self.y)))


def average_curves(dataset: CurveDataset) -> np.ndarray:
    """Column means ``Ybar_j`` (available-case under missing values)."""
    return dataset.mean_curve


@dataclass(frozen=True)
class EstimatorConfig:
    """Which linear estimator to build.

    ``kind`` is ``"locpol"`` (degree ``m``, ``kernel``, bandwidth ``h``) or
    ``"interpolation"`` (ignores the rest).
    """

    kind: str = "locpol"
    m: int = 2
    kernel: str = "epanechnikov"
    h: float | None = None

    def __post_init__(self):
        if self.kind not in ("locpol", "interpolation"):
            raise ValueError(f"unknown estimator kind {self.kind!r}")
        if self.m < 0:
            raise ValueError("m must be >= 0")

    def with_h(self, h) -> "EstimatorConfig":
        return EstimatorConfig(self.kind, self.m, self.kernel, h)

    def weights(self, grid: Grid, eval_points):
        return weight_matrix(grid, eval_points, self.h, kind=self.kind, m=self.m, kernel=self.kernel)

    def meta(self) -> dict:
        if self.kind == "interpolation":
            return {"kind": "interpolation"}
        return {"kind": self.kind, "m": self.m, "kernel": self.kernel, "h": self.h}


@dataclass(frozen=True)
class EstimateCurve:
    eval_points: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise ValueError("estimate has non-finite values")


def evaluation_grid(d: int = 1, size: int | None = None) -> np.ndarray:
    """Equispaced evaluation points including the cube's corners, shape ``(size^d, d)``.

    Defaults: 1001 points for ``d = 1``, ``101^2`` for ``d = 2``, 21 per axis above.
    """
    if size is None:
        size = {1: 1001, 2: 101}.get(d, 21)
    if size < 1:
        raise ValueError("size must be >= 1")
    t = np.linspace(0.0, 1.0, size) if size > 1 else np.array([0.5])
    mesh = np.meshgrid(*([t] * d), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def estimate_from_mean(grid: Grid, ybar, config: EstimatorConfig, eval_points, weights=None) -> EstimateCurve:
    """Estimate from an averaged curve; ``weights`` may be passed to reuse a weight matrix."""
    w = config.weights(grid, eval_points) if weights is None else weights
    values = np.asarray(w @ np.asarray(ybar, dtype=float))
    return EstimateCurve(np.asarray(eval_points, dtype=float).reshape(-1, grid.d), values, config.meta())


def estimate_on_grid(dataset: CurveDataset, config: EstimatorConfig, eval_points=None) -> EstimateCurve:
    if eval_points is None:
        eval_points = evaluation_grid(dataset.grid.d)
    return estimate_from_mean(dataset.grid, dataset.mean_curve, config, eval_points)


def _truth_values(truth, points):
    if callable(truth):
        pts = np.asarray(points, dtype=float)
        vals = truth(pts[:, 0] if pts.shape[1] == 1 else pts)
        return np.asarray(vals, dtype=float).reshape(-1)
    return np.asarray(truth, dtype=float).reshape(-1)


def sup_norm_error(estimate: EstimateCurve, truth) -> float:
    """Maximum absolute error over the estimate's evaluation grid.

    This approximates the sup-norm on the cube; refine the grid if the
    functions vary on scales finer than its spacing.
    """
    return float(np.max(np.abs(estimate.values - _truth_values(truth, estimate.eval_points))))


@dataclass
class ErrorDecomposition:
    """Bias, noise and process parts of ``mu_hat - mu`` on an evaluation grid.

    Each array has shape ``(E,)`` or ``(E, R)`` for ``R`` stacked replications.
    """

    bias: np.ndarray
    noise: np.ndarray
    process: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.bias + self.noise + self.process

    def sup_norms(self) -> dict:
        return {
            name: np.max(np.abs(val), axis=0)
            for name, val in (("total", self.total), ("bias", self.bias), ("noise", self.noise), ("process", self.process))
        }


def decompose_error(weights, grid: Grid, eval_points, mean, eps_bar, z_bar) -> ErrorDecomposition:
    """Split the estimation error into its three linear parts.

    ``bias(x) = sum_j w_j(x) (mu(x_j) - mu(x))``, ``noise(x) = sum_j w_j(x)
    epsbar_j`` and ``process(x) = sum_j w_j(x) Zbar(x_j)``.  ``eps_bar`` and
    ``z_bar`` may be ``(p1,)`` or ``(p1, R)``.
    """
    pts = np.asarray(eval_points, dtype=float).reshape(-1, grid.d)
    mu_design = _truth_values(mean, grid.points())
    mu_eval = _truth_values(mean, pts)
    # sum_j w_j (mu(x_j) - mu(x)), without assuming the weights sum to one
    bias = np.asarray(weights @ mu_design) - mu_eval * np.asarray(weights.sum(axis=1)).ravel()
    eps_bar = np.asarray(eps_bar, dtype=float)
    z_bar = np.asarray(z_bar, dtype=float)
    noise = np.asarray(weights @ eps_bar)
    process = np.asarray(weights @ z_bar)
    if noise.ndim == 2 and bias.ndim == 1:
        bias = np.broadcast_to(bias[:, None], noise.shape)
    return ErrorDecomposition(bias=bias, noise=noise, process=process)
