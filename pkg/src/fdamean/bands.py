"""Simultaneous confidence bands from the Gaussian limit of ``sqrt(n) (mu_hat - mu)``.

The limit process has the covariance kernel of the curve-level process.  We
estimate that kernel from residual curves, sample the Gaussian process on
the evaluation grid and use the quantile of its sup-norm.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalFailure
from .estimation import CurveDataset, EstimateCurve, EstimatorConfig, estimate_from_mean, evaluation_grid
from .grid import Grid
from .rates import RateInputs, undersmoothing_check
from .weights import weight_matrix

__all__ = [
    "CovarianceEstimate",
    "SimultaneousBand",
    "residual_curves",
    "estimate_covariance",
    "gaussian_sup_quantile",
    "simultaneous_band",
    "band_from_dataset",
]


def residual_curves(dataset: CurveDataset, fitted_design) -> np.ndarray:
    """``R_ij = Y_ij - mu_hat(x_j)``; missing cells stay NaN."""
    fitted_design = np.asarray(fitted_design, dtype=float).reshape(-1)
    if fitted_design.size != dataset.grid.p1:
        raise ValueError("fitted values must be given at every design point")
    return dataset.y - fitted_design[None, :]


@dataclass
class CovarianceEstimate:
    eval_points: np.ndarray
    gamma: np.ndarray
    n_used: int
    design_gamma: np.ndarray | None = field(default=None, repr=False)

    @property
    def variance(self) -> np.ndarray:
        return np.clip(np.diag(self.gamma), 0.0, None)


def _raw_covariance(residuals: np.ndarray) -> np.ndarray:
    present = ~np.isnan(residuals)
    r0 = np.where(present, residuals, 0.0)
    m = present.astype(float)
    pairs = m.T @ m
    with np.errstate(divide="ignore", invalid="ignore"):
        raw = (r0.T @ r0) / (pairs - 1.0)
    raw[pairs < 2] = np.nan
    return raw


def _neighbours(grid: Grid):
    """Axis-adjacent neighbour pairs ``(j, k)`` of the flat design."""
    idx = np.arange(grid.p1).reshape(grid.p)
    pairs = []
    for k in range(grid.d):
        if grid.p[k] < 2:
            continue
        lo = np.take(idx, np.arange(grid.p[k] - 1), axis=k).ravel()
        hi = np.take(idx, np.arange(1, grid.p[k]), axis=k).ravel()
        pairs.append(np.stack([lo, hi], axis=1))
    return np.concatenate(pairs) if pairs else np.empty((0, 2), dtype=int)


def _fill_diagonal(raw: np.ndarray, grid: Grid) -> np.ndarray:
    """Replace the noise-inflated diagonal by the mean of adjacent off-diagonal entries."""
    out = raw.copy()
    pairs = _neighbours(grid)
    if pairs.size == 0:
        return out
    sums = np.zeros(grid.p1)
    counts = np.zeros(grid.p1)
    vals = raw[pairs[:, 0], pairs[:, 1]]
    ok = np.isfinite(vals)
    for col in (0, 1):
        np.add.at(sums, pairs[ok, col], vals[ok])
        np.add.at(counts, pairs[ok, col], 1.0)
    has = np.flatnonzero(counts > 0)
    out[has, has] = sums[has] / counts[has]
    return out


def _psd_clip(mat: np.ndarray) -> np.ndarray:
    mat = 0.5 * (mat + mat.T)
    evals, evecs = np.linalg.eigh(mat)
    return (evecs * np.clip(evals, 0.0, None)) @ evecs.T


def estimate_covariance(residuals, grid: Grid, eval_points=None, smoothing_h: float | None = None) -> CovarianceEstimate:
    """Covariance kernel of the curve process on an evaluation grid.

    The empirical covariance of the residual curves carries the noise
    variance on its diagonal, so diagonal entries are replaced by the mean of
    the adjacent off-diagonal values.  The design-level matrix is made
    positive semidefinite by eigenvalue clipping and then mapped to the
    evaluation grid by tensor-product linear interpolation on both arguments
    (or, with ``smoothing_h``, by local linear smoothing weights).
    """
    residuals = np.asarray(residuals, dtype=float)
    if residuals.ndim != 2 or residuals.shape[1] != grid.p1:
        raise ValueError(f"residuals must have shape (n, {grid.p1})")
    n = residuals.shape[0]
    if n < 2:
        raise ValueError("covariance estimation needs at least two curves")
    raw = _raw_covariance(residuals)
    filled = _fill_diagonal(raw, grid)
    if np.any(~np.isfinite(filled)):
        raise ValueError("too many missing values to estimate every covariance entry")
    design = _psd_clip(filled)
    pts = evaluation_grid(grid.d) if eval_points is None else np.asarray(eval_points, dtype=float).reshape(-1, grid.d)
    if smoothing_h is None:
        a = weight_matrix(grid, pts, kind="interpolation")
    else:
        a = weight_matrix(grid, pts, smoothing_h, kind="locpol", m=1)
    gamma = np.asarray(a @ (a @ design).T)
    gamma = 0.5 * (gamma + gamma.T)
    return CovarianceEstimate(pts, gamma, n, design)


def _factor(gamma: np.ndarray, jitter: float = 1e-10) -> np.ndarray:
    scale = float(np.max(np.diag(gamma)))
    try:
        return np.linalg.cholesky(gamma + jitter * scale * np.eye(gamma.shape[0]))
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"covariance not factorizable after jitter: {exc}") from exc


def _sup_draws(factor: np.ndarray, draws: int, rng, scale=None, chunk: int = 2000) -> np.ndarray:
    e = factor.shape[0]
    out = np.empty(draws)
    for start in range(0, draws, chunk):
        m = min(chunk, draws - start)
        paths = factor @ rng.standard_normal((e, m))
        if scale is not None:
            paths = paths / scale[:, None]
        out[start : start + m] = np.max(np.abs(paths), axis=0)
    return out


def gaussian_sup_quantile(cov, level: float, draws: int = 5000, rng=None, standardize: bool = False) -> float:
    """Level-quantile of ``max_x |G(x)|`` for the centered Gaussian vector with covariance ``cov``.

    With ``standardize`` the process is divided by its pointwise standard
    deviation first (points with zero variance are dropped).
    """
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    if draws < 100:
        raise ValueError("need at least 100 draws")
    gamma = cov.gamma if isinstance(cov, CovarianceEstimate) else np.asarray(cov, dtype=float)
    gamma = np.atleast_2d(gamma)
    rng = np.random.default_rng(rng)
    var = np.clip(np.diag(gamma), 0.0, None)
    if np.max(var) <= 0.0:
        return 0.0
    scale = None
    if standardize:
        keep = var > 1e-12 * np.max(var)
        gamma = gamma[np.ix_(keep, keep)]
        scale = np.sqrt(var[keep])
    sups = _sup_draws(_factor(gamma), draws, rng, scale)
    return float(np.quantile(sups, level))


@dataclass
class SimultaneousBand:
    center: EstimateCurve
    halfwidth: np.ndarray
    level: float
    quantile: float
    n: int
    mode: str = "unstudentized"
    checks: dict = field(default_factory=dict)

    @property
    def lower(self) -> np.ndarray:
        return self.center.values - self.halfwidth

    @property
    def upper(self) -> np.ndarray:
        return self.center.values + self.halfwidth

    def inside(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=float).reshape(-1)
        return (values >= self.lower) & (values <= self.upper)

    def covers(self, values) -> bool:
        return bool(np.all(self.inside(values)))

    def first_violation(self, values):
        """Evaluation point of the first value outside the band, or None."""
        bad = np.flatnonzero(~self.inside(values))
        return None if bad.size == 0 else self.center.eval_points[bad[0]]


def simultaneous_band(
    estimate: EstimateCurve,
    cov: CovarianceEstimate,
    n: int,
    level: float = 0.95,
    draws: int = 5000,
    rng=None,
    mode: str = "unstudentized",
) -> SimultaneousBand:
    """Band ``mu_hat(x) +- q / sqrt(n)`` (or ``+- q sd(x) / sqrt(n)`` when studentized).

    ``level = 0`` gives the degenerate zero-width band.
    """
    if mode not in ("unstudentized", "studentized"):
        raise ValueError(f"unknown band mode {mode!r}")
    if not 0 <= level < 1:
        raise ValueError("level must lie in [0, 1)")
    if cov.gamma.shape[0] != estimate.values.size:
        raise ValueError("covariance and estimate live on different evaluation grids")
    studentized = mode == "studentized"
    q = 0.0 if level == 0 else gaussian_sup_quantile(cov, level, draws, rng, standardize=studentized)
    if studentized:
        halfwidth = q * np.sqrt(cov.variance) / np.sqrt(n)
    else:
        halfwidth = np.full(estimate.values.size, q / np.sqrt(n))
    return SimultaneousBand(estimate, halfwidth, level, q, n, mode)


def band_from_dataset(
    dataset: CurveDataset,
    config: EstimatorConfig,
    eval_points=None,
    level: float = 0.95,
    draws: int = 5000,
    rng=None,
    mode: str = "unstudentized",
    alpha: float = 2.0,
    c: float = 3.0,
    h0: float = 0.25,
    smoothing_h: float | None = None,
) -> SimultaneousBand:
    """Estimate, covariance and band from raw curves in one call.

    The bandwidth is checked against the undersmoothing inequalities; a
    violation only warns because their constants are unknown.
    """
    grid = dataset.grid
    pts = evaluation_grid(grid.d) if eval_points is None else np.asarray(eval_points, dtype=float).reshape(-1, grid.d)
    center = estimate_from_mean(grid, dataset.mean_curve, config, pts)
    fitted = estimate_from_mean(grid, dataset.mean_curve, config, grid.points()).values
    cov = estimate_covariance(residual_curves(dataset, fitted), grid, pts, smoothing_h)
    band = simultaneous_band(center, cov, dataset.n, level, draws, rng, mode)
    if config.kind == "locpol":
        checks = undersmoothing_check(RateInputs(dataset.n, grid.p, grid.d, alpha, c), config.h, h0)
        band.checks = checks
        if not checks["in_H"]:
            warnings.warn(
                f"bandwidth h={config.h} fails the undersmoothing checks {checks}; band may be biased",
                RuntimeWarning,
                stacklevel=2,
            )
    return band
