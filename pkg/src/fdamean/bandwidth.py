"""Bandwidth grids, sup-norm grid search on simulated data, and leave-one-curve-out CV."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import weights as _weights
from .errors import IllConditionedWindow, InvalidData, NoValidBandwidth, NumericalFailure
from .estimation import CurveDataset, EstimatorConfig, evaluation_grid
from .grid import Grid
from .simulation import SimulationModel, draw_averaged_batch, sup_errors

__all__ = [
    "BandwidthGrid",
    "bandwidth_grid",
    "SearchResult",
    "grid_search_supnorm",
    "CVResult",
    "loocv",
    "default_workers",
]


def default_workers() -> int:
    """Worker threads for bandwidth loops, from ``FDAMEAN_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("FDAMEAN_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class BandwidthGrid:
    values: tuple
    rule: str = "custom"

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise ValueError("bandwidth grid is empty")
        if any(not 0 < v < 1 for v in vals):
            raise ValueError("bandwidths must lie in (0, 1)")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValueError("bandwidths must be strictly increasing")
        object.__setattr__(self, "values", vals)

    def __iter__(self):
        return iter(self.values)

    def __len__(self):
        return len(self.values)


def bandwidth_grid(p_min: int, c: float = 3.0, step: float = 0.005, stop: float = 0.25) -> BandwidthGrid:
    """``c/p_min, c/p_min + step, ...`` up to ``stop`` inclusive."""
    start = c / p_min
    if start >= stop:
        raise ValueError(f"grid start {start:g} is not below stop {stop:g}")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    vals = start + step * np.arange(count)
    return BandwidthGrid(tuple(vals), rule=f"start {c:g}/p_min={start:.6g}, step {step:g}, stop {stop:g}")


def _pick(h_values, scores, rtol=1e-9, atol=1e-12):
    """Index of the smallest score; near-ties go to the smaller bandwidth."""
    scores = np.asarray(scores, dtype=float)
    valid = np.isfinite(scores)
    if not valid.any():
        raise NoValidBandwidth("every candidate bandwidth failed")
    best = np.min(scores[valid])
    ties = valid & (scores <= best + atol + rtol * abs(best))
    return int(np.flatnonzero(ties)[0])


def _map(func, items, workers):
    if workers <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


@dataclass
class SearchResult:
    best_h: float
    h_values: np.ndarray
    mean_errors: np.ndarray
    se_errors: np.ndarray
    components: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)

    @property
    def best_index(self) -> int:
        return int(np.flatnonzero(self.h_values == self.best_h)[0])

    @property
    def best_error(self) -> float:
        return float(self.mean_errors[self.best_index])


def grid_search_supnorm(
    model: SimulationModel,
    n: int,
    grid: Grid,
    config: EstimatorConfig,
    h_grid,
    replications: int,
    seed,
    eval_points=None,
    draws=None,
    workers: int | None = None,
) -> SearchResult:
    """Bandwidth minimizing the Monte-Carlo mean sup-norm error.

    All candidates see the same replications (common random numbers).
    Candidates whose weights are ill-conditioned are skipped and listed in
    ``failures``.
    """
    h_values = np.asarray(tuple(h_grid), dtype=float)
    if eval_points is None:
        eval_points = evaluation_grid(grid.d)
    if draws is None:
        draws = draw_averaged_batch(model, n, grid, replications, seed)
    eps, z = draws
    workers = default_workers() if workers is None else workers

    def one(h):
        try:
            w = config.with_h(h).weights(grid, eval_points)
        except (IllConditionedWindow, NumericalFailure) as exc:
            return None, str(exc)
        return sup_errors(w, grid, eval_points, model.mean, eps, z), None

    results = _map(one, h_values, workers)
    k = len(h_values)
    mean = np.full(k, np.nan)
    se = np.full(k, np.nan)
    comps = {name: np.full(k, np.nan) for name in ("bias", "noise", "process")}
    failures = {}
    for i, (norms, err) in enumerate(results):
        if norms is None:
            failures[float(h_values[i])] = err
            continue
        tot = norms["total"]
        mean[i] = tot.mean()
        se[i] = tot.std(ddof=1) / np.sqrt(tot.size) if tot.size > 1 else np.nan
        for name in comps:
            comps[name][i] = norms[name].mean()
    best = _pick(h_values, mean)
    return SearchResult(float(h_values[best]), h_values, mean, se, comps, failures)


@dataclass
class CVResult:
    best_h: float
    h_values: np.ndarray
    scores: np.ndarray
    failures: dict = field(default_factory=dict)


def _leave_one_out_means(dataset: CurveDataset) -> np.ndarray:
    """Row ``i`` is the column mean without curve ``i`` (available-case)."""
    y = dataset.y
    present = dataset.mask
    counts = dataset.counts
    total = dataset.mean_curve * counts
    others = counts[None, :] - present
    if np.any(others == 0):
        j = int(np.flatnonzero(np.any(others == 0, axis=0))[0])
        raise InvalidData(f"design column {j} has a single observation; leave-one-out mean undefined")
    return (total[None, :] - np.where(present, y, 0.0)) / others


def loocv(
    dataset: CurveDataset, config: EstimatorConfig, h_grid, workers: int | None = None
) -> CVResult:
    """Leave-one-curve-out cross-validation over ``h_grid``.

    ``CV(h) = sum_i sum_j (Y_ij - mu_h^{(-i)}(x_j))^2`` with the estimate
    built from the other curves.  Since the estimator is linear in the mean
    curve, one weight matrix per ``h`` serves every left-out curve.  Missing
    cells are skipped in the sum.
    """
    if dataset.n < 2:
        raise ValueError("cross-validation needs at least two curves")
    grid = dataset.grid
    loo = _leave_one_out_means(dataset)
    present = dataset.mask
    y0 = np.where(present, dataset.y, 0.0)
    design = grid.points()
    h_values = np.asarray(tuple(h_grid), dtype=float)
    workers = default_workers() if workers is None else workers

    def one(h):
        try:
            w = _weights.weight_matrix(grid, design, h, kind=config.kind, m=config.m, kernel=config.kernel)
        except (IllConditionedWindow, NumericalFailure) as exc:
            return np.nan, str(exc)
        fits = np.asarray(w @ loo.T).T
        resid = np.where(present, y0 - fits, 0.0)
        return float(np.sum(resid * resid)), None

    results = _map(one, h_values, workers)
    scores = np.array([r[0] for r in results])
    failures = {float(h): r[1] for h, r in zip(h_values, results) if r[1] is not None}
    best = _pick(h_values, scores)
    return CVResult(float(h_values[best]), h_values, scores, failures)
