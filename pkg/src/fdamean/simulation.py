"""Synthetic functional data and replicated sup-norm error experiments.

Randomness comes from one :class:`numpy.random.SeedSequence` per experiment;
replication ``r`` always draws from child stream ``r``, so results do not
depend on the order (or the worker) in which replications are evaluated.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .estimation import EstimatorConfig, decompose_error
from .grid import Grid

__all__ = [
    "mean_mu0",
    "MEANS",
    "SimulationModel",
    "sample_brownian",
    "sample_averaged",
    "sample_curves",
    "replication_streams",
    "draw_averaged_batch",
    "ReplicationReport",
    "run_replications",
    "RateRow",
    "rate_experiment",
    "rate_rows_to_records",
]


def mean_mu0(x):
    """``sin(3 pi (2x - 1)) exp(-2 |2x - 1|)``."""
    s = 2.0 * np.asarray(x, dtype=float) - 1.0
    return np.sin(3.0 * np.pi * s) * np.exp(-2.0 * np.abs(s))


def _sin2pi(x):
    return np.sin(2.0 * np.pi * np.asarray(x, dtype=float))


def _zero(x):
    x = np.asarray(x, dtype=float)
    return np.zeros(x.shape[0] if x.ndim > 1 else x.shape)


MEANS: dict[str, Callable] = {"mu0": mean_mu0, "sin2pi": _sin2pi, "zero": _zero}


@dataclass(frozen=True)
class SimulationModel:
    """Data-generating model ``Y_ij = mu(x_j) + Z_i(x_j) + eps_ij``.

    ``process`` is ``"brownian"`` (d = 1 only), ``"none"`` or ``"gaussian"``
    with ``covariance(s, t)`` evaluated on design points.  ``alpha``,
    ``holder_const``, ``beta`` and ``moment_bound`` are smoothness metadata.
    """

    mean: Callable = mean_mu0
    process: str = "brownian"
    sigma: float = 1.0
    alpha: float = 2.0
    holder_const: float = 1.0
    beta: float = 0.5
    moment_bound: float = 1.0
    covariance: Callable | None = None
    noise: Callable | None = None
    name: str = field(default="mu0", compare=False)

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if not 0 < self.beta <= 1:
            raise ValueError("beta must be in (0, 1]")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.process not in ("brownian", "none", "gaussian"):
            raise ValueError(f"unknown process kind {self.process!r}")
        if self.process == "gaussian" and self.covariance is None:
            raise ValueError("a gaussian process needs a covariance function")

    @classmethod
    def named(cls, mean: str = "mu0", **kwargs) -> "SimulationModel":
        try:
            func = MEANS[mean]
        except KeyError:
            raise ValueError(f"unknown mean {mean!r}; choose from {sorted(MEANS)}") from None
        return cls(mean=func, name=mean, **kwargs)

    def process_factor(self, grid: Grid) -> np.ndarray | None:
        """Matrix ``L`` with ``L L^T`` the process covariance on the design, or None."""
        if self.process == "none":
            return None
        if self.process == "brownian":
            if grid.d != 1:
                raise ValueError("Brownian motion is only available for d = 1")
            t = grid.axes[0]
            cov = np.minimum.outer(t, t)
        else:
            pts = grid.points()
            cov = np.asarray(self.covariance(pts[:, None, :], pts[None, :, :]), dtype=float)
        return _jittered_cholesky(cov)


def _jittered_cholesky(cov: np.ndarray) -> np.ndarray:
    jitter = 0.0
    scale = max(float(np.max(np.diag(cov))), 1e-300)
    for _ in range(8):
        try:
            return np.linalg.cholesky(cov + jitter * np.eye(cov.shape[0]))
        except np.linalg.LinAlgError:
            jitter = 1e-12 * scale if jitter == 0 else 10 * jitter
    raise np.linalg.LinAlgError("covariance is not positive semidefinite")


def sample_brownian(coords, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Exact Brownian motion values at sorted ``coords`` in ``[0, 1]``.

    Independent Gaussian increments with variances ``t_1, t_2 - t_1, ...``;
    with ``size`` returns ``size`` independent paths as rows.
    """
    t = np.asarray(coords, dtype=float).ravel()
    if t.size and (t[0] < 0 or np.any(np.diff(t) < 0)):
        raise ValueError("coordinates must be sorted and nonnegative")
    steps = np.sqrt(np.diff(t, prepend=0.0))
    shape = (t.size,) if size is None else (size, t.size)
    return np.cumsum(rng.standard_normal(shape) * steps, axis=-1)


def _noise(model: SimulationModel, rng, shape, scale):
    if model.noise is not None:
        return scale * np.asarray(model.noise(rng, shape), dtype=float)
    return scale * rng.standard_normal(shape)


def sample_averaged(model: SimulationModel, n: int, grid: Grid, rng: np.random.Generator, factor=None):
    """Draw the averaged noise and process directly.

    ``epsbar_j ~ N(0, sigma^2 / n)`` independently and ``Zbar = n^{-1/2} Z``
    for one process path ``Z``; for Gaussian noise and Gaussian processes this
    is the exact law of the row averages.  Returns ``(eps_bar, z_bar)``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    root_n = np.sqrt(n)
    eps_bar = _noise(model, rng, grid.p1, model.sigma / root_n)
    if model.process == "none":
        return eps_bar, np.zeros(grid.p1)
    if model.process == "brownian" and factor is None:
        z = sample_brownian(grid.axes[0], rng) if grid.d == 1 else None
        if z is None:
            raise ValueError("Brownian motion is only available for d = 1")
    else:
        factor = model.process_factor(grid) if factor is None else factor
        z = factor @ rng.standard_normal(grid.p1)
    return eps_bar, z / root_n


def sample_curves(model: SimulationModel, n: int, grid: Grid, rng: np.random.Generator, factor=None) -> np.ndarray:
    """Explicit ``(n, p1)`` observation matrix, one process path per row."""
    if n < 1:
        raise ValueError("n must be >= 1")
    pts = grid.points()
    mu = np.asarray(model.mean(pts[:, 0] if grid.d == 1 else pts), dtype=float)
    y = mu + _noise(model, rng, (n, grid.p1), model.sigma)
    if model.process == "brownian" and factor is None:
        if grid.d != 1:
            raise ValueError("Brownian motion is only available for d = 1")
        y += sample_brownian(grid.axes[0], rng, size=n)
    elif model.process != "none":
        factor = model.process_factor(grid) if factor is None else factor
        y += rng.standard_normal((n, grid.p1)) @ factor.T
    return y


def replication_streams(seed, count: int) -> list:
    """One independent generator per replication, derived from ``seed``."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.default_rng(child) for child in ss.spawn(count)]


def draw_averaged_batch(model: SimulationModel, n: int, grid: Grid, replications: int, seed):
    """Stack ``replications`` averaged draws column-wise: two ``(p1, R)`` arrays."""
    factor = model.process_factor(grid) if model.process == "gaussian" else None
    eps = np.empty((grid.p1, replications))
    z = np.empty((grid.p1, replications))
    for r, rng in enumerate(replication_streams(seed, replications)):
        eps[:, r], z[:, r] = sample_averaged(model, n, grid, rng, factor=factor)
    return eps, z


@dataclass
class ReplicationReport:
    """Per-replication sup-norm errors of one estimator configuration."""

    config: dict
    total: np.ndarray
    bias: np.ndarray
    noise: np.ndarray
    process: np.ndarray
    runtime: float = 0.0
    error: str | None = None

    @property
    def replications(self) -> int:
        return int(self.total.size)

    def summary(self) -> dict:
        out = {}
        for name in ("total", "bias", "noise", "process"):
            vals = getattr(self, name)
            out[f"mean_{name}"] = float(np.mean(vals)) if vals.size else float("nan")
            out[f"sd_{name}"] = float(np.std(vals, ddof=1)) if vals.size > 1 else float("nan")
        out["se_total"] = out["sd_total"] / np.sqrt(self.total.size) if self.total.size > 1 else float("nan")
        return out

    def rows(self):
        for r in range(self.total.size):
            yield {
                "replication": r,
                "total": self.total[r],
                "bias": self.bias[r],
                "noise": self.noise[r],
                "process": self.process[r],
            }


def sup_errors(weights, grid, eval_points, mean, eps, z) -> dict:
    """Sup-norms over the evaluation grid of the total error and its three parts."""
    return decompose_error(weights, grid, eval_points, mean, eps, z).sup_norms()


def run_replications(
    model: SimulationModel,
    n: int,
    grid: Grid,
    config: EstimatorConfig,
    eval_points,
    replications: int,
    seed,
    draws=None,
) -> ReplicationReport:
    """Monte-Carlo sup-norm errors of one estimator.

    Replication ``r`` forms ``Ybar = mu(x_j) + Zbar(x_j) + epsbar_j`` from its
    own substream.  A failing weight construction is recorded in ``error``
    with NaN errors rather than raised.  ``draws`` may supply a precomputed
    ``(eps, z)`` batch (common random numbers across configurations).
    """
    if replications < 1:
        raise ValueError("need at least one replication")
    start = time.perf_counter()
    eps, z = draw_averaged_batch(model, n, grid, replications, seed) if draws is None else draws
    cfg = {"n": n, "p": list(grid.p), "replications": replications, **config.meta()}
    try:
        w = config.weights(grid, eval_points)
    except (ArithmeticError, RuntimeError, np.linalg.LinAlgError) as exc:
        nan = np.full(replications, np.nan)
        return ReplicationReport(cfg, nan, nan.copy(), nan.copy(), nan.copy(), time.perf_counter() - start, str(exc))
    norms = sup_errors(w, grid, eval_points, model.mean, eps, z)
    return ReplicationReport(
        cfg,
        norms["total"],
        norms["bias"],
        norms["noise"],
        norms["process"],
        runtime=time.perf_counter() - start,
    )


@dataclass
class RateRow:
    n: int
    p: tuple
    h_values: np.ndarray
    mean_errors: np.ndarray
    se_errors: np.ndarray
    best_h: float
    best_error: float
    interpolation_error: float | None = None


def rate_experiment(
    model: SimulationModel,
    configs,
    replications: int,
    seed,
    estimator: EstimatorConfig | None = None,
    h_rule=None,
    eval_points=None,
    include_interpolation: bool = True,
) -> list[RateRow]:
    """Mean sup-norm error over a bandwidth grid for each ``(n, p)``.

    ``h_rule(grid)`` returns the candidate bandwidths; the default is the
    0.005-step grid starting at ``3 / p_min``.  Each configuration uses its
    own child of ``seed`` and the same draws for every bandwidth and for the
    interpolation estimator.
    """
    from .bandwidth import bandwidth_grid, grid_search_supnorm
    from .estimation import evaluation_grid
    from .grid import uniform_grid

    configs = list(configs)
    if not configs:
        raise ValueError("need at least one (n, p) configuration")
    estimator = EstimatorConfig() if estimator is None else estimator
    h_rule = (lambda g: bandwidth_grid(g.p_min)) if h_rule is None else h_rule
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    rows = []
    for (n, p), child in zip(configs, ss.spawn(len(configs))):
        grid = p if isinstance(p, Grid) else uniform_grid(p)
        pts = evaluation_grid(grid.d) if eval_points is None else eval_points
        draws = draw_averaged_batch(model, n, grid, replications, child)
        res = grid_search_supnorm(model, n, grid, estimator, h_rule(grid), replications, None, pts, draws=draws)
        interp = None
        if include_interpolation:
            rep = run_replications(model, n, grid, EstimatorConfig(kind="interpolation"), pts, replications, None, draws=draws)
            interp = float(np.mean(rep.total))
        rows.append(RateRow(n, grid.p, res.h_values, res.mean_errors, res.se_errors, res.best_h, res.best_error, interp))
    return rows


def rate_rows_to_records(rows) -> list[dict]:
    """Flatten rate-experiment rows to one record per ``(n, p, h)``."""
    out = []
    for row in rows:
        for h, err, se in zip(row.h_values, row.mean_errors, row.se_errors):
            out.append(
                {
                    "n": row.n,
                    "p": "x".join(str(v) for v in row.p),
                    "h": h,
                    "mean_sup_error": err,
                    "se": se,
                    "best": bool(h == row.best_h),
                    "interpolation_error": row.interpolation_error,
                }
            )
    return out
