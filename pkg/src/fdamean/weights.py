"""Weights of the local polynomial and interpolation estimators.

Both estimators are linear in the averaged data: ``mu_hat(x) = sum_j
w_j(x) Ybar_j``.  For the local polynomial estimator of degree ``m``

    B(x) = 1/(p1 h^d) sum_j U_h(x_j - x) U_h(x_j - x)^T K_h(x_j - x)
    w_j(x) = 1/(p1 h^d) e_1^T B(x)^{-1} U_h(x_j - x) K_h(x_j - x)

with ``U_h(u) = U_m(u / h)`` the vector of scaled monomials ``u^r / r!`` for
``|r| <= m``.  ``B`` is never inverted; we solve ``B v = e_1`` instead.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import DegenerateWindow, IllConditionedWindow
from .grid import Grid
from .kernels import KernelSpec, get_kernel

__all__ = [
    "LAMBDA_FLOOR",
    "MultiIndexBasis",
    "monomial_basis",
    "basis_vector",
    "BMatrix",
    "b_matrix",
    "WeightField",
    "locpol_weight_field",
    "interpolation_weight_field",
    "weight_matrix",
    "WeightDiagnostics",
    "weight_diagnostics",
    "admissible_bandwidth_range",
]

LAMBDA_FLOOR = 1e-8
_CHUNK_ENTRIES = 4_000_000


@dataclass(frozen=True)
class MultiIndexBasis:
    m: int
    d: int
    indices: tuple

    @property
    def size(self) -> int:
        return len(self.indices)

    def as_array(self) -> np.ndarray:
        return np.array(self.indices, dtype=int).reshape(self.size, self.d)

    def factorials(self) -> np.ndarray:
        return np.array([math.prod(math.factorial(k) for k in r) for r in self.indices], dtype=float)


def monomial_basis(m: int, d: int) -> MultiIndexBasis:
    """Multi-indices ``|r| <= m`` in graded order, lexicographically descending within a degree.

    >>> monomial_basis(2, 2).indices
    ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2))
    """
    if m < 0 or d < 1:
        raise ValueError(f"need m >= 0 and d >= 1, got m={m}, d={d}")
    indices = []
    for degree in range(m + 1):
        level = [r for r in itertools.product(range(degree + 1), repeat=d) if sum(r) == degree]
        indices.extend(sorted(level, reverse=True))
    assert len(indices) == math.comb(d + m, d)
    return MultiIndexBasis(m, d, tuple(indices))


def basis_vector(basis: MultiIndexBasis, u, h: float = 1.0) -> np.ndarray:
    """Scaled monomials ``(u/h)^r / r!`` for every ``r`` in the basis.

    ``u`` may carry leading batch axes; the result has shape ``u.shape[:-1] + (N,)``.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    u = np.asarray(u, dtype=float)
    if basis.d == 1 and (u.ndim == 0 or u.shape[-1] != 1):
        u = u[..., None]
    z = u / h
    powers = basis.as_array()  # (N, d)
    mono = np.prod(z[..., None, :] ** powers, axis=-1)
    return mono / basis.factorials()


@dataclass
class BMatrix:
    x: np.ndarray
    h: float
    matrix: np.ndarray
    min_eigenvalue: float


@dataclass
class WeightField:
    """Sparse weights of one evaluation point.

    ``indices`` are flat design indices; only in-window points are stored.
    """

    x: np.ndarray
    h: float
    indices: np.ndarray
    weights: np.ndarray
    kind: str = "locpol"
    m: int | None = None

    def dense(self, p1: int) -> np.ndarray:
        out = np.zeros(p1)
        out[self.indices] = self.weights
        return out

    def apply(self, ybar) -> float:
        return float(np.dot(self.weights, np.asarray(ybar)[self.indices]))


def _as_points(x, d: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x.reshape(-1, 1)
    x = x.reshape(-1, d)
    if np.any(x < 0) or np.any(x > 1):
        raise ValueError("evaluation points must lie in [0, 1]^d")
    return x


def _window(grid: Grid, x: np.ndarray, h: float) -> np.ndarray:
    """Flat indices of design points with sup-distance <= h from ``x`` (one point)."""
    ranges = []
    for a, c in zip(grid.axes, x):
        lo = np.searchsorted(a, c - h, side="left")
        hi = np.searchsorted(a, c + h, side="right")
        ranges.append(np.arange(lo, hi))
    if any(r.size == 0 for r in ranges):
        return np.empty(0, dtype=int)
    mesh = np.meshgrid(*ranges, indexing="ij")
    return grid.ravel([m.ravel() for m in mesh])


def _local_system(points, x, h, kernel, basis):
    """Basis rows, kernel values and B-matrix for a batch of evaluation points.

    ``points`` has shape (P, d) and ``x`` shape (E, d); returns U (E, P, N),
    K (E, P) and the unnormalized B (E, N, N).
    """
    diff = points[None, :, :] - x[:, None, :]
    kv = kernel(diff / h)
    u = basis_vector(basis, diff, h)
    b = np.einsum("epi,epj,ep->eij", u, u, kv)
    return u, kv, b


def b_matrix(grid: Grid, kernel: KernelSpec, basis: MultiIndexBasis, x, h: float) -> BMatrix:
    """Local design matrix at a single point ``x``."""
    kernel = get_kernel(kernel, grid.d)
    x = _as_points(x, grid.d)[0]
    idx = _window(grid, x, h)
    pts = grid.points()[idx] if idx.size else np.empty((0, grid.d))
    _, kv, b = _local_system(pts, x[None, :], h, kernel, basis)
    if idx.size == 0 or not np.any(kv > 0):
        raise DegenerateWindow(f"no design point carries kernel mass at x={x}, h={h}", x=x)
    mat = b[0] / (grid.p1 * h**grid.d)
    mat = 0.5 * (mat + mat.T)
    lam = float(np.linalg.eigvalsh(mat)[0])
    return BMatrix(x=x, h=h, matrix=mat, min_eigenvalue=lam)


def _solve_first_column(b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Solve ``B v = e_1`` for a stack of symmetric matrices.

    Returns ``(v, lambda_min)``.  Cholesky is tried first; the eigen
    decomposition (needed anyway for the conditioning check) is the fallback.
    """
    n = b.shape[-1]
    evals, evecs = np.linalg.eigh(b)
    lam = evals[:, 0]
    e1 = np.zeros(n)
    e1[0] = 1.0
    try:
        chol = np.linalg.cholesky(b)
        y = np.linalg.solve(chol, np.broadcast_to(e1, b.shape[:-1])[..., None])
        v = np.linalg.solve(np.swapaxes(chol, -1, -2), y)[..., 0]
    except np.linalg.LinAlgError:
        safe = np.where(np.abs(evals) > 0, evals, np.inf)
        v = np.einsum("eij,ej,ej->ei", evecs, 1.0 / safe, evecs[:, 0, :])
    return v, lam


def _locpol_dense(grid, pts, x, h, kernel, basis, floor):
    norm = grid.p1 * h**grid.d
    u, kv, b = _local_system(pts, x, h, kernel, basis)
    mass = kv.sum(axis=1)
    if np.any(mass <= 0):
        bad = x[np.argmax(mass <= 0)]
        raise DegenerateWindow(f"no design point carries kernel mass at x={bad}, h={h}", x=bad)
    b = b / norm
    b = 0.5 * (b + np.swapaxes(b, -1, -2))
    v, lam = _solve_first_column(b)
    if np.any(lam <= floor):
        i = int(np.argmin(lam))
        raise IllConditionedWindow(
            f"smallest eigenvalue {lam[i]:.3g} of the local design matrix at x={x[i]} "
            f"is below {floor:g} (h={h}); increase the bandwidth",
            x=x[i],
            min_eigenvalue=float(lam[i]),
        )
    return np.einsum("ei,epi,ep->ep", v, u, kv) / norm, lam


def locpol_weight_field(
    grid: Grid, kernel, basis: MultiIndexBasis, x, h: float, floor: float = LAMBDA_FLOOR
) -> WeightField:
    kernel = get_kernel(kernel, grid.d)
    x = _as_points(x, grid.d)[0]
    idx = _window(grid, x, h)
    if idx.size == 0:
        raise DegenerateWindow(f"no design point within h={h} of x={x}", x=x)
    pts = grid.points()[idx]
    w, _ = _locpol_dense(grid, pts, x[None, :], h, kernel, basis, floor)
    return WeightField(x=x, h=h, indices=idx, weights=w[0], kind="locpol", m=basis.m)


def _interp_axis(a: np.ndarray, t: np.ndarray):
    """Left index and right-neighbour weight for linear interpolation on one axis."""
    if a.size == 1:
        return np.zeros(t.shape, dtype=int), np.zeros(t.shape)
    t = np.clip(t, a[0], a[-1])
    left = np.clip(np.searchsorted(a, t, side="right") - 1, 0, a.size - 2)
    frac = (t - a[left]) / (a[left + 1] - a[left])
    return left, np.clip(frac, 0.0, 1.0)


def _interp_dense_rows(grid: Grid, x: np.ndarray):
    """Rows, columns and values of the tensor-product linear interpolation matrix."""
    e = x.shape[0]
    per_axis = []
    for k, a in enumerate(grid.axes):
        left, frac = _interp_axis(a, x[:, k])
        right = np.minimum(left + 1, a.size - 1)
        per_axis.append(((left, 1.0 - frac), (right, frac)))
    rows, cols, vals = [], [], []
    for corner in itertools.product((0, 1), repeat=grid.d):
        idx = [per_axis[k][c][0] for k, c in enumerate(corner)]
        wt = np.ones(e)
        for k, c in enumerate(corner):
            wt = wt * per_axis[k][c][1]
        rows.append(np.arange(e))
        cols.append(grid.ravel(idx))
        vals.append(wt)
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


def interpolation_weight_field(grid: Grid, x) -> WeightField:
    """Multilinear interpolation weights of ``x`` among its surrounding design points.

    Points outside the design's hull are clamped to the nearest boundary value.
    """
    x = _as_points(x, grid.d)
    _, cols, vals = _interp_dense_rows(grid, x[:1])
    keep = vals != 0
    cols, vals = cols[keep], vals[keep]
    uniq, inv = np.unique(cols, return_inverse=True)
    w = np.zeros(uniq.size)
    np.add.at(w, inv, vals)
    return WeightField(x=x[0], h=0.0, indices=uniq, weights=w, kind="interpolation")


def weight_matrix(
    grid: Grid,
    eval_points,
    h: float | None = None,
    *,
    kind: str = "locpol",
    m: int = 2,
    kernel="epanechnikov",
    floor: float = LAMBDA_FLOOR,
) -> sp.csr_matrix:
    """Weights for a whole evaluation grid as a sparse ``(E, p1)`` matrix.

    Row ``i`` holds ``w_j(eval_points[i])``; ``W @ ybar`` is the estimate.
    Raises :class:`IllConditionedWindow` if any row is ill-conditioned.
    """
    x = _as_points(eval_points, grid.d)
    if kind == "interpolation":
        rows, cols, vals = _interp_dense_rows(grid, x)
        w = sp.coo_matrix((vals, (rows, cols)), shape=(x.shape[0], grid.p1)).tocsr()
        w.eliminate_zeros()
        return w
    if kind != "locpol":
        raise ValueError(f"unknown estimator kind {kind!r}")
    if h is None or not h > 0:
        raise ValueError("local polynomial weights need a positive bandwidth")
    kernel = get_kernel(kernel, grid.d)
    basis = monomial_basis(m, grid.d)
    pts = grid.points()
    chunk = max(1, _CHUNK_ENTRIES // max(1, grid.p1 * basis.size))
    blocks = []
    for start in range(0, x.shape[0], chunk):
        xc = x[start : start + chunk]
        w, _ = _locpol_dense(grid, pts, xc, h, kernel, basis, floor)
        # exact zeros outside the kernel support keep the window property exact
        blocks.append(sp.csr_matrix(w))
    out = sp.vstack(blocks, format="csr")
    out.eliminate_zeros()
    return out


def admissible_bandwidth_range(grid: Grid, c: float = 3.0, h0: float = 0.25) -> tuple[float, float]:
    """Default bandwidth range ``[c / p_min, h0]``."""
    return c / grid.p_min, h0


@dataclass
class WeightDiagnostics:
    sum_residual: float
    max_moment_residual: float
    locality_violations: int
    c1: float
    c4: float
    c2: float | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def weight_diagnostics(
    field_: WeightField, basis: MultiIndexBasis, grid: Grid, h: float | None = None, other: WeightField | None = None
) -> WeightDiagnostics:
    """Empirical check of the weight conditions for one weight field.

    Moment residuals are ``|sum_j (x_j - x)^r w_j|`` for ``1 <= |r| <= m``;
    ``c1`` is ``max|w| p1 h^d``, ``c4`` is ``sum|w|``.  With ``other`` (a
    field of the same kind at another point) also reports
    ``c2 = max_j |w_j(x) - w_j(y)| p1 h^d / min(||x - y|| / h, 1)``.
    """
    h = field_.h if h is None else h
    pts = grid.points()
    diff = pts[field_.indices] - field_.x
    w = field_.weights
    moments = basis.as_array()[1:]
    if moments.size:
        mono = np.prod(diff[:, None, :] ** moments[None, :, :], axis=-1)
        max_moment = float(np.max(np.abs(mono.T @ w)))
    else:
        max_moment = 0.0
    sup_dist = np.max(np.abs(diff), axis=-1)
    violations = int(np.count_nonzero((sup_dist > h) & (w != 0))) if h > 0 else 0
    scale = grid.p1 * h**grid.d if h > 0 else float(grid.p1)
    c2 = None
    if other is not None:
        sep = float(np.max(np.abs(np.asarray(field_.x) - np.asarray(other.x))))
        if sep > 0:
            delta = np.abs(field_.dense(grid.p1) - other.dense(grid.p1)).max()
            c2 = float(delta * scale / min(sep / h, 1.0)) if h > 0 else float(delta * scale)
    return WeightDiagnostics(
        sum_residual=float(abs(w.sum() - 1.0)),
        max_moment_residual=max_moment,
        locality_violations=violations,
        c1=float(np.max(np.abs(w)) * scale),
        c4=float(np.abs(w).sum()),
        c2=c2,
    )
