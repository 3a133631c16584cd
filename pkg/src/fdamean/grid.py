"""Cartesian product designs on the unit cube.

A :class:`Grid` stores one sorted coordinate vector per axis; the full
design is their Cartesian product, flattened in row-major (C) order so that
the last axis varies fastest.  Nothing here materializes the product unless
:meth:`Grid.points` is asked for it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import NumericalFailure

__all__ = [
    "AxisDensity",
    "Grid",
    "uniform_grid",
    "quantile_grid",
    "integrate_trapezoid",
    "count_in_box",
    "box_count_bound",
    "design_bound_violations",
]


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Grid:
    """Product design ``axes[0] x ... x axes[d-1]`` inside ``[0, 1]^d``."""

    axes: tuple
    densities: tuple | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if len(self.axes) == 0:
            raise ValueError("a grid needs at least one axis")
        axes = tuple(_readonly(np.ravel(a)) for a in self.axes)
        for k, a in enumerate(axes):
            if a.size == 0:
                raise ValueError(f"axis {k} is empty")
            if not np.all(np.isfinite(a)):
                raise ValueError(f"axis {k} has non-finite coordinates")
            if a[0] < 0.0 or a[-1] > 1.0:
                raise ValueError(f"axis {k} leaves [0, 1]")
            if np.any(np.diff(a) <= 0):
                raise ValueError(f"axis {k} is not strictly increasing")
        object.__setattr__(self, "axes", axes)

    @property
    def d(self) -> int:
        return len(self.axes)

    @property
    def p(self) -> tuple:
        return tuple(a.size for a in self.axes)

    @property
    def p1(self) -> int:
        return int(np.prod(self.p))

    @property
    def p_min(self) -> int:
        return min(self.p)

    def points(self) -> np.ndarray:
        """All design points as a ``(p1, d)`` array in flat index order."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def unravel(self, j) -> tuple:
        """Per-axis indices of flat design index ``j``."""
        return np.unravel_index(j, self.p)

    def ravel(self, multi_index) -> np.ndarray:
        return np.ravel_multi_index(tuple(multi_index), self.p)

    def __eq__(self, other):
        if not isinstance(other, Grid):
            return NotImplemented
        return self.p == other.p and all(np.array_equal(a, b) for a, b in zip(self.axes, other.axes))

    def __hash__(self):
        return hash(tuple(a.tobytes() for a in self.axes))


def uniform_grid(p) -> Grid:
    """Midpoint design ``(l - 0.5) / p_k`` on every axis.

    This is the quantile design of the uniform density.

    >>> uniform_grid([4]).axes[0]
    array([0.125, 0.375, 0.625, 0.875])
    """
    p = _counts(p)
    return Grid(tuple((np.arange(1, pk + 1) - 0.5) / pk for pk in p))


def _counts(p) -> tuple:
    p = tuple(int(v) for v in np.atleast_1d(p))
    if len(p) == 0 or any(v < 1 for v in p):
        raise ValueError(f"per-axis counts must be >= 1, got {p}")
    return p


def integrate_trapezoid(f: Callable, a: float, b: float, tol: float = 1e-10, max_depth: int = 50) -> float:
    """Adaptive composite trapezoid rule for ``int_a^b f``.

    Intervals are bisected until the refined and coarse estimates on each
    piece agree to within ``3 * tol * width / (b - a)``.
    """
    if b == a:
        return 0.0
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    width = b - a
    total = 0.0
    fa, fb = float(f(a)), float(f(b))
    stack = [(a, b, fa, fb, 0.5 * (b - a) * (fa + fb), 0)]
    while stack:
        lo, hi, flo, fhi, coarse, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        fmid = float(f(mid))
        left = 0.25 * (hi - lo) * (flo + fmid)
        right = 0.25 * (hi - lo) * (fmid + fhi)
        fine = left + right
        if abs(fine - coarse) <= 3.0 * tol * (hi - lo) / width or depth >= max_depth:
            total += fine
        else:
            stack.append((lo, mid, flo, fmid, left, depth + 1))
            stack.append((mid, hi, fmid, fhi, right, depth + 1))
    return sign * total


@dataclass(frozen=True)
class AxisDensity:
    """A design density on ``[0, 1]`` with its declared bounds.

    Validation checks normalization (to 1e-8) and the bounds on a dense
    sample at construction time.
    """

    density: Callable[[float], float]
    f_min: float
    f_max: float
    lipschitz_const: float = 0.0
    name: str = field(default="custom", compare=False)

    def __post_init__(self):
        if not (0.0 < self.f_min <= self.f_max < np.inf):
            raise ValueError(f"need 0 < f_min <= f_max < inf, got {self.f_min}, {self.f_max}")
        if self.lipschitz_const < 0:
            raise ValueError("lipschitz_const must be nonnegative")
        mass = integrate_trapezoid(self.density, 0.0, 1.0, tol=1e-11)
        if not np.isfinite(mass) or abs(mass - 1.0) > 1e-8:
            raise ValueError(f"density integrates to {mass!r}, not 1")
        t = np.linspace(0.0, 1.0, 1001)
        vals = np.array([float(self.density(s)) for s in t])
        slack = 1e-12
        if vals.min() < self.f_min - slack or vals.max() > self.f_max + slack:
            raise ValueError(
                f"density leaves [f_min, f_max] = [{self.f_min}, {self.f_max}] "
                f"(observed range [{vals.min()}, {vals.max()}])"
            )

    def __call__(self, t):
        return self.density(t)

    @classmethod
    def uniform(cls) -> "AxisDensity":
        return cls(lambda t: 1.0, 1.0, 1.0, 0.0, name="uniform")

    @classmethod
    def linear(cls, a: float, b: float) -> "AxisDensity":
        """Density ``a + b t``; requires ``a + b/2 == 1`` and positivity."""
        lo, hi = min(a, a + b), max(a, a + b)
        return cls(lambda t: a + b * t, lo, hi, abs(b), name=f"linear({a},{b})")


def quantile_grid(densities: Sequence[AxisDensity], p, tol: float = 1e-10) -> Grid:
    """Design points solving ``int_0^x f_k = (l - 0.5) / p_k`` on each axis.

    The cumulative integral is computed incrementally with the adaptive
    trapezoid rule and each root is bracketed by the previous root and the
    upper location bound ``(l - 0.5) / (f_min p_k)``.
    """
    p = _counts(p)
    if len(densities) != len(p):
        raise ValueError("need one density per axis")
    if tol <= 0:
        raise ValueError("tol must be positive")
    axes = []
    for dens, pk in zip(densities, p):
        axes.append(_quantile_axis(dens, pk, tol))
    return Grid(tuple(axes), densities=tuple(densities))


def _quantile_axis(dens: AxisDensity, pk: int, tol: float) -> np.ndarray:
    xs = np.empty(pk)
    left, mass_left = 0.0, 0.0
    for l in range(1, pk + 1):
        target = (l - 0.5) / pk

        def residual(x, left=left, mass_left=mass_left, target=target):
            return mass_left + integrate_trapezoid(dens, left, x, tol=tol * 1e-2) - target

        hi = min(1.0, max(left, (l - 0.5) / (dens.f_min * pk)) + 1e-12)
        r_lo, r_hi = residual(left), residual(hi)
        if r_lo > 0 or r_hi < 0:
            raise NumericalFailure(f"cannot bracket quantile {target} on [{left}, {hi}]")
        try:
            root = brentq(residual, left, hi, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=200)
        except RuntimeError as exc:  # brentq raises RuntimeError on non-convergence
            raise NumericalFailure(str(exc)) from exc
        mass_left += integrate_trapezoid(dens, left, root, tol=tol * 1e-2)
        left = root
        xs[l - 1] = root
    return xs


def count_in_box(grid: Grid, center, h: float) -> int:
    """Number of design points in the closed sup-norm ball ``[c - h, c + h]``."""
    center = np.atleast_1d(np.asarray(center, dtype=float))
    if center.shape != (grid.d,):
        raise ValueError(f"center must have {grid.d} coordinates")
    if h <= 0:
        raise ValueError("h must be positive")
    count = 1
    for a, c in zip(grid.axes, center):
        lo = np.searchsorted(a, c - h, side="left")
        hi = np.searchsorted(a, c + h, side="right")
        count *= int(hi - lo)
    return count


def box_count_bound(f_max, p, h: float) -> float:
    """Upper bound ``2^d prod(f_max_k) prod(max(2 h p_k, 1))`` on box counts."""
    p = _counts(p)
    f_max = np.broadcast_to(np.asarray(f_max, dtype=float), (len(p),))
    return float(2 ** len(p) * np.prod(f_max) * np.prod([max(2 * h * pk, 1.0) for pk in p]))


def design_bound_violations(axis, density: AxisDensity) -> dict:
    """Largest violation of the location and spacing bounds of a quantile axis.

    Returns a dict with ``location`` and ``spacing`` entries (0 means every
    bound holds).  Both sides of the two location bounds are checked, and the
    spacing bound is checked for every pair ``j < l``.
    """
    x = np.asarray(axis, dtype=float)
    pk = x.size
    j = np.arange(1, pk + 1)
    fmin, fmax = density.f_min, density.f_max
    loc = [
        (j - 0.5) / (fmax * pk) - x,
        x - (j - 0.5) / (fmin * pk),
        (1 - (pk - j + 0.5) / (fmin * pk)) - x,
        x - (1 - (pk - j + 0.5) / (fmax * pk)),
    ]
    gaps = x[None, :] - x[:, None]
    steps = j[None, :] - j[:, None]
    upper = np.triu(np.ones((pk, pk), dtype=bool), k=1)
    spacing = [
        (steps / (fmax * pk) - gaps)[upper],
        (gaps - steps / (fmin * pk))[upper],
    ]
    return {
        "location": float(max(0.0, max(v.max() for v in loc))),
        "spacing": float(max(0.0, max(v.max() if v.size else 0.0 for v in spacing))),
    }
