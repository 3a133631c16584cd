"""Compactly supported product kernels and a numerical validator."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "KernelSpec",
    "KernelDiagnostics",
    "epanechnikov_product",
    "triangular_product",
    "get_kernel",
    "validate_kernel",
    "KERNELS",
]

_FLUSH = 1e-300


@dataclass(frozen=True)
class KernelSpec:
    """Kernel on ``R^d`` supported in the sup-norm unit ball.

    ``func`` maps an array of shape ``(..., d)`` to shape ``(...)``.  The
    declared constants promise ``k_min`` on ``[-delta, delta]^d``, the upper
    bound ``k_max`` and the sup-norm Lipschitz constant.
    """

    name: str
    d: int
    func: Callable[[np.ndarray], np.ndarray]
    delta: float
    k_min: float
    k_max: float
    lipschitz_const: float

    def __call__(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self.d == 1 and (u.ndim == 0 or u.shape[-1] != 1):
            u = u[..., None]
        if u.shape[-1] != self.d:
            raise ValueError(f"expected last axis of length {self.d}, got shape {u.shape}")
        vals = np.asarray(self.func(u), dtype=float)
        vals = np.where(np.max(np.abs(u), axis=-1) > 1.0, 0.0, vals)
        return np.where(vals < _FLUSH, 0.0, vals)


def _epanechnikov(u):
    return np.prod(np.clip(1.0 - u * u, 0.0, None), axis=-1)


def _triangular(u):
    return np.prod(np.clip(1.0 - np.abs(u), 0.0, None), axis=-1)


def epanechnikov_product(d: int = 1) -> KernelSpec:
    """``K(u) = prod_k max(1 - u_k^2, 0)``, unnormalized so that ``K(0) = 1``."""
    if d < 1:
        raise ValueError("d must be >= 1")
    return KernelSpec("epanechnikov", d, _epanechnikov, 0.5, 0.75**d, 1.0, 2.0 * d)


def triangular_product(d: int = 1) -> KernelSpec:
    """``K(u) = prod_k max(1 - |u_k|, 0)``."""
    if d < 1:
        raise ValueError("d must be >= 1")
    return KernelSpec("triangular", d, _triangular, 0.5, 0.5**d, 1.0, float(d))


KERNELS = {"epanechnikov": epanechnikov_product, "triangular": triangular_product}


def get_kernel(name, d: int) -> KernelSpec:
    if isinstance(name, KernelSpec):
        if name.d != d:
            raise ValueError(f"kernel has dimension {name.d}, design has {d}")
        return name
    try:
        return KERNELS[name](d)
    except KeyError:
        raise ValueError(f"unknown kernel {name!r}; choose from {sorted(KERNELS)}") from None


@dataclass
class KernelDiagnostics:
    lipschitz_ratio: float
    max_value: float
    min_on_core: float
    max_outside_support: float
    lipschitz_ok: bool
    upper_ok: bool
    lower_ok: bool
    support_ok: bool

    @property
    def passed(self) -> bool:
        return self.lipschitz_ok and self.upper_ok and self.lower_ok and self.support_ok


def validate_kernel(k: KernelSpec, samples: int = 20000, rng_seed=0) -> KernelDiagnostics:
    """Spot-check the declared kernel constants on random samples.

    Pairs ``(u, v)`` are drawn with separations spread over six decades so
    that jumps show up as huge difference quotients.
    """
    if samples < 2:
        raise ValueError("samples must be >= 2")
    rng = np.random.default_rng(rng_seed)
    d = k.d
    u = rng.uniform(-1.1, 1.1, size=(samples, d))
    # probe points sitting on the support boundary, where jumps live
    edge = u[: samples // 4].copy()
    axis = rng.integers(0, d, size=edge.shape[0])
    edge[np.arange(edge.shape[0]), axis] = rng.choice([-1.0, 1.0], size=edge.shape[0])
    u = np.vstack([u, edge])
    scale = 10.0 ** rng.uniform(-7, -1, size=(u.shape[0], 1))
    v = u + scale * rng.uniform(-1, 1, size=u.shape)
    dist = np.max(np.abs(u - v), axis=-1)
    ku, kv = k(u), k(v)
    ok = dist > 0
    ratio = float(np.max(np.abs(ku - kv)[ok] / dist[ok])) if ok.any() else 0.0

    core = rng.uniform(-k.delta, k.delta, size=(samples, d))
    k_core = k(core)
    outside = rng.uniform(1.0, 3.0, size=(samples, d)) * rng.choice([-1.0, 1.0], size=(samples, d))
    k_out = np.asarray(k.func(outside), dtype=float)
    max_value = float(max(ku.max(), k_core.max()))

    rtol = 1e-9
    return KernelDiagnostics(
        lipschitz_ratio=ratio,
        max_value=max_value,
        min_on_core=float(k_core.min()),
        max_outside_support=float(k_out.max()),
        lipschitz_ok=ratio <= k.lipschitz_const * (1 + rtol),
        upper_ok=max_value <= k.k_max * (1 + rtol),
        lower_ok=float(k_core.min()) >= k.k_min * (1 - rtol),
        support_ok=float(k_out.max()) == 0.0,
    )
