"""Closed-form convergence rates, bandwidth rules and regime labels.

Logarithms are natural throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

__all__ = [
    "RateInputs",
    "Rate",
    "rate_bound",
    "optimal_bandwidth",
    "optimal_rate",
    "classify_regime",
    "regime_thresholds",
    "interpolation_error_envelope",
    "slight_smoothing_bandwidth",
    "undersmoothing_check",
    "summary",
]


@dataclass(frozen=True)
class RateInputs:
    n: int
    p: tuple
    d: int = 1
    alpha: float = 2.0
    c: float = 3.0

    def __post_init__(self):
        p = tuple(int(v) for v in (self.p if hasattr(self.p, "__iter__") else [self.p]))
        if len(p) == 1 and self.d > 1:
            p = p * self.d
        object.__setattr__(self, "p", p)
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if len(p) != self.d:
            raise ValueError(f"need {self.d} per-axis counts, got {len(p)}")
        if any(v < 1 for v in p):
            raise ValueError("per-axis counts must be >= 1")
        if self.alpha <= 0 or self.c <= 0:
            raise ValueError("alpha and c must be positive")

    @property
    def p1(self) -> int:
        return math.prod(self.p)

    @property
    def p_min(self) -> int:
        return min(self.p)


class Rate(NamedTuple):
    value: float
    branch: str


def rate_bound(inputs: RateInputs, h: float) -> Rate:
    """``max(h^alpha, sqrt(log(1/h) / (n p1 h^d)), n^{-1/2})`` and the binding term."""
    if not 0 < h < 1:
        raise ValueError("h must lie in (0, 1)")
    terms = {
        "bias": h**inputs.alpha,
        "noise": math.sqrt(math.log(1.0 / h) / (inputs.n * inputs.p1 * h**inputs.d)),
        "process": inputs.n**-0.5,
    }
    branch = max(terms, key=terms.get)
    return Rate(terms[branch], branch)


def optimal_bandwidth(inputs: RateInputs) -> float:
    """``max(c / p_min, (log(n p1) / (n p1))^{1/(2 alpha + d)})``."""
    np1 = inputs.n * inputs.p1
    stat = (math.log(np1) / np1) ** (1.0 / (2 * inputs.alpha + inputs.d)) if np1 > 1 else 1.0
    return max(inputs.c / inputs.p_min, stat)


def optimal_rate(inputs: RateInputs) -> Rate:
    """``max(p_min^{-alpha}, (log(n p1)/(n p1))^{alpha/(2 alpha + d)}, n^{-1/2})``.

    The branch is ``"sparse"``, ``"intermediate"`` or ``"dense"``.
    """
    np1 = inputs.n * inputs.p1
    terms = {
        "sparse": inputs.p_min ** -inputs.alpha,
        "intermediate": (math.log(np1) / np1) ** (inputs.alpha / (2 * inputs.alpha + inputs.d)) if np1 > 1 else 1.0,
        "dense": inputs.n**-0.5,
    }
    branch = max(terms, key=terms.get)
    return Rate(terms[branch], branch)


def regime_thresholds(n: int, alpha: float, d: int = 1) -> tuple[float, float]:
    """``((n / log n)^{1/(2 alpha)}, (log n)^{1/d} n^{1/(2 alpha)})``, constants set to one."""
    if n < 2:
        raise ValueError("regime thresholds need n >= 2")
    log_n = math.log(n)
    return (n / log_n) ** (1.0 / (2 * alpha)), log_n ** (1.0 / d) * n ** (1.0 / (2 * alpha))


def classify_regime(inputs: RateInputs) -> str:
    """Heuristic regime label from ``p_min`` (all axes assumed of comparable size)."""
    lower, upper = regime_thresholds(inputs.n, inputs.alpha, inputs.d)
    if inputs.p_min <= lower:
        return "sparse"
    if inputs.p_min >= upper:
        return "dense"
    return "intermediate"


def interpolation_error_envelope(n: int, p1: int, sigma: float = 1.0) -> float:
    """``sigma sqrt(2 log(p1) / n)``, the Gaussian-maximum envelope of ``max_j |epsbar_j|``."""
    if p1 < 2:
        raise ValueError("p1 must be >= 2")
    return sigma * math.sqrt(2.0 * math.log(p1) / n)


def slight_smoothing_bandwidth(n: int, p_min: int, d: int = 1, delta: float = 1.5) -> float:
    """``(log n)^{delta/d} / p_min``; enough smoothing for the root-n rate when p is large."""
    if delta < 1:
        raise ValueError("delta must be >= 1")
    return math.log(n) ** (delta / d) / p_min


def undersmoothing_check(inputs: RateInputs, h: float, h0: float = 0.25) -> dict:
    """Raw inequalities defining the bandwidth set for the functional CLT.

    Reports ``h^alpha <= n^{-1/2}``, ``log(1/h) / h^d <= p1`` and
    ``c / p_min < h <= h0``; all constants are taken as one except ``c``.
    """
    bias_lhs = h**inputs.alpha
    design_lhs = math.log(1.0 / h) / h**inputs.d
    checks = {
        "h": h,
        "bias_term": bias_lhs,
        "bias_limit": inputs.n**-0.5,
        "bias_ok": bias_lhs <= inputs.n**-0.5,
        "design_term": design_lhs,
        "design_limit": inputs.p1,
        "design_ok": design_lhs <= inputs.p1,
        "range_ok": inputs.c / inputs.p_min < h <= h0,
    }
    checks["in_H"] = checks["bias_ok"] and checks["design_ok"] and checks["range_ok"]
    return checks


def summary(inputs: RateInputs, h: float | None = None) -> dict:
    """Every formula evaluated for ``inputs``, as plain JSON-ready values."""
    h_star = optimal_bandwidth(inputs)
    opt = optimal_rate(inputs)
    out = {
        "n": inputs.n,
        "p": list(inputs.p),
        "d": inputs.d,
        "alpha": inputs.alpha,
        "c": inputs.c,
        "h_star": h_star,
        "h_star_branch": "design" if h_star == inputs.c / inputs.p_min else "statistical",
        "optimal_rate": opt.value,
        "binding_branch": opt.branch,
        "regime": classify_regime(inputs) if inputs.n >= 2 else None,
        "regime_note": "heuristic: threshold constants set to 1",
    }
    if inputs.n >= 2:
        lo, hi = regime_thresholds(inputs.n, inputs.alpha, inputs.d)
        out["regime_thresholds"] = [lo, hi]
    if inputs.p1 >= 2:
        out["interpolation_envelope"] = interpolation_error_envelope(inputs.n, inputs.p1)
    if h_star < 1:
        b = rate_bound(inputs, h_star)
        out["rate_bound_at_h_star"] = b.value
        out["rate_bound_branch"] = b.branch
    if h is not None:
        b = rate_bound(inputs, h)
        out["h"] = h
        out["rate_bound"] = b.value
        out["rate_bound_branch_at_h"] = b.branch
    return out
