"""Diagonal Barzilai-Borwein metric.

Each epoch the diagonal U_k = Diag(u) solves the box-constrained secant
problem

    min_u  ||s - U y||^2 + omega * ||U - U_prev||_F^2
    s.t.   alpha2 <= u_i <= alpha1

whose per-coordinate solution is the clipped ratio
(s_i y_i + omega u_prev_i) / (y_i^2 + omega). The box comes from two
BB-type scalars scaled by 1/m:

    alpha1 = (2/m) ||s|| / ||y||,     alpha2 = (1/m) s^T y / ||y||^2.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .prox import DiagonalMetric

__all__ = [
    "DegeneratePair",
    "NonpositiveCurvature",
    "SecantPair",
    "MetricConfig",
    "bb_bounds",
    "diagonal_bb_update",
    "update_metric",
    "scalar_bb_step",
    "secant_objective",
]


class DegeneratePair(ArithmeticError):
    """The gradient difference y is zero."""


class NonpositiveCurvature(ArithmeticError):
    """s^T y <= 0; the BB lower bound would not be positive."""


@dataclass(frozen=True, eq=False)
class SecantPair:
    s: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.s, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        if s.shape != y.shape:
            raise ValueError(f"secant vectors differ in shape: {s.shape} vs {y.shape}")
        if not (np.all(np.isfinite(s)) and np.all(np.isfinite(y))):
            raise ValueError("secant vectors must be finite")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "y", y)


@dataclass(frozen=True)
class MetricConfig:
    """Settings for the diagonal metric update.

    ``step_cap`` optionally clips both BB bounds from above; the theory
    checks use it to keep U below 1/L_Omega (or 1/(3 L_Omega)).
    """

    omega: float = 1.0
    m: int = 1
    eps_floor: float = 1e-12
    fallback: str = "hold"
    step_cap: Optional[float] = None

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"m must be a positive integer, got {self.m}")
        if not self.eps_floor > 0:
            raise ValueError("eps_floor must be positive")
        if self.fallback != "hold":
            raise ValueError(f"unknown fallback policy {self.fallback!r}")
        if self.step_cap is not None and not self.step_cap > 0:
            raise ValueError("step_cap must be positive")


def bb_bounds(pair: SecantPair, m: int):
    """Return (alpha1, alpha2)."""
    s, y = pair.s, pair.y
    yy = float(y @ y)
    if yy == 0.0:
        raise DegeneratePair("gradient difference is zero")
    sy = float(s @ y)
    if sy <= 0.0:
        raise NonpositiveCurvature(f"s^T y = {sy:.3e} <= 0")
    alpha1 = 2.0 / m * float(np.linalg.norm(s)) / np.sqrt(yy)
    alpha2 = sy / (m * yy)
    return alpha1, alpha2


def diagonal_bb_update(pair: SecantPair, u_prev, cfg: MetricConfig,
                       alpha1: float, alpha2: float) -> DiagonalMetric:
    if not (0.0 < alpha2 <= alpha1):
        raise ValueError(f"need 0 < alpha2 <= alpha1, got alpha2={alpha2}, alpha1={alpha1}")
    u_prev = np.asarray(u_prev, dtype=np.float64)
    s, y, omega = pair.s, pair.y, cfg.omega
    raw = (s * y + omega * u_prev) / (y * y + omega)
    return DiagonalMetric(np.clip(raw, alpha2, alpha1), alpha2, alpha1)


def _guard_bounds(alpha1, alpha2, cfg: MetricConfig):
    alpha1 = max(alpha1, cfg.eps_floor)
    alpha2 = max(alpha2, cfg.eps_floor)
    if cfg.step_cap is not None:
        alpha1 = min(alpha1, cfg.step_cap)
        alpha2 = min(alpha2, cfg.step_cap)
    return alpha1, alpha2


def update_metric(pair: SecantPair, prev: DiagonalMetric, cfg: MetricConfig) -> DiagonalMetric:
    """BB bounds followed by the closed-form diagonal update.

    A zero ``y`` or ``s^T y <= 0`` keeps ``prev`` unchanged.
    """
    try:
        alpha1, alpha2 = bb_bounds(pair, cfg.m)
    except (DegeneratePair, NonpositiveCurvature):
        return prev
    alpha1, alpha2 = _guard_bounds(alpha1, alpha2, cfg)
    return diagonal_bb_update(pair, prev.u, cfg, alpha1, alpha2)


def scalar_bb_step(pair: SecantPair, prev: float, cfg: MetricConfig) -> float:
    """Scalar BB stepsize (1/m) s^T y / ||y||^2 used by the *-BB baselines."""
    try:
        _, alpha2 = bb_bounds(pair, cfg.m)
    except (DegeneratePair, NonpositiveCurvature):
        return prev
    _, alpha2 = _guard_bounds(alpha2, alpha2, cfg)
    return alpha2


def secant_objective(u, pair: SecantPair, u_prev, omega: float) -> float:
    """||s - Diag(u) y||^2 + omega ||Diag(u) - Diag(u_prev)||_F^2."""
    u = np.asarray(u, dtype=np.float64)
    r = pair.s - u * pair.y
    du = u - np.asarray(u_prev, dtype=np.float64)
    return float(r @ r + omega * (du @ du))
