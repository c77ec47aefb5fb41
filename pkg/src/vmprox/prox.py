"""Proximal operators of separable regularizers under a diagonal metric.

For U = Diag(u) the scaled prox solves

    argmin_y  0.5 * ||y - w||^2_{U^{-1}} + R(y)

which separates into independent scalar problems with per-coordinate step u_i.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Regularizer

__all__ = [
    "MetricError",
    "DiagonalMetric",
    "scaled_prox",
    "prox_optimality_residual",
    "soft_threshold",
]


class MetricError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DiagonalMetric:
    """Positive diagonal metric U = Diag(u) with lower <= u_i <= upper."""

    u: np.ndarray
    lower: float
    upper: float

    def __post_init__(self):
        u = np.array(self.u, dtype=np.float64)
        if u.ndim != 1:
            raise MetricError("metric diagonal must be a vector")
        lower, upper = float(self.lower), float(self.upper)
        if not np.all(np.isfinite(u)) or not np.isfinite(lower) or not np.isfinite(upper):
            raise MetricError("metric entries and bounds must be finite")
        if lower <= 0:
            raise MetricError(f"metric lower bound must be positive, got {lower}")
        if lower > upper:
            raise MetricError(f"metric bounds inverted: lower={lower} > upper={upper}")
        if u.size and (u.min() < lower or u.max() > upper):
            raise MetricError("metric diagonal leaves its [lower, upper] box")
        u.flags.writeable = False
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def scalar(cls, eta: float, d: int) -> "DiagonalMetric":
        return cls(np.full(d, float(eta)), eta, eta)

    @property
    def d(self) -> int:
        return self.u.shape[0]

    @property
    def u_min(self) -> float:
        return float(self.u.min())

    @property
    def u_max(self) -> float:
        return float(self.u.max())

    def norm_sq(self, z) -> float:
        """||z||_U^2 = z^T U z."""
        return float(np.sum(self.u * z * z))

    def inv_norm_sq(self, z) -> float:
        """||z||_{U^{-1}}^2 = z^T U^{-1} z."""
        return float(np.sum(z * z / self.u))

    def __eq__(self, other):
        if not isinstance(other, DiagonalMetric):
            return NotImplemented
        return (self.lower == other.lower and self.upper == other.upper
                and np.array_equal(self.u, other.u))

    __hash__ = None


def soft_threshold(w, tau):
    """sign(w) * max(|w| - tau, 0); |w| == tau maps to exactly 0."""
    return np.sign(w) * np.maximum(np.abs(w) - tau, 0.0)


def _step_vector(U):
    u = U.u if isinstance(U, DiagonalMetric) else np.asarray(U, dtype=np.float64)
    if np.any(~(u > 0)):
        raise MetricError("scaled prox needs strictly positive stepsizes")
    return u


def scaled_prox(reg: Regularizer, U, w):
    """prox of ``reg`` relative to U^{-1}, evaluated at ``w``.

    ``U`` is a :class:`DiagonalMetric` or a raw positive vector (scalar
    broadcasting works too).
    """
    u = _step_vector(U)
    w = np.asarray(w, dtype=np.float64)
    y = w
    if reg.l1:
        y = soft_threshold(w, reg.l1 * u)
    if reg.l2:
        y = y / (1.0 + reg.l2 * u)
    if y is w:
        y = w.copy()
    return y


def prox_optimality_residual(reg: Regularizer, U, w, y) -> float:
    """Euclidean distance from U^{-1}(w - y) to the subdifferential of R at y.

    Vanishes exactly when ``y`` is the scaled prox of ``w``.
    """
    u = _step_vector(U)
    w = np.asarray(w, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    g = (w - y) / u - reg.l2 * y
    if reg.l1:
        nz = y != 0
        dist = np.where(nz, np.abs(g - reg.l1 * np.sign(y)),
                        np.maximum(np.abs(g) - reg.l1, 0.0))
    else:
        dist = np.abs(g)
    return float(np.linalg.norm(dist))
