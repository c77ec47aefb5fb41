"""Composite objective P(w) = F(w) + R(w) for ridge-regularized logistic regression.

The smooth part F is the average of f_i(w) = log(1 + exp(-b_i a_i^T w)) +
(lambda2/2)||w||^2; R is a separable regularizer handled through its prox.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import expit

from .data_io import Dataset, SmoothnessProfile, component_lipschitz

__all__ = [
    "Regularizer",
    "SmoothPart",
    "component_grad",
    "full_gradient",
    "objective",
    "sigmoid",
]


def sigmoid(x: float) -> float:
    """Overflow-free logistic function for a scalar."""
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


@dataclass(frozen=True)
class Regularizer:
    """R(w) = l1 * ||w||_1 + (l2 / 2) * ||w||_2^2 with nonnegative weights."""

    l1: float = 0.0
    l2: float = 0.0

    def __post_init__(self):
        for name in ("l1", "l2"):
            val = getattr(self, name)
            if not (np.isfinite(val) and val >= 0):
                raise ValueError(f"regularizer weight {name} must be finite and >= 0, got {val}")
        object.__setattr__(self, "l1", float(self.l1))
        object.__setattr__(self, "l2", float(self.l2))

    @classmethod
    def zero(cls):
        return cls()

    @classmethod
    def lasso(cls, l1):
        return cls(l1=l1)

    @classmethod
    def ridge(cls, l2):
        return cls(l2=l2)

    @classmethod
    def elastic_net(cls, l1, l2):
        return cls(l1=l1, l2=l2)

    @property
    def kind(self) -> str:
        if self.l1 > 0 and self.l2 > 0:
            return "ElasticNet"
        if self.l1 > 0:
            return "L1"
        if self.l2 > 0:
            return "L2"
        return "Zero"

    def value(self, w) -> float:
        w = np.asarray(w, dtype=np.float64)
        val = 0.0
        if self.l1:
            val += self.l1 * float(np.sum(np.abs(w)))
        if self.l2:
            val += 0.5 * self.l2 * float(w @ w)
        return val


class SmoothPart:
    """F(w) = (1/n) sum_i log(1 + exp(-b_i a_i^T w)) + (lambda2/2)||w||^2.

    Any object exposing ``n``, ``d``, ``value``, ``full_gradient``,
    ``component_grad``, ``grad_diff_sum`` and ``lipschitz`` can stand in for
    this class in the solvers.
    """

    def __init__(self, dataset: Dataset, lambda2: float = 0.0):
        if not (np.isfinite(lambda2) and lambda2 >= 0):
            raise ValueError(f"lambda2 must be finite and >= 0, got {lambda2}")
        self.dataset = dataset
        self.lambda2 = float(lambda2)
        X = dataset.X
        self._X = X
        self._XT = X.T.tocsr()
        self._y = dataset.y
        # plain-Python views keep the per-sample inner loop cheap
        self._indptr = X.indptr.tolist()
        self._indices = X.indices
        self._data = X.data
        self._labels = dataset.y.tolist()

    @property
    def n(self) -> int:
        return self.dataset.n

    @property
    def d(self) -> int:
        return self.dataset.d

    @cached_property
    def lipschitz(self) -> SmoothnessProfile:
        return component_lipschitz(self.dataset, self.lambda2)

    def margins(self, w):
        return self._y * (self._X @ w)

    def value(self, w) -> float:
        w = np.asarray(w, dtype=np.float64)
        loss = np.logaddexp(0.0, -self.margins(w))
        return float(np.mean(loss)) + 0.5 * self.lambda2 * float(w @ w)

    def component_value(self, i: int, w) -> float:
        cols, vals = self.dataset.row(i)
        z = self._labels[i] * float(vals @ w[cols])
        return float(np.logaddexp(0.0, -z)) + 0.5 * self.lambda2 * float(w @ w)

    def component_grad(self, i: int, w):
        w = np.asarray(w, dtype=np.float64)
        lo, hi = self._indptr[i], self._indptr[i + 1]
        cols = self._indices[lo:hi]
        vals = self._data[lo:hi]
        bi = self._labels[i]
        coef = -bi * sigmoid(-bi * float(vals @ w[cols]))
        g = self.lambda2 * w
        g[cols] += coef * vals
        return g

    def full_gradient(self, w):
        w = np.asarray(w, dtype=np.float64)
        coef = -self._y * expit(-self.margins(w))
        return (self._XT @ coef) / self.n + self.lambda2 * w

    def grad_diff_sum(self, idx, weights, w_new, w_old):
        """sum_j weights[j] * (grad f_{idx[j]}(w_new) - grad f_{idx[j]}(w_old))."""
        out = np.zeros(self.d)
        indptr, indices, data, labels = self._indptr, self._indices, self._data, self._labels
        total = 0.0
        for i, c in zip(idx, weights):
            lo, hi = indptr[i], indptr[i + 1]
            cols = indices[lo:hi]
            vals = data[lo:hi]
            bi = labels[i]
            z_new = bi * float(vals @ w_new[cols])
            z_old = bi * float(vals @ w_old[cols])
            coef = -bi * (sigmoid(-z_new) - sigmoid(-z_old)) * c
            out[cols] += coef * vals
            total += c
        if self.lambda2:
            out += (self.lambda2 * total) * (w_new - w_old)
        return out


def component_grad(smooth: SmoothPart, i: int, w):
    return smooth.component_grad(i, w)


def full_gradient(smooth: SmoothPart, w):
    return smooth.full_gradient(w)


def objective(smooth: SmoothPart, reg: Regularizer, w) -> float:
    """P(w) = F(w) + R(w)."""
    return smooth.value(w) + reg.value(w)
