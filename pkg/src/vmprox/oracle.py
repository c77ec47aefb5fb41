"""Brute-force reference computations for validating the solver stack.

Nothing here calls into ``prox``, ``metric`` or ``solvers``: gradients,
proximal steps and expectations are recomputed from scratch (finite
differences, bracketing searches, grid searches, full enumeration of the
mini-batch sample space) so that they can serve as independent checks.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data_io import SmoothnessProfile
from .model import Regularizer

__all__ = [
    "PathExplosion",
    "TinyInstance",
    "Moments",
    "finite_diff_grad",
    "prox_1d_oracle",
    "prox_1d_weights",
    "prox_oracle",
    "grid_metric_oracle",
    "random_tiny_instance",
    "enumerate_expectation",
    "monte_carlo_expectation",
]

_INV_PHI = (np.sqrt(5.0) - 1.0) / 2.0


class PathExplosion(RuntimeError):
    pass


def finite_diff_grad(f, w, h: float = 1e-5):
    """Central differences (f(w + h e_i) - f(w - h e_i)) / 2h."""
    if not h > 0:
        raise ValueError("step h must be positive")
    w = np.asarray(w, dtype=np.float64)
    g = np.empty_like(w)
    e = np.zeros_like(w)
    for i in range(w.size):
        e[i] = h
        g[i] = (f(w + e) - f(w - e)) / (2.0 * h)
        e[i] = 0.0
    return g


def _reg_value_1d(y, l1, l2):
    return l1 * np.abs(y) + 0.5 * l2 * y * y


def prox_1d_oracle(w, u, reg: Regularizer, iters: int = 200):
    """argmin_y (y - w)^2 / (2u) + R(y) by bracketing search (elementwise).

    A golden-section pass over [w - 10(1+|w|), w + 10(1+|w|)] narrows the
    bracket; bisection on the one-sided derivative then pins the minimizer
    down to rounding level, and the kink at 0 is resolved exactly by its
    subgradient condition |w| <= l1 * u.
    """
    return prox_1d_weights(w, u, reg.l1, reg.l2, iters)


def prox_1d_weights(w, u, l1, l2=0.0, iters: int = 200):
    """:func:`prox_1d_oracle` with (possibly elementwise) weights l1, l2."""
    w = np.asarray(w, dtype=np.float64)
    u = np.broadcast_to(np.asarray(u, dtype=np.float64), w.shape)
    if np.any(u <= 0):
        raise ValueError("u must be positive")
    l1 = np.broadcast_to(np.asarray(l1, dtype=np.float64), w.shape)
    l2 = np.broadcast_to(np.asarray(l2, dtype=np.float64), w.shape)

    def phi(y):
        return (y - w) ** 2 / (2.0 * u) + _reg_value_1d(y, l1, l2)

    lo = w - 10.0 * (1.0 + np.abs(w))
    hi = w + 10.0 * (1.0 + np.abs(w))
    a = hi - _INV_PHI * (hi - lo)
    b = lo + _INV_PHI * (hi - lo)
    fa, fb = phi(a), phi(b)
    for _ in range(60):
        left = fa < fb
        hi = np.where(left, b, hi)
        lo = np.where(left, lo, a)
        a_new = hi - _INV_PHI * (hi - lo)
        b_new = lo + _INV_PHI * (hi - lo)
        a, b = a_new, b_new
        fa, fb = phi(a), phi(b)

    def dright(y):
        return (y - w) / u + l2 * y + np.where(y >= 0, l1, -l1)

    # value comparisons only resolve the minimizer to ~sqrt(eps); re-bracket
    # on the derivative sign before bisecting
    pad = 1e-6 * (1.0 + np.abs(lo) + np.abs(hi))
    lo, hi = lo - pad, hi + pad
    for _ in range(200):
        bad_lo = dright(lo) >= 0
        bad_hi = dright(hi) < 0
        if not (np.any(bad_lo) or np.any(bad_hi)):
            break
        lo = np.where(bad_lo, lo - 2 * pad, lo)
        hi = np.where(bad_hi, hi + 2 * pad, hi)
        pad = 2 * pad

    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        up = dright(mid) >= 0
        hi = np.where(up, mid, hi)
        lo = np.where(up, lo, mid)
        if np.all(hi - lo <= 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(hi))):
            break
    y = 0.5 * (lo + hi)
    y = np.where((l1 > 0) & (np.abs(w) <= l1 * u), 0.0, y)
    return y if y.ndim else float(y)


def prox_oracle(reg: Regularizer, u, w):
    """Coordinate-wise scaled prox computed with :func:`prox_1d_oracle`."""
    return np.asarray(prox_1d_oracle(w, u, reg), dtype=np.float64)


def grid_metric_oracle(s, y, u_prev, omega, lower, upper, points: int = 201, rounds: int = 40):
    """Per-coordinate minimizer of (s_i - u y_i)^2 + omega (u - u_prev_i)^2 on [lower, upper].

    Dense grid over the box, then repeated zooms around the best grid
    point.
    """
    s, y, u_prev = (np.atleast_1d(np.asarray(v, dtype=np.float64)) for v in (s, y, u_prev))
    lo = np.full(s.shape, float(lower))
    hi = np.full(s.shape, float(upper))
    best = lo.copy()
    for _ in range(rounds):
        grid = lo[:, None] + (hi - lo)[:, None] * np.linspace(0.0, 1.0, points)[None, :]
        vals = (s[:, None] - grid * y[:, None]) ** 2 + omega * (grid - u_prev[:, None]) ** 2
        j = np.argmin(vals, axis=1)
        best = grid[np.arange(s.size), j]
        step = (hi - lo) / (points - 1)
        lo = np.maximum(best - step, float(lower))
        hi = np.minimum(best + step, float(upper))
        if np.all(hi - lo < 1e-13):
            break
    return best


@dataclass
class TinyInstance:
    """Dense toy problem for exhaustive checks.

    Components are f_i(w) = loss(b_i, a_i^T w) + (l2/2)||w||^2 with logistic
    or squared loss; ``reg`` is the nonsmooth part. The object also exposes
    the smooth-part interface the solvers expect.
    """

    A: np.ndarray
    labels: np.ndarray
    loss: str = "logistic"
    l2: float = 0.0
    reg: Regularizer = Regularizer()

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=np.float64))
        self.labels = np.asarray(self.labels, dtype=np.float64)
        if self.loss not in ("logistic", "squared"):
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.labels.shape != (self.A.shape[0],):
            raise ValueError("labels do not match rows")

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def d(self):
        return self.A.shape[1]

    @property
    def lipschitz(self) -> SmoothnessProfile:
        sq = np.sum(self.A * self.A, axis=1)
        scale = 0.25 if self.loss == "logistic" else 1.0
        return SmoothnessProfile(scale * sq + self.l2)

    def _loss_and_slope(self, z, bi):
        """Loss value and derivative with respect to the linear predictor z."""
        if self.loss == "squared":
            r = bi - z
            return 0.5 * r * r, -r
        m = bi * z
        # log(1 + e^{-m}) and its derivative, evaluated without overflow
        val = np.maximum(-m, 0.0) + np.log1p(np.exp(-np.abs(m)))
        e = np.exp(-np.abs(m))
        sig_neg = np.where(m >= 0, e / (1.0 + e), 1.0 / (1.0 + e))
        return val, -bi * sig_neg

    def component_value(self, i, w):
        val, _ = self._loss_and_slope(self.A[i] @ w, self.labels[i])
        return float(val) + 0.5 * self.l2 * float(w @ w)

    def component_grad(self, i, w):
        w = np.asarray(w, dtype=np.float64)
        _, slope = self._loss_and_slope(self.A[i] @ w, self.labels[i])
        return slope * self.A[i] + self.l2 * w

    def component_grads(self, idx, W):
        """Row-wise gradients for index array ``idx`` at points ``W`` (same leading shape)."""
        rows = self.A[idx]
        z = np.sum(rows * W, axis=-1)
        _, slope = self._loss_and_slope(z, self.labels[idx])
        return slope[..., None] * rows + self.l2 * W

    def value(self, w):
        w = np.asarray(w, dtype=np.float64)
        val, _ = self._loss_and_slope(self.A @ w, self.labels)
        return float(np.mean(val)) + 0.5 * self.l2 * float(w @ w)

    def full_gradient(self, w):
        w = np.asarray(w, dtype=np.float64)
        _, slope = self._loss_and_slope(self.A @ w, self.labels)
        return self.A.T @ slope / self.n + self.l2 * w

    def full_gradients(self, W):
        """grad F at each row of ``W`` (shape S x d)."""
        _, slope = self._loss_and_slope(W @ self.A.T, self.labels[None, :])
        return slope @ self.A / self.n + self.l2 * W

    def grad_diff_sum(self, idx, weights, w_new, w_old):
        out = np.zeros(self.d)
        for i, c in zip(idx, weights):
            out += c * (self.component_grad(i, w_new) - self.component_grad(i, w_old))
        return out

    def objective(self, w):
        return self.value(w) + self.reg.l1 * float(np.sum(np.abs(w))) \
            + 0.5 * self.reg.l2 * float(np.dot(w, w))

    def objectives(self, W):
        vals, _ = self._loss_and_slope(W @ self.A.T, self.labels[None, :])
        return (np.mean(vals, axis=1) + 0.5 * self.l2 * np.sum(W * W, axis=1)
                + self.reg.l1 * np.sum(np.abs(W), axis=1)
                + 0.5 * self.reg.l2 * np.sum(W * W, axis=1))


def random_tiny_instance(rng, n=3, d=3, loss="logistic", l2=0.1, l1=0.05) -> TinyInstance:
    A = rng.normal(size=(n, d))
    if loss == "logistic":
        labels = rng.choice([-1.0, 1.0], size=n)
    else:
        labels = rng.normal(size=n)
    return TinyInstance(A, labels, loss=loss, l2=l2, reg=Regularizer(l1=l1))


def _distribution(instance: TinyInstance, scheme: str):
    L = instance.lipschitz.per_component
    n = L.size
    if scheme == "uniform":
        q = np.full(n, 1.0 / n)
    elif scheme == "importance":
        q = L / L.sum()
    elif scheme.startswith("point:"):
        # point mass on one index, other entries get zero probability
        q = np.zeros(n)
        q[int(scheme.split(":", 1)[1])] = 1.0
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    with np.errstate(divide="ignore"):
        l_omega = float(np.max(np.where(q > 0, L / (n * q), 0.0)))
    return q, l_omega


@dataclass
class Moments:
    """Expectations along the inner loop, indexed by inner step t.

    Arrays have length depth + 2 so that index t refers to w_t and v_t
    (v is defined for t <= depth; w up to depth + 1; w_1 = w_0).
    """

    mean_v: np.ndarray
    mean_grad: np.ndarray
    var: np.ndarray
    step_sq: np.ndarray
    step_uinv_next: np.ndarray
    obj: np.ndarray
    l_omega: float
    cond_error: float = 0.0
    paths: int = 0
    mean_v_se: Optional[np.ndarray] = None
    mean_grad_se: Optional[np.ndarray] = None
    var_se: Optional[np.ndarray] = None


def _default_u(instance, l_omega, U):
    if U is None:
        return np.full(instance.d, 0.5 / l_omega)
    return np.broadcast_to(np.asarray(getattr(U, "u", U), dtype=np.float64), (instance.d,)).copy()


def _batch_weight(q, batch):
    return float(np.prod(q[list(batch)]))


def enumerate_expectation(instance: TinyInstance, kind: str = "srg", depth: int = 2, b: int = 1,
                          U=None, w0=None, scheme: str = "uniform",
                          max_paths: int = 1_000_000) -> Moments:
    """Exact moments of the inner loop by weighting every mini-batch sequence.

    Each inner step draws ``b`` indices i.i.d. from q; a path of ``depth``
    steps has probability prod q_i. ``kind`` is ``"srg"`` (recursive
    estimator) or ``"svrg"`` (anchored at w_0).
    """
    n, d = instance.n, instance.d
    if n ** (b * depth) > max_paths:
        raise PathExplosion(f"{n}^({b}*{depth}) paths exceed the budget of {max_paths}")
    if kind not in ("srg", "svrg"):
        raise ValueError(f"unknown estimator kind {kind!r}")
    q, l_omega = _distribution(instance, scheme)
    u = _default_u(instance, l_omega, U)
    w0 = np.zeros(d) if w0 is None else np.asarray(w0, dtype=np.float64)
    g0 = instance.full_gradient(w0)
    support = [i for i in range(n) if q[i] > 0]
    batches = list(itertools.product(support, repeat=b))

    T = depth + 2
    mean_v = np.zeros((T, d))
    mean_grad = np.zeros((T, d))
    var = np.zeros(T)
    step_sq = np.zeros(T)
    step_uinv = np.zeros(T)
    obj = np.zeros(T)
    cond_err = [0.0]
    paths = [0]

    def grad_term(i, w_new, w_old):
        return (instance.component_grad(i, w_new) - instance.component_grad(i, w_old)) / (n * q[i])

    # t = 0 and t = 1 are the deterministic start w_1 = w_0, v_0 = grad F(w_0)
    mean_v[0] = g0
    mean_grad[0] = mean_grad[1] = g0
    obj[0] = obj[1] = instance.objective(w0)

    def visit(t, w_t, w_prev, v_prev, prob):
        # expectations at step t, averaging over the batch I_t
        g_t = instance.full_gradient(w_t)
        g_prev = instance.full_gradient(w_prev)
        cond_mean = np.zeros(d)
        for batch in batches:
            pb = _batch_weight(q, batch)
            diff = sum(grad_term(i, w_t, w_prev if kind == "srg" else w0) for i in batch) / b
            v_t = diff + (v_prev if kind == "srg" else g0)
            cond_mean += pb * v_t
            w_next = prox_oracle(instance.reg, u, w_t - u * v_t)
            p = prob * pb
            mean_v[t] += p * v_t
            var[t] += p * float(np.sum((v_t - g_t) ** 2))
            step_uinv[t] += p * float(np.sum((w_next - w_t) ** 2 / u))
            mean_grad[t + 1] += p * instance.full_gradient(w_next)
            step_sq[t + 1] += p * float(np.sum((w_next - w_t) ** 2))
            obj[t + 1] += p * instance.objective(w_next)
            if t < depth:
                visit(t + 1, w_next, w_t, v_t, p)
            else:
                paths[0] += 1
        expected = g_t - g_prev + v_prev if kind == "srg" else g_t
        cond_err[0] = max(cond_err[0], float(np.max(np.abs(cond_mean - expected))))

    visit(1, w0, w0, g0, 1.0)
    return Moments(mean_v, mean_grad, var, step_sq, step_uinv, obj, l_omega,
                   cond_error=cond_err[0], paths=paths[0])


def monte_carlo_expectation(instance: TinyInstance, kind: str = "srg", depth: int = 2, b: int = 1,
                            U=None, w0=None, scheme: str = "uniform", samples: int = 100_000,
                            seed: int = 0) -> Moments:
    """Simulation counterpart of :func:`enumerate_expectation` (vectorized over paths)."""
    n, d = instance.n, instance.d
    q, l_omega = _distribution(instance, scheme)
    u = _default_u(instance, l_omega, U)
    rng = np.random.default_rng(seed)
    w0 = np.zeros(d) if w0 is None else np.asarray(w0, dtype=np.float64)
    g0 = instance.full_gradient(w0)
    S = int(samples)
    T = depth + 2

    W_prev = np.tile(w0, (S, 1))
    W_t = W_prev.copy()
    V = np.tile(g0, (S, 1))
    cdf = np.cumsum(q)
    cdf[-1] = 1.0

    mean_v = np.zeros((T, d))
    mean_v_se = np.zeros((T, d))
    mean_grad = np.zeros((T, d))
    mean_grad_se = np.zeros((T, d))
    var = np.zeros(T)
    var_se = np.zeros(T)
    step_sq = np.zeros(T)
    step_uinv = np.zeros(T)
    obj = np.zeros(T)
    mean_v[0] = g0
    mean_grad[0] = mean_grad[1] = g0
    obj[0] = obj[1] = instance.objective(w0)

    for t in range(1, depth + 1):
        idx = np.minimum(np.searchsorted(cdf, rng.random((S, b)), side="right"), n - 1)
        anchor = W_prev if kind == "srg" else np.tile(w0, (S, 1))
        diff = np.zeros((S, d))
        for j in range(b):
            ij = idx[:, j]
            diff += (instance.component_grads(ij, W_t) - instance.component_grads(ij, anchor)) \
                / (n * q[ij])[:, None]
        diff /= b
        V = diff + (V if kind == "srg" else g0[None, :])
        G_t = instance.full_gradients(W_t)
        W_next = prox_oracle(instance.reg, u[None, :], W_t - u[None, :] * V)

        err = np.sum((V - G_t) ** 2, axis=1)
        mean_v[t] = V.mean(axis=0)
        mean_v_se[t] = V.std(axis=0, ddof=1) / np.sqrt(S)
        var[t] = err.mean()
        var_se[t] = err.std(ddof=1) / np.sqrt(S)
        step_uinv[t] = np.mean(np.sum((W_next - W_t) ** 2 / u[None, :], axis=1))
        G_next = instance.full_gradients(W_next)
        mean_grad[t + 1] = G_next.mean(axis=0)
        mean_grad_se[t + 1] = G_next.std(axis=0, ddof=1) / np.sqrt(S)
        step_sq[t + 1] = np.mean(np.sum((W_next - W_t) ** 2, axis=1))
        obj[t + 1] = np.mean(instance.objectives(W_next))
        W_prev, W_t = W_t, W_next

    return Moments(mean_v, mean_grad, var, step_sq, step_uinv, obj, l_omega, paths=S,
                   mean_v_se=mean_v_se, mean_grad_se=mean_grad_se, var_se=var_se)
