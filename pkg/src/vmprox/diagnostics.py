"""Convergence diagnostics, reference solutions and theoretical rate constants."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .model import Regularizer
from .prox import DiagonalMetric, scaled_prox
from .sampling import build_distribution

__all__ = [
    "MaxIterations",
    "RateHypothesisError",
    "ReferenceSolution",
    "RateInputs",
    "BoundReport",
    "gradient_mapping",
    "gradient_mapping_norm",
    "compute_reference",
    "theoretical_rate",
    "inner_contraction",
    "convex_bound_check",
    "estimator_variance_check",
]


class MaxIterations(RuntimeError):
    pass


class RateHypothesisError(ValueError):
    pass


def _diag(U):
    return U.u if isinstance(U, DiagonalMetric) else np.asarray(U, dtype=np.float64)


def gradient_mapping(w, U, smooth, reg: Regularizer, grad=None):
    """G(w) = U^{-1} (w - prox_R^{U^{-1}}(w - U grad F(w))).

    Zero exactly at minimizers of F + R. ``grad`` may pass a precomputed
    grad F(w).
    """
    u = _diag(U)
    w = np.asarray(w, dtype=np.float64)
    g = smooth.full_gradient(w) if grad is None else grad
    return (w - scaled_prox(reg, u, w - u * g)) / u


def gradient_mapping_norm(w, U, smooth, reg, grad=None) -> float:
    """||G(w)||_U."""
    u = _diag(U)
    G = gradient_mapping(w, u, smooth, reg, grad)
    return float(np.sqrt(np.sum(u * G * G)))


@dataclass(frozen=True)
class ReferenceSolution:
    w_star: np.ndarray
    p_star: float
    residual: float
    iterations: int
    tol: float

    def to_dict(self):
        return {
            "p_star": self.p_star,
            "residual": self.residual,
            "iterations": self.iterations,
            "tol": self.tol,
            "w_star": self.w_star.tolist(),
        }

    @classmethod
    def from_dict(cls, data):
        return cls(np.asarray(data["w_star"], dtype=np.float64), float(data["p_star"]),
                   float(data["residual"]), int(data["iterations"]), float(data["tol"]))


def compute_reference(smooth, reg: Regularizer, tol: float = 1e-13,
                      max_iter: int = 200_000, w0=None,
                      polish_epochs: int = 0, seed: int = 0) -> ReferenceSolution:
    """High-accuracy minimizer of F + R.

    Runs accelerated proximal gradient with step 1/L_Omega (uniform
    sampling constant, i.e. max_i L_i) and gradient-based restarts until
    the Euclidean norm of the gradient mapping with metric (1/L_Omega) I
    drops to ``tol``. Raises :class:`MaxIterations` otherwise.

    ``polish_epochs > 0`` adds a Prox-SVRG polish whose result is kept only
    if it lowers the objective and still meets ``tol``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    L = build_distribution(smooth.lipschitz, "uniform").l_omega
    step = 1.0 / L

    x = np.zeros(smooth.d) if w0 is None else np.array(w0, dtype=np.float64)
    y = x.copy()
    theta = 1.0
    residual = np.inf
    for it in range(1, max_iter + 1):
        g = smooth.full_gradient(y)
        x_new = scaled_prox(reg, step, y - step * g)
        residual = L * float(np.linalg.norm(y - x_new))
        if residual <= tol:
            x = y
            break
        theta_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * theta * theta))
        if (y - x_new) @ (x_new - x) > 0:
            # momentum points uphill: restart
            theta_new = 1.0
            y = x_new.copy()
        else:
            y = x_new + ((theta - 1.0) / theta_new) * (x_new - x)
        x, theta = x_new, theta_new
    else:
        raise MaxIterations(
            f"gradient-mapping norm {residual:.3e} still above tol {tol:.1e} "
            f"after {max_iter} iterations")

    p_star = smooth.value(x) + reg.value(x)
    ref = ReferenceSolution(x, p_star, residual, it, tol)

    if polish_epochs > 0:
        from .solvers import SolverConfig, run

        cfg = SolverConfig(algorithm="prox-svrg", m=2 * smooth.n, b=1, K=polish_epochs,
                           eta0=0.1 / L, seed=seed)
        trace = run(cfg, smooth, reg, w0=x, keep_output=False)
        w = trace.w_last
        res = float(np.linalg.norm(gradient_mapping(w, step, smooth, reg)))
        p = smooth.value(w) + reg.value(w)
        if p < p_star and res <= tol:
            ref = ReferenceSolution(w, p, res, it, tol)
    return ref


@dataclass(frozen=True)
class RateInputs:
    """Constants entering the linear-rate factors.

    ``mu`` is the strong convexity modulus of P (or the quadratic-growth
    modulus nu in QGC mode); the caller supplies it.
    """

    mu: float
    l_omega: float
    u_min: float
    u_max: float
    m: int
    b: int

    def __post_init__(self):
        for name in ("mu", "l_omega", "u_min", "u_max", "m", "b"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.u_min > self.u_max:
            raise ValueError("u_min exceeds u_max")


def theoretical_rate(inputs: RateInputs, mode: str = "strongly_convex") -> float:
    """Per-epoch contraction factor of E[P(w~^k) - P*].

        rho = 1 / (m mu u_min (1 - c)) + 4 L_Omega u_max / (m b (1 - c)),
        c   = 8 L_Omega u_max / b,

    valid only when c < 1. ``mode="qgc"`` reads ``mu`` as the quadratic
    growth modulus; the formula is otherwise identical. Linear convergence
    is guaranteed when the returned value is below 1.
    """
    if mode not in ("strongly_convex", "qgc"):
        raise ValueError(f"unknown mode {mode!r}")
    c = 8.0 * inputs.l_omega * inputs.u_max / inputs.b
    if c >= 1.0:
        raise RateHypothesisError(f"8 L_Omega u_max / b = {c:.6g} must be < 1")
    denom = inputs.m * (1.0 - c)
    return (1.0 / (denom * inputs.mu * inputs.u_min)
            + 4.0 * inputs.l_omega * inputs.u_max / (denom * inputs.b))


def inner_contraction(mu_f: float, l_omega: float, u_min: float, u_max: float) -> float:
    """Inner-loop factor 1 - mu_F^2 u_min (2/L_Omega - u_max) for strongly convex F.

    Requires u_max <= 2/L_Omega.
    """
    if u_max > 2.0 / l_omega:
        raise RateHypothesisError("inner contraction needs u_max <= 2 / L_Omega")
    return 1.0 - mu_f ** 2 * u_min * (2.0 / l_omega - u_max)


@dataclass(frozen=True)
class BoundReport:
    name: str
    lhs: float
    rhs: float
    stderr: float
    passed: bool
    hypothesis_ok: bool = True
    note: str = ""

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        hyp = "" if self.hypothesis_ok else " [hypothesis violated]"
        return (f"{status} {self.name}: lhs={self.lhs:.6e} rhs={self.rhs:.6e} "
                f"se={self.stderr:.2e}{hyp}{(' ' + self.note) if self.note else ''}")


def convex_bound_check(g_norms_sq: Sequence[float], total_steps: Sequence[int],
                       gap0: float, u_max: Optional[Sequence[float]] = None,
                       l_omega: Optional[float] = None, n_se: float = 2.0) -> BoundReport:
    """Compare E||G_{U^{-1}}(w_a)||_U^2 with 6 (P(w~0) - P*) / T.

    One entry per seeded run: the squared U-norm of the gradient mapping at
    the sampled output and that run's total inner-step count T. Runs may
    differ in T, so the test statistic is ||G||^2 - 6 gap / T per run; the
    check passes when its mean is at most ``n_se`` standard errors above 0.
    ``u_max``/``l_omega`` verify the U <= 1/(3 L_Omega) hypothesis.
    """
    g2 = np.asarray(g_norms_sq, dtype=np.float64)
    T = np.asarray(total_steps, dtype=np.float64)
    if g2.shape != T.shape or g2.size == 0:
        raise ValueError("need one (||G||^2, T) pair per run")
    bound = 6.0 * gap0 / T
    diff = g2 - bound
    se = float(np.std(diff, ddof=1) / np.sqrt(diff.size)) if diff.size > 1 else 0.0
    hyp = True
    if u_max is not None and l_omega is not None:
        hyp = bool(np.max(u_max) <= 1.0 / (3.0 * l_omega) * (1 + 1e-12))
    lhs = float(np.mean(g2))
    rhs = float(np.mean(bound))
    passed = float(np.mean(diff)) <= n_se * se + 1e-15
    return BoundReport("convex gradient-mapping bound", lhs, rhs, se, passed and hyp, hyp,
                       note=f"runs={g2.size}")


def estimator_variance_check(instance, b: int = 1, t: int = 2, U=None, w0=None,
                             scheme: str = "uniform", p_star: Optional[float] = None,
                             exact: bool = True, samples: int = 100_000, seed: int = 0):
    """Check the recursive-estimator variance bounds at inner step ``t``.

    Returns two reports: the iterate-difference bound
    E||v_t - grad F(w_t)||^2 <= (L_Omega^2 / b) E||w_t - w_{t-1}||^2, and (if
    ``p_star`` is known) the objective-gap bound with right-hand side
    (4 L_Omega / b) E[P(w_t) - P* + P(w_{t-1}) - P*]. Moments come from the
    oracle's exact path enumeration or its Monte-Carlo twin.
    """
    from . import oracle

    if exact:
        mom = oracle.enumerate_expectation(instance, "srg", depth=t, b=b, U=U, w0=w0,
                                           scheme=scheme)
    else:
        mom = oracle.monte_carlo_expectation(instance, "srg", depth=t, b=b, U=U, w0=w0,
                                             scheme=scheme, samples=samples, seed=seed)
    L_omega = mom.l_omega
    lhs = float(mom.var[t])
    rhs = L_omega ** 2 / b * float(mom.step_sq[t])
    se = float(mom.var_se[t]) if mom.var_se is not None else 0.0
    reports = [BoundReport(f"variance vs iterate step (t={t}, b={b})", lhs, rhs, se,
                           lhs <= rhs + 2 * se + 1e-14)]
    if p_star is not None:
        rhs2 = 4.0 * L_omega / b * float(mom.obj[t] - p_star + mom.obj[t - 1] - p_star)
        reports.append(BoundReport(f"variance vs objective gap (t={t}, b={b})", lhs, rhs2, se,
                                   lhs <= rhs2 + 2 * se + 1e-14))
    return reports
