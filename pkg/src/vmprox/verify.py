"""Self-check suite behind ``vmprox verify``.

Each check pits a library routine against an oracle or an inequality that
must hold for it, on seeded random instances, and reports pass/fail.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from . import oracle
from .diagnostics import RateHypothesisError, RateInputs, theoretical_rate
from .metric import MetricConfig, SecantPair, bb_bounds, diagonal_bb_update, secant_objective
from .model import Regularizer, SmoothPart
from .prox import prox_optimality_residual, scaled_prox
from .solvers import SolverConfig, run
from .synthetic import make_logistic_data


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name:<38s} {self.detail}"


def _random_reg(rng):
    return Regularizer(l1=float(10 ** rng.uniform(-3, 0)),
                       l2=float(rng.choice([0.0, 10 ** rng.uniform(-3, 0)])))


def check_prox_oracle(rng, prox_fn, trials=2000):
    worst = 0.0
    for _ in range(trials // 100):
        reg = _random_reg(rng)
        w = rng.normal(size=100) * 10 ** rng.uniform(-2, 1, 100)
        u = 10 ** rng.uniform(-3, 1, 100)
        worst = max(worst, float(np.max(np.abs(prox_fn(reg, u, w) - oracle.prox_oracle(reg, u, w)))))
    return CheckResult("prox oracle equivalence", worst <= 1e-8, f"max abs err {worst:.2e}")


def check_nonexpansive(rng, prox_fn, trials=500):
    worst = -np.inf
    for _ in range(trials):
        reg = _random_reg(rng)
        d = 6
        u = 10 ** rng.uniform(-2, 1, d)
        w1, w2 = rng.normal(size=(2, d)) * 3
        lhs = np.sum((prox_fn(reg, u, w1) - prox_fn(reg, u, w2)) ** 2 / u)
        rhs = np.sum((w1 - w2) ** 2 / u)
        worst = max(worst, (lhs - rhs) / max(rhs, 1e-300))
    return CheckResult("firm nonexpansiveness", worst <= 1e-12, f"max relative excess {worst:.2e}")


def check_three_point(rng, prox_fn, trials=500):
    worst = -np.inf
    for _ in range(trials):
        reg = _random_reg(rng)
        d = 5
        u = 10 ** rng.uniform(-2, 1, d)
        w, z = rng.normal(size=(2, d)) * 2
        wp = prox_fn(reg, u, w)

        def half(a):
            return 0.5 * np.sum(a * a / u)

        lhs = reg.value(wp) + half(wp - w)
        rhs = reg.value(z) + half(z - w) - half(wp - z)
        worst = max(worst, lhs - rhs)
    return CheckResult("three-point property", worst <= 1e-10, f"max excess {worst:.2e}")


def check_prox_residual(rng, prox_fn, trials=500):
    worst = 0.0
    for _ in range(trials):
        reg = _random_reg(rng)
        u = 10 ** rng.uniform(-2, 1, 8)
        w = rng.normal(size=8) * 2
        worst = max(worst, prox_optimality_residual(reg, u, w, prox_fn(reg, u, w)))
    return CheckResult("prox subdifferential residual", worst <= 1e-10, f"max residual {worst:.2e}")


def check_metric(rng, trials=300):
    worst = 0.0
    box_ok = True
    opt_ok = True
    for _ in range(trials):
        d = int(rng.integers(1, 17))
        s = rng.normal(size=d)
        y = s * 10 ** rng.uniform(-1, 1, d) + 0.3 * rng.normal(size=d)
        if s @ y <= 0:
            y = -y
        if s @ y <= 0:
            continue
        m = int(rng.integers(1, 50))
        omega = float(10 ** rng.uniform(-2, 2))
        u_prev = 10 ** rng.uniform(-3, 0, d)
        a1, a2 = bb_bounds(SecantPair(s, y), m)
        U = diagonal_bb_update(SecantPair(s, y), u_prev, MetricConfig(omega=omega, m=m), a1, a2)
        ref = oracle.grid_metric_oracle(s, y, u_prev, omega, a2, a1)
        worst = max(worst, float(np.max(np.abs(U.u - ref))))
        box_ok &= bool(np.all(U.u >= a2) and np.all(U.u <= a1))
        v = rng.uniform(a2, a1, d)
        opt_ok &= (secant_objective(U.u, SecantPair(s, y), u_prev, omega)
                   <= secant_objective(v, SecantPair(s, y), u_prev, omega) + 1e-12)
    return [
        CheckResult("metric oracle equivalence", worst <= 1e-6, f"max abs err {worst:.2e}"),
        CheckResult("metric box respect", box_ok, "alpha2 <= u_i <= alpha1"),
        CheckResult("metric subproblem optimality", opt_ok, "no feasible point does better"),
    ]


def check_gradients(rng, trials=100):
    worst = 0.0
    for _ in range(trials):
        n, d = int(rng.integers(1, 8)), int(rng.integers(1, 6))
        ds = make_logistic_data(n, d, seed=int(rng.integers(1 << 31)), normalize=False)
        sm = SmoothPart(ds, float(rng.uniform(0, 0.5)))
        w = rng.normal(size=d)
        i = int(rng.integers(n))
        for exact, f in ((sm.component_grad(i, w), lambda x: sm.component_value(i, x)),
                         (sm.full_gradient(w), sm.value)):
            fd = oracle.finite_diff_grad(f, w, 1e-5)
            worst = max(worst, float(np.linalg.norm(fd - exact) / max(np.linalg.norm(exact), 1e-8)))
    return CheckResult("gradient finite differences", worst <= 1e-6, f"max rel err {worst:.2e}")


def check_estimator_laws(rng):
    results = []
    worst_total = worst_cond = 0.0
    bound_ok = True
    for scheme in ("uniform", "importance"):
        inst = oracle.random_tiny_instance(rng, n=3, d=3)
        for b in (1, 2):
            mom = oracle.enumerate_expectation(inst, "srg", depth=2, b=b, scheme=scheme)
            worst_total = max(worst_total, float(np.max(np.abs(mom.mean_v[:3] - mom.mean_grad[:3]))))
            worst_cond = max(worst_cond, mom.cond_error)
            for t in (1, 2):
                bound_ok &= mom.var[t] <= mom.l_omega ** 2 / b * mom.step_sq[t] + 1e-15
    results.append(CheckResult("estimator total expectation", worst_total <= 1e-12,
                               f"max |E v_t - E grad F(w_t)| {worst_total:.2e}"))
    results.append(CheckResult("estimator conditional expectation", worst_cond <= 1e-12,
                               f"max deviation {worst_cond:.2e}"))
    results.append(CheckResult("estimator variance bound", bool(bound_ok),
                               "E||v_t - grad F||^2 <= L_Omega^2/b E||w_t - w_{t-1}||^2, t <= 2"))
    return results


def check_rate():
    rho = theoretical_rate(RateInputs(mu=1, l_omega=1, u_min=0.1, u_max=0.1, m=100, b=1))
    try:
        theoretical_rate(RateInputs(mu=1, l_omega=1, u_min=0.125, u_max=0.125, m=100, b=1))
        boundary = False
    except RateHypothesisError:
        boundary = True
    ok = abs(rho - 0.52) <= 1e-12 and boundary
    return CheckResult("rate calculator", ok, f"rho={rho:.15f}, boundary rejected={boundary}")


def check_determinism(rng):
    ds = make_logistic_data(60, 4, seed=int(rng.integers(1 << 31)))
    sm = SmoothPart(ds, 1e-2)
    reg = Regularizer(l1=1e-3)
    cfg = SolverConfig("vm-msrgbb", m=10, b=2, K=5, eta0=0.5, seed=7)
    a = run(cfg, sm, reg)
    b = run(SolverConfig("vm-msrgbb", m=10, b=2, K=5, eta0=0.5, seed=7), sm, reg)
    same = np.array_equal(a.column("objective"), b.column("objective")) and np.array_equal(a.w_last, b.w_last)
    return CheckResult("solver determinism", bool(same), "identical traces for equal seeds")


def corrupted_prox(reg, u, w):
    """Deliberately expansive prox used for fault-injection runs."""
    return 1.5 * scaled_prox(reg, u, w)


FAULTS = {"prox": corrupted_prox}


def run_checks(seed: int = 0, prox_fn: Optional[Callable] = None) -> List[CheckResult]:
    prox_fn = prox_fn or scaled_prox
    rng = np.random.default_rng(seed)
    results = [
        check_prox_oracle(rng, prox_fn),
        check_nonexpansive(rng, prox_fn),
        check_three_point(rng, prox_fn),
        check_prox_residual(rng, prox_fn),
    ]
    results += check_metric(rng)
    results.append(check_gradients(rng))
    results += check_estimator_laws(rng)
    results.append(check_rate())
    results.append(check_determinism(rng))
    return results
