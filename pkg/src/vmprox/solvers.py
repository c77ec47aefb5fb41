"""VM-mSRGBB and the variance-reduced proximal baselines.

All solvers share one outer/inner loop. They differ in three switches:

* estimator   -- ``srg`` (recursive, SARAH-style) or ``svrg`` (anchored);
* stepsize    -- ``diagonal-bb`` metric, ``scalar-bb`` or ``constant``;
* inner rule  -- ``random`` t_k ~ U{1..m} or ``fixed`` t_k = m.
"""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .metric import MetricConfig, SecantPair, scalar_bb_step, update_metric
from .model import Regularizer
from .prox import DiagonalMetric, scaled_prox
from .sampling import (
    Reservoir,
    SamplingDistribution,
    build_distribution,
    sample_inner_length,
    sample_minibatch,
)

log = logging.getLogger(__name__)

__all__ = [
    "ALGORITHMS",
    "DivergenceError",
    "EpochRecord",
    "OutputSample",
    "RunTrace",
    "SolverConfig",
    "Variant",
    "canonical_algorithm",
    "inner_loop",
    "run",
    "select_output",
    "srg_estimator_step",
    "svrg_estimator_step",
]

GAP_FLOOR = 1e-16


class DivergenceError(RuntimeError):
    def __init__(self, epoch: int, message: str):
        self.epoch = epoch
        super().__init__(f"epoch {epoch}: {message}")


@dataclass(frozen=True)
class Variant:
    name: str
    estimator: str
    stepsize: str
    inner_rule: str


ALGORITHMS = {
    "vm-msrgbb": Variant("VM-mSRGBB", "srg", "diagonal-bb", "random"),
    "prox-svrg": Variant("Prox-SVRG", "svrg", "constant", "fixed"),
    "prox-svrg-bb": Variant("Prox-SVRG-BB", "svrg", "scalar-bb", "fixed"),
    "ms2gd": Variant("mS2GD", "svrg", "constant", "random"),
    "ms2gd-bb": Variant("mS2GD-BB", "svrg", "scalar-bb", "random"),
    "msarah": Variant("mSARAH", "srg", "constant", "fixed"),
    "msarah-bb": Variant("mSARAH-BB", "srg", "scalar-bb", "fixed"),
}


def canonical_algorithm(tag: str) -> str:
    key = tag.strip().lower().replace("_", "-")
    if key not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {tag!r}; choose from "
                         + ", ".join(v.name for v in ALGORITHMS.values()))
    return key


@dataclass
class SolverConfig:
    """Parameters of one solver run.

    ``eta0`` is the initial scalar metric U_0 = eta0 * I (the constant
    stepsize for non-BB baselines). ``inner_rule`` of None picks the
    algorithm's canonical rule.
    """

    algorithm: str = "vm-msrgbb"
    m: int = 100
    b: int = 1
    K: int = 10
    eta0: float = 0.1
    omega: float = 1.0
    sampling: str = "uniform"
    seed: int = 0
    inner_rule: Optional[str] = None
    step_cap: Optional[float] = None
    eps_floor: float = 1e-12
    max_passes: Optional[float] = None
    divergence_factor: float = 1e3

    def __post_init__(self):
        self.algorithm = canonical_algorithm(self.algorithm)

    @property
    def variant(self) -> Variant:
        return ALGORITHMS[self.algorithm]

    @property
    def rule(self) -> str:
        return self.inner_rule or self.variant.inner_rule

    def metric_config(self) -> MetricConfig:
        return MetricConfig(omega=self.omega, m=self.m, eps_floor=self.eps_floor,
                            step_cap=self.step_cap)

    def validate(self, n: int):
        """Raise ValueError if the configuration cannot run on ``n`` samples."""
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"m must be an integer >= 1, got {self.m}")
        if int(self.b) != self.b or not 1 <= self.b <= n:
            raise ValueError(f"batch size b must lie in [1, n={n}], got {self.b}")
        if int(self.K) != self.K or self.K < 1:
            raise ValueError(f"K must be an integer >= 1, got {self.K}")
        if not (np.isfinite(self.eta0) and self.eta0 > 0):
            raise ValueError(f"eta0 must be positive, got {self.eta0}")
        if self.rule not in ("random", "fixed"):
            raise ValueError(f"inner rule must be 'random' or 'fixed', got {self.rule!r}")
        if self.sampling.lower() not in ("uniform", "importance"):
            raise ValueError(f"unknown sampling scheme {self.sampling!r}")
        if self.max_passes is not None and not self.max_passes > 0:
            raise ValueError("max_passes must be positive")
        self.metric_config()


@dataclass
class EpochRecord:
    epoch: int
    passes: float
    seconds: float
    objective: float
    gap: float
    grad_map_norm: float
    u_min: float
    u_max: float
    alpha1: float
    alpha2: float
    t_k: int


@dataclass
class OutputSample:
    """An inner iterate w_t^k together with the metric of its epoch."""

    w: np.ndarray
    u: np.ndarray
    epoch: int
    t: int


@dataclass
class RunTrace:
    config: SolverConfig
    records: List[EpochRecord] = field(default_factory=list)
    initial_objective: float = float("nan")
    p_star: Optional[float] = None
    w_last: Optional[np.ndarray] = None
    output: Optional[OutputSample] = None
    total_inner_steps: int = 0
    grad_evals: int = 0

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=np.float64)

    def as_rows(self):
        return [asdict(r) for r in self.records]


def srg_estimator_step(smooth, v_prev, w_t, w_prev, batch, dist: SamplingDistribution):
    """Recursive estimator v_t = v_{t-1} + (1/b) sum_i (grad f_i(w_t) - grad f_i(w_{t-1})) / (n q_i)."""
    weights = dist.inv_nq[batch] / len(batch)
    return v_prev + smooth.grad_diff_sum(batch, weights, w_t, w_prev)


def svrg_estimator_step(smooth, v_anchor, w_anchor, w_t, batch, dist: SamplingDistribution):
    """Anchored estimator grad F(w~) + (1/b) sum_i (grad f_i(w_t) - grad f_i(w~)) / (n q_i).

    ``v_anchor`` must be the full gradient at ``w_anchor``.
    """
    weights = dist.inv_nq[batch] / len(batch)
    return v_anchor + smooth.grad_diff_sum(batch, weights, w_t, w_anchor)


def inner_loop(smooth, reg: Regularizer, w0, g0, u, t_k: int, b: int,
               dist: SamplingDistribution, rng: np.random.Generator,
               estimator: str = "srg",
               on_iterate: Optional[Callable[[int, np.ndarray], None]] = None):
    """Run t_k inner steps from w_1 = w_0 = ``w0`` with fixed diagonal ``u``.

    ``g0`` is grad F(w0). ``on_iterate(t, w_t)`` sees every inner iterate
    w_1, ..., w_{t_k}. Returns w_{t_k + 1}.
    """
    u = np.asarray(u, dtype=np.float64)
    w_prev = w0
    w_t = w0
    v = g0
    recursive = estimator == "srg"
    for t in range(1, t_k + 1):
        if on_iterate is not None:
            on_iterate(t, w_t)
        batch = sample_minibatch(dist, b, rng)
        if recursive:
            v = srg_estimator_step(smooth, v, w_t, w_prev, batch, dist)
        else:
            v = svrg_estimator_step(smooth, g0, w0, w_t, batch, dist)
        w_next = scaled_prox(reg, u, w_t - u * v)
        w_prev, w_t = w_t, w_next
    return w_t


def _gradient_mapping_norm(reg, u, w, g):
    G = (w - scaled_prox(reg, u, w - u * g)) / u
    return float(np.sqrt(np.sum(u * G * G)))


def run(config: SolverConfig, smooth, reg: Regularizer, w0=None,
        p_star: Optional[float] = None, dist: Optional[SamplingDistribution] = None,
        keep_output: bool = True) -> RunTrace:
    """Execute K outer epochs of the configured solver.

    Epoch 0 uses U_0 = eta0 * I. From epoch 1 on, the metric (or scalar BB
    step) is rebuilt at the start of the epoch from the secant pair of the
    two most recent outer iterates and full gradients. Results are a
    deterministic function of ``config.seed``.
    """
    n, d = smooth.n, smooth.d
    config.validate(n)
    variant = config.variant
    cfg = config.metric_config()
    if dist is None:
        dist = build_distribution(smooth.lipschitz, config.sampling)

    seeds = np.random.SeedSequence(int(config.seed)).spawn(2)
    rng = np.random.Generator(np.random.PCG64(seeds[0]))
    reservoir = Reservoir(np.random.Generator(np.random.PCG64(seeds[1])))

    w = np.zeros(d) if w0 is None else np.array(w0, dtype=np.float64)
    g = smooth.full_gradient(w)
    p0 = smooth.value(w) + reg.value(w)
    trace = RunTrace(config=config, initial_objective=p0, p_star=p_star)

    metric = DiagonalMetric.scalar(config.eta0, d)
    eta = config.eta0
    w_old = g_old = None
    evals = 0
    elapsed = 0.0

    for k in range(config.K):
        tic = time.perf_counter()
        evals += n
        if k > 0:
            pair = SecantPair(w - w_old, g - g_old)
            if variant.stepsize == "diagonal-bb":
                metric = update_metric(pair, metric, cfg)
            elif variant.stepsize == "scalar-bb":
                eta = scalar_bb_step(pair, eta, cfg)
                metric = DiagonalMetric.scalar(eta, d)
        u = metric.u

        t_k = config.m if config.rule == "fixed" else sample_inner_length(config.m, rng)

        on_iterate = None
        if keep_output:
            def on_iterate(t, w_t, _k=k, _u=u):
                reservoir.offer(lambda: OutputSample(w_t.copy(), _u, _k, t))

        w_new = inner_loop(smooth, reg, w, g, u, t_k, config.b, dist, rng,
                           estimator=variant.estimator, on_iterate=on_iterate)
        evals += 2 * config.b * t_k
        trace.total_inner_steps += t_k

        if not np.all(np.isfinite(w_new)):
            raise DivergenceError(k, "non-finite iterate")
        g_new = smooth.full_gradient(w_new)
        elapsed += time.perf_counter() - tic

        p = smooth.value(w_new) + reg.value(w_new)
        if not np.isfinite(p) or (p0 > 0 and p > config.divergence_factor * p0):
            raise DivergenceError(k, f"objective {p!r} exceeds {config.divergence_factor:g} x P(w0) = {p0!r}")
        gap = max(p - p_star, GAP_FLOOR) if p_star is not None else float("nan")
        trace.records.append(EpochRecord(
            epoch=k,
            passes=evals / n,
            seconds=elapsed,
            objective=p,
            gap=gap,
            grad_map_norm=_gradient_mapping_norm(reg, u, w_new, g_new),
            u_min=metric.u_min,
            u_max=metric.u_max,
            alpha1=metric.upper,
            alpha2=metric.lower,
            t_k=t_k,
        ))
        log.debug("%s epoch %d passes %.3f P %.12g", variant.name, k, evals / n, p)

        w_old, g_old = w, g
        w, g = w_new, g_new
        if config.max_passes is not None and evals >= config.max_passes * n:
            break

    trace.w_last = w
    trace.grad_evals = evals
    trace.output = reservoir.item
    return trace


def select_output(trace: RunTrace) -> OutputSample:
    """The uniformly sampled inner iterate w_a (``trace.w_last`` holds w~^K)."""
    if trace.output is None:
        raise ValueError("run was executed without keeping an output sample")
    return trace.output
