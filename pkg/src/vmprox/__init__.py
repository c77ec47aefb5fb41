"""Variable metric mini-batch proximal stochastic recursive gradient solvers."""

from .data_io import (
    Dataset,
    DegenerateRowError,
    ParseError,
    SmoothnessProfile,
    component_lipschitz,
    load_libsvm,
    normalize_rows,
    parse_libsvm,
    serialize_libsvm,
)
from .diagnostics import (
    BoundReport,
    MaxIterations,
    RateHypothesisError,
    RateInputs,
    ReferenceSolution,
    compute_reference,
    convex_bound_check,
    estimator_variance_check,
    gradient_mapping,
    gradient_mapping_norm,
    inner_contraction,
    theoretical_rate,
)
from .metric import MetricConfig, SecantPair, bb_bounds, diagonal_bb_update, scalar_bb_step, update_metric
from .model import Regularizer, SmoothPart, objective
from .prox import DiagonalMetric, MetricError, scaled_prox, soft_threshold
from .sampling import SamplingDistribution, build_distribution, sample_minibatch
from .solvers import ALGORITHMS, DivergenceError, RunTrace, SolverConfig, run, select_output

__version__ = "0.1.0"
