"""Synthetic binary-classification datasets for tests and benchmarks."""

import numpy as np
import scipy.sparse as sp

from .data_io import Dataset


def make_logistic_data(n, d, seed=0, density=1.0, noise=0.1, normalize=True,
                       flip=0.0, scale_spread=0.0):
    """Labels from a sparse ground-truth linear model with optional label noise.

    ``scale_spread`` > 0 gives features log-uniformly varying scales over that
    many decades, which makes a per-coordinate metric worthwhile.
    """
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    if density < 1.0:
        X *= rng.random((n, d)) < density
    if scale_spread:
        X *= 10.0 ** rng.uniform(-scale_spread, 0.0, size=d)
    if normalize:
        norms = np.linalg.norm(X, axis=1)
        norms[norms == 0] = 1.0
        X /= norms[:, None]
    w_true = rng.normal(size=d) * (rng.random(d) < 0.5)
    z = X @ w_true * np.sqrt(d) + noise * rng.normal(size=n)
    y = np.where(z >= 0, 1.0, -1.0)
    if flip:
        y[rng.random(n) < flip] *= -1
    return Dataset(sp.csr_matrix(X), y)
