import numpy as np
import pytest

from vmprox.data_io import SmoothnessProfile
from vmprox.sampling import (
    Reservoir,
    SamplingDistribution,
    build_distribution,
    child_seed,
    make_rng,
    sample_inner_length,
    sample_minibatch,
)


def test_uniform_distribution():
    dist = build_distribution(SmoothnessProfile(np.full(4, 2.0)), "uniform")
    np.testing.assert_allclose(dist.q, 0.25)
    assert dist.l_omega == 2.0


def test_importance_distribution():
    dist = build_distribution(SmoothnessProfile(np.array([1.0, 3.0])), "importance")
    np.testing.assert_allclose(dist.q, [0.25, 0.75])
    assert dist.l_omega == pytest.approx(2.0)


def test_l_omega_formulas(rng):
    L = rng.uniform(0.1, 5, 50)
    assert build_distribution(SmoothnessProfile(L), "uniform").l_omega == pytest.approx(L.max())
    assert build_distribution(SmoothnessProfile(L), "importance").l_omega == pytest.approx(L.mean())


def test_invalid_distributions():
    with pytest.raises(ValueError):
        SamplingDistribution(np.array([0.5, 0.6]), "custom", 1.0)
    with pytest.raises(ValueError):
        SamplingDistribution(np.array([1.0, 0.0]), "custom", 1.0)
    with pytest.raises(ValueError):
        build_distribution(SmoothnessProfile(np.ones(3)), "alias")


def test_singleton():
    dist = build_distribution(SmoothnessProfile(np.ones(1)), "importance")
    assert set(sample_minibatch(dist, 1, make_rng(0)).tolist()) == {0}


@pytest.mark.parametrize("scheme", ["uniform", "importance"])
def test_frequencies(scheme):
    # 1000 copies of five distinct constants so large batches are allowed;
    # indices are pooled by residue mod 5
    L = np.tile([1.0, 2.0, 3.0, 4.0, 10.0], 1000)
    dist = build_distribution(SmoothnessProfile(L), scheme)
    p = dist.q.reshape(1000, 5).sum(axis=0)
    N = 10 ** 6
    rng = make_rng(7)
    counts = np.zeros(5)
    for _ in range(N // 5000):
        counts += np.bincount(sample_minibatch(dist, 5000, rng) % 5, minlength=5)
    sigma = np.sqrt(p * (1 - p) / N)
    assert np.all(np.abs(counts / N - p) <= 4 * sigma)


def test_minibatch_determinism_and_bounds():
    dist = build_distribution(SmoothnessProfile(np.arange(1.0, 8.0)), "importance")
    a = sample_minibatch(dist, 7, make_rng(11))
    b = sample_minibatch(dist, 7, make_rng(11))
    assert np.array_equal(a, b)
    with pytest.raises(ValueError):
        sample_minibatch(dist, 8, make_rng(0))
    with pytest.raises(ValueError):
        sample_minibatch(dist, 0, make_rng(0))


def test_inner_length():
    rng = make_rng(1)
    assert all(sample_inner_length(1, rng) == 1 for _ in range(20))
    draws = np.array([sample_inner_length(5, rng) for _ in range(100_000)])
    freq = np.bincount(draws, minlength=6)[1:] / draws.size
    np.testing.assert_allclose(freq, 0.2, atol=0.01)
    a = [sample_inner_length(9, make_rng(4)) for _ in range(3)]
    assert a == [sample_inner_length(9, make_rng(4)) for _ in range(3)]
    with pytest.raises(ValueError):
        sample_inner_length(0, rng)


def test_child_seed():
    assert child_seed(1, 2) == child_seed(1, 2)
    assert child_seed(1, 2) != child_seed(1, 3)


def test_reservoir_uniform():
    T, reps = 20, 20_000
    rng = make_rng(5)
    counts = np.zeros(T)
    for _ in range(reps):
        res = Reservoir(rng)
        for t in range(T):
            res.offer(lambda t=t: t)
        counts[res.item] += 1
    p = 1 / T
    sigma = np.sqrt(p * (1 - p) / reps)
    assert np.all(np.abs(counts / reps - p) <= 4.5 * sigma)


def test_reservoir_factory_called_lazily():
    calls = []
    res = Reservoir(make_rng(0))
    for t in range(1000):
        res.offer(lambda t=t: calls.append(t) or t)
    assert len(calls) < 50
    assert res.item == calls[-1]
