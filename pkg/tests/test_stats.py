import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from scorecomp import streams
from scorecomp.harness.stats import (
    UNIFORM_BC,
    bimodality_coefficient,
    bootstrap_mean_ci,
    energy_distance,
    energy_permutation_test,
    paired_t_pvalue,
)


def _energy_by_definition(a, b):
    d = lambda x, y: np.linalg.norm(x[:, None, :] - y[None, :, :], axis=-1).mean()
    return 2 * d(a, b) - d(a, a) - d(b, b)


def test_identical_sets_have_zero_distance(rng):
    a = rng.standard_normal((50, 2))
    assert energy_distance(a, a.copy()) == pytest.approx(0.0, abs=1e-12)


def test_singleton_masses():
    assert energy_distance(np.array([[-1.0]]), np.array([[1.0]])) == pytest.approx(4.0)
    assert energy_distance([0.0], [2.0]) == pytest.approx(4.0)


@given(seed=st.integers(0, 2**32 - 1), na=st.integers(1, 30), nb=st.integers(1, 30), p=st.integers(1, 3))
def test_matches_definition(seed, na, nb, p):
    rng = np.random.default_rng(seed)
    a, b = rng.standard_normal((na, p)), rng.standard_normal((nb, p)) + 0.5
    assert energy_distance(a, b) == pytest.approx(max(_energy_by_definition(a, b), 0.0), rel=1e-9, abs=1e-12)


def test_energy_errors():
    with pytest.raises(ValueError):
        energy_distance(np.zeros((0, 2)), np.zeros((3, 2)))
    with pytest.raises(ValueError):
        energy_distance(np.zeros((2, 2)), np.zeros((3, 3)))


def test_same_gaussian_below_permutation_quantile():
    a = streams.stream(1, streams.AUX, 0).standard_normal((10_000, 2))
    b = streams.stream(1, streams.AUX, 1).standard_normal((10_000, 2))
    stat, p, null = energy_permutation_test(a, b, 99, streams.stream(1, streams.AUX, 2))
    assert stat < np.quantile(null, 0.99)
    assert p > 0.01


def test_shifted_distributions_detected(rng):
    a = rng.standard_normal((200, 2))
    b = rng.standard_normal((200, 2)) + 0.6
    _, p, _ = energy_permutation_test(a, b, 99, rng)
    assert p == pytest.approx(0.01)


def test_bootstrap_ci_covers_mean(rng):
    values = rng.normal(1.0, 2.0, 2000)
    lo, hi = bootstrap_mean_ci(values, 0.95, 2000, rng)
    half = 1.96 * 2.0 / np.sqrt(2000)
    assert lo < values.mean() < hi
    assert hi - lo == pytest.approx(2 * half, rel=0.15)


def test_bimodality_reference_values(rng):
    uniform = np.linspace(0, 1, 100_001)
    assert bimodality_coefficient(uniform) == pytest.approx(UNIFORM_BC, rel=1e-3)
    assert bimodality_coefficient(rng.standard_normal(200_000)) == pytest.approx(1 / 3, rel=0.02)
    two_modes = np.r_[rng.normal(-3, 0.3, 5000), rng.normal(3, 0.3, 5000)]
    assert bimodality_coefficient(two_modes) > UNIFORM_BC


def test_paired_t(rng):
    assert paired_t_pvalue(np.zeros(10)) == 1.0
    assert paired_t_pvalue(np.ones(10)) == 0.0
    assert paired_t_pvalue(rng.normal(1.0, 0.1, 50)) < 1e-10


def test_permutation_null_matches_direct_statistic(rng):
    a = rng.standard_normal((40, 3))
    b = rng.standard_normal((25, 3)) + 0.2
    perm_rng = np.random.default_rng(5)
    _, _, null = energy_permutation_test(a, b, 20, perm_rng)
    pooled = np.concatenate([a, b])
    labels = np.r_[np.zeros(40, np.int8), np.ones(25, np.int8)]
    replay = np.random.default_rng(5)
    for k in range(20):
        perm = replay.permutation(labels)
        direct = energy_distance(pooled[perm == 0], pooled[perm == 1])
        assert null[k] == pytest.approx(direct, rel=1e-10, abs=1e-12)
