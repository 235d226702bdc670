"""Statistics used by the scenario validators."""

from __future__ import annotations

import numpy as np
from scipy import stats as sps

from .. import kernels


def _as_points(samples) -> np.ndarray:
    a = np.asarray(samples, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    return a.reshape(a.shape[0], -1)


def _energy_from_sums(s_aa, s_bb, s_ab, n_a, n_b) -> float:
    # V-statistic: ordered pairs, diagonal zeros included
    cross = s_ab / (n_a * n_b)
    within_a = 2.0 * s_aa / (n_a * n_a)
    within_b = 2.0 * s_bb / (n_b * n_b)
    return max(2.0 * cross - within_a - within_b, 0.0)


def energy_distance(samples_a, samples_b) -> float:
    """``2 E|a - b| - E|a - a'| - E|b - b'|`` over the two empirical laws."""
    a, b = _as_points(samples_a), _as_points(samples_b)
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise ValueError("energy distance needs non-empty samples")
    if a.shape[1] != b.shape[1]:
        raise ValueError("samples must share a dimension")
    pooled = np.concatenate([a, b])
    labels = np.r_[np.zeros(len(a), np.int8), np.ones(len(b), np.int8)]
    s_aa, s_bb, s_ab = kernels.energy_sums(pooled, labels)
    return _energy_from_sums(s_aa, s_bb, s_ab, len(a), len(b))


def _energy_sums_many(points: np.ndarray, labels: np.ndarray, max_block_elems: int = 4_000_000):
    """Distance sums for many labelings at once.

    ``labels`` is ``(n, L)`` with one 0/1 labeling per column.  Each block of
    the distance matrix is built once and multiplied against every labeling,
    so the cost is one O(n^2) distance pass plus a matrix product.  Returns
    ``(s00, s11, s01)`` arrays of length L, each unordered pair counted once.
    """
    n, dim = points.shape
    lab = labels.astype(np.float64)
    d_lab = np.empty_like(lab)
    d_one = np.empty(n)
    block = max(1, max_block_elems // max(1, n * dim))
    for start in range(0, n, block):
        stop = min(n, start + block)
        diff = points[start:stop, None, :] - points[None, :, :]
        dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        d_lab[start:stop] = dist @ lab
        d_one[start:stop] = dist.sum(axis=1)
    total = d_one.sum()
    l_d_l = np.einsum("nl,nl->l", lab, d_lab)
    l_d_1 = lab.T @ d_one
    s11 = 0.5 * l_d_l
    s01 = l_d_1 - l_d_l
    s00 = 0.5 * (total - 2.0 * l_d_1 + l_d_l)
    return s00, s11, s01


def energy_permutation_test(samples_a, samples_b, n_permutations: int, rng: np.random.Generator):
    """Permutation p-value for equality of distributions.

    Returns ``(statistic, p_value, null_statistics)`` with
    ``p = (1 + #{null >= observed}) / (1 + n_permutations)``.
    """
    a, b = _as_points(samples_a), _as_points(samples_b)
    if a.shape[1] != b.shape[1]:
        raise ValueError("samples must share a dimension")
    observed = energy_distance(a, b)
    pooled = np.concatenate([a, b])
    labels = np.r_[np.zeros(len(a), np.int8), np.ones(len(b), np.int8)]
    perms = np.stack([rng.permutation(labels) for _ in range(n_permutations)], axis=1)
    s00, s11, s01 = _energy_sums_many(pooled, perms)
    null = np.array([_energy_from_sums(s00[k], s11[k], s01[k], len(a), len(b)) for k in range(n_permutations)])
    p = (1.0 + np.sum(null >= observed)) / (1.0 + n_permutations)
    return observed, float(p), null


def bootstrap_mean_ci(values, level: float, n_boot: int, rng: np.random.Generator) -> tuple[float, float]:
    """Percentile bootstrap interval for the mean."""
    values = np.asarray(values, dtype=np.float64)
    idx = rng.integers(0, values.size, size=(n_boot, values.size))
    means = values[idx].mean(axis=1)
    tail = 50.0 * (1.0 - level)
    lo, hi = np.percentile(means, [tail, 100.0 - tail])
    return float(lo), float(hi)


def bimodality_coefficient(values) -> float:
    """``(skewness^2 + 1) / kurtosis``; above 5/9 (the uniform value)
    suggests more than one mode."""
    values = np.ravel(np.asarray(values, dtype=np.float64))
    skew = sps.skew(values)
    kurt = sps.kurtosis(values, fisher=False)
    return float((skew**2 + 1.0) / kurt)


UNIFORM_BC = 5.0 / 9.0


def paired_t_pvalue(diff) -> float:
    diff = np.asarray(diff, dtype=np.float64)
    if np.all(diff == diff[0]):
        return 1.0 if diff[0] == 0 else 0.0
    return float(sps.ttest_1samp(diff, 0.0).pvalue)
