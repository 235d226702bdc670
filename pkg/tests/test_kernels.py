import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.spatial.distance import pdist, squareform
from scipy.special import softmax

from scorecomp import _kernels_py, kernels

try:
    from scorecomp import _kernels as compiled
except ImportError:  # extension not built
    compiled = None

needs_compiled = pytest.mark.skipif(compiled is None, reason="compiled extension not built")


def _gmm_inputs(rng, b, n, k):
    x = rng.standard_normal((b, n)) * 3
    means = rng.standard_normal((k, n)) * 2
    covs = []
    for _ in range(k):
        a = rng.standard_normal((n, n))
        covs.append(a @ a.T / n + 0.2 * np.eye(n))
    sigma = 0.7
    noisy = [c + sigma**2 * np.eye(n) for c in covs]
    prec = np.stack([np.linalg.inv(c) for c in noisy])
    prec = 0.5 * (prec + prec.transpose(0, 2, 1))
    gains = np.stack([c @ p for c, p in zip(covs, prec)])
    logw = np.log(rng.dirichlet(np.ones(k)))
    log_norms = np.array([lw - 0.5 * np.linalg.slogdet(c)[1] - 0.5 * n * np.log(2 * np.pi) for lw, c in zip(logw, noisy)])
    return x, means, prec, gains, log_norms


def _gmm_reference(x, means, prec, gains, log_norms):
    out = np.zeros_like(x)
    for b in range(x.shape[0]):
        diff = x[b] - means
        lp = log_norms - 0.5 * np.einsum("kr,krc,kc->k", diff, prec, diff)
        w = softmax(lp)
        out[b] = sum(w[k] * (means[k] + gains[k] @ diff[k]) for k in range(len(w)))
    return out


def _energy_reference(points, labels):
    dist = squareform(pdist(points))
    a, b = labels == 0, labels == 1
    return dist[np.ix_(a, a)].sum() / 2, dist[np.ix_(b, b)].sum() / 2, dist[np.ix_(a, b)].sum()


@pytest.mark.parametrize("impl", [_kernels_py, pytest.param(compiled, marks=needs_compiled)], ids=["python", "compiled"])
def test_gmm_kernel_matches_reference(rng, impl):
    args = _gmm_inputs(rng, 30, 3, 4)
    assert np.allclose(impl.gmm_posterior_mean(*args), _gmm_reference(*args), rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("impl", [_kernels_py, pytest.param(compiled, marks=needs_compiled)], ids=["python", "compiled"])
def test_energy_kernel_matches_reference(rng, impl):
    points = rng.standard_normal((300, 3))
    labels = (rng.random(300) < 0.4).astype(np.int8)
    got = impl.energy_sums(points, labels)
    assert np.allclose(got, _energy_reference(points, labels), rtol=1e-12)


@needs_compiled
@given(seed=st.integers(0, 2**32 - 1), b=st.integers(1, 40), n=st.integers(1, 5), k=st.integers(1, 5))
def test_backends_agree_gmm(seed, b, n, k):
    args = _gmm_inputs(np.random.default_rng(seed), b, n, k)
    a = compiled.gmm_posterior_mean(*args)
    p = _kernels_py.gmm_posterior_mean(*args)
    assert np.allclose(a, p, rtol=1e-12, atol=1e-12)


@needs_compiled
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 600), p=st.integers(1, 4))
def test_backends_agree_energy(seed, n, p):
    rng = np.random.default_rng(seed)
    points = rng.standard_normal((n, p))
    labels = (rng.random(n) < 0.5).astype(np.int8)
    assert np.allclose(compiled.energy_sums(points, labels), _kernels_py.energy_sums(points, labels), rtol=1e-10)


def test_far_points_do_not_underflow():
    means = np.array([[-3.0], [3.0]])
    prec = np.full((2, 1, 1), 1 / 0.0001)
    gains = np.zeros((2, 1, 1))
    log_norms = np.log([0.5, 0.5])
    out = kernels.gmm_posterior_mean(np.array([[1000.0]]), means, prec, gains, log_norms)
    assert out[0, 0] == pytest.approx(3.0)


def test_backend_flag():
    assert kernels.BACKEND in ("compiled", "python")
    env = dict(os.environ, SCORECOMP_PURE_PYTHON="1")
    res = subprocess.run([sys.executable, "-c", "from scorecomp import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert res.stdout.strip() == "python"
