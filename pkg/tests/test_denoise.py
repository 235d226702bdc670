from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats as sps

from scorecomp.denoise import (
    FunctionDenoiser,
    GaussianDenoiser,
    GmmDenoiser,
    IdentityDenoiser,
    denoiser_from_gaussian,
    denoiser_from_gmm,
    ode_direction,
    oracle_denoisers,
    score_of,
)
from scorecomp.models import (
    GaussianModel,
    GmmModel,
    build_pivot_tree,
    gmm_score,
    joint_score,
    marginal,
    noised_model,
    random_pivot_tree_spec,
)


def _random_gaussian(rng, m):
    a = rng.standard_normal((m, m))
    return GaussianModel(rng.standard_normal(m), a @ a.T / m + 0.3 * np.eye(m))


def _random_gmm(rng, m, k):
    return GmmModel(rng.dirichlet(np.ones(k)), [_random_gaussian(rng, m) for _ in range(k)])


def test_one_dim_posterior_mean_by_quadrature():
    mu, var, sigma, x = 2.0, 4.0, 2.0, 6.0
    prior = sps.norm(mu, np.sqrt(var))
    lik = sps.norm(0.0, sigma)
    num, _ = integrate.quad(lambda t: t * prior.pdf(t) * lik.pdf(x - t), -np.inf, np.inf)
    den, _ = integrate.quad(lambda t: prior.pdf(t) * lik.pdf(x - t), -np.inf, np.inf)
    oracle = num / den
    got = denoiser_from_gaussian(GaussianModel([mu], [[var]])).evaluate(np.array([x]), sigma)[0]
    assert oracle == pytest.approx(4.0, abs=1e-8)
    assert got == pytest.approx(oracle, abs=1e-10)


def test_small_sigma_limit(rng):
    model = _random_gaussian(rng, 3)
    den = GaussianDenoiser(model)
    x = model.sample(rng, 20)
    assert np.max(np.abs(den.evaluate(x, 1e-9) - x)) < 1e-6


def test_large_sigma_limit(rng):
    model = _random_gaussian(rng, 3)
    out = GaussianDenoiser(model).evaluate(rng.standard_normal(3), 1e6)
    assert np.max(np.abs(out - model.mean)) < 1e-3


def test_evaluate_validates(rng):
    den = GaussianDenoiser(_random_gaussian(rng, 3))
    with pytest.raises(ValueError):
        den.evaluate(np.zeros(3), 0.0)
    with pytest.raises(ValueError):
        den.evaluate(np.zeros(2), 1.0)
    with pytest.raises(ValueError):
        score_of(den, np.zeros(3), 0.0)
    with pytest.raises(ValueError):
        ode_direction(den, np.zeros(3), 0.0)


def test_gmm_single_component_matches_gaussian(rng):
    comp = _random_gaussian(rng, 3)
    g = denoiser_from_gaussian(comp)
    m = denoiser_from_gmm(GmmModel([1.0], [comp]))
    for _ in range(100):
        x = rng.standard_normal(3) * 3
        sigma = float(np.exp(rng.uniform(-3, 3)))
        assert np.allclose(m.evaluate(x, sigma), g.evaluate(x, sigma), rtol=1e-12, atol=1e-12)


def test_gmm_symmetric_zero():
    mu = np.array([2.0, 1.0])
    gmm = GmmModel([0.5, 0.5], [GaussianModel(mu, np.eye(2)), GaussianModel(-mu, np.eye(2))])
    assert np.allclose(GmmDenoiser(gmm).evaluate(np.zeros(2), 0.8), 0.0, atol=1e-15)


def test_gaussian_score_identity_100_cases(rng):
    for _ in range(100):
        m = int(rng.integers(1, 5))
        model = _random_gaussian(rng, m)
        sigma = float(np.exp(rng.uniform(-2, 2)))
        x = rng.standard_normal(m) * 2
        want = joint_score(noised_model(model, sigma), x)
        assert np.max(np.abs(score_of(GaussianDenoiser(model), x, sigma) - want)) <= 1e-10


def test_gmm_tweedie_100_cases(rng):
    for _ in range(100):
        gmm = _random_gmm(rng, 2, 3)
        sigma = float(np.exp(rng.uniform(-2, 2)))
        x = rng.standard_normal(2) * 2
        den = GmmDenoiser(gmm)
        assert np.max(np.abs(den.evaluate(x, sigma) - (x + sigma**2 * gmm_score(gmm, x, sigma)))) <= 1e-8
        assert np.max(np.abs(score_of(den, x, sigma) - gmm_score(gmm, x, sigma))) <= 1e-8


@given(seed=st.integers(0, 2**32 - 1), sigma=st.floats(0.05, 50.0))
def test_tweedie_property(seed, sigma):
    rng = np.random.default_rng(seed)
    gauss = _random_gaussian(rng, 3)
    gmm = _random_gmm(rng, 3, 2)
    x = rng.standard_normal(3)
    assert np.allclose(GaussianDenoiser(gauss).evaluate(x, sigma),
                       x + sigma**2 * noised_model(gauss, sigma).score(x), rtol=0, atol=1e-8 * (1 + sigma**2))
    assert np.allclose(GmmDenoiser(gmm).evaluate(x, sigma),
                       x + sigma**2 * gmm_score(gmm, x, sigma), rtol=0, atol=1e-8 * (1 + sigma**2))


def test_identity_denoiser_views():
    den = IdentityDenoiser(3)
    x = np.array([1.0, -2.0, 0.5])
    assert np.all(score_of(den, x, 0.7) == 0)
    assert np.all(ode_direction(den, x, 0.7) == 0)


def test_zero_denoiser_direction():
    den = FunctionDenoiser(lambda x, s: np.zeros_like(x), 1)
    assert ode_direction(den, np.array([3.0]), 1.5)[0] == 2.0


def test_direction_is_minus_sigma_times_score(rng):
    gmm = _random_gmm(rng, 2, 3)
    den = GmmDenoiser(gmm)
    for _ in range(100):
        x = rng.standard_normal(2) * 2
        sigma = float(np.exp(rng.uniform(-2, 2)))
        assert np.max(np.abs(ode_direction(den, x, sigma) + sigma * score_of(den, x, sigma))) <= 1e-12


def test_euler_step_moves_toward_lower_noise(rng):
    model = _random_gaussian(rng, 3)
    den = GaussianDenoiser(model)
    sigma, sigma_next = 1.0, 0.9
    x = noised_model(model, sigma).sample(rng, 10_000)
    x_next = x + (sigma_next - sigma) * ode_direction(den, x, sigma)
    target = noised_model(model, sigma_next)
    cov_err = np.linalg.norm(np.cov(x_next.T) - target.cov) / np.linalg.norm(target.cov)
    assert cov_err < 0.05
    assert np.linalg.norm(x_next.mean(0) - target.mean) < 0.05 * max(1.0, np.linalg.norm(target.mean))


def test_batch_shapes_and_batch_invariance(rng):
    model = _random_gaussian(rng, 4)
    den = GaussianDenoiser(model)
    x = rng.standard_normal((3, 5, 4))
    out = den.evaluate(x, 0.8)
    assert out.shape == x.shape
    assert np.array_equal(out[2, 1], den.evaluate(x[2, 1], 0.8))


def test_block_diagonal_matches_per_block(rng):
    a, b = _random_gaussian(rng, 2), _random_gaussian(rng, 3)
    cov = np.zeros((5, 5))
    cov[:2, :2], cov[2:, 2:] = a.cov, b.cov
    joint = GaussianDenoiser(GaussianModel(np.r_[a.mean, b.mean], cov))
    x = rng.standard_normal((7, 5))
    out = joint.evaluate(x, 1.3)
    assert np.array_equal(out[:, :2], GaussianDenoiser(a).evaluate(x[:, :2], 1.3))
    assert np.array_equal(out[:, 2:], GaussianDenoiser(b).evaluate(x[:, 2:], 1.3))


def test_concurrent_evaluation_is_consistent(rng):
    den = GmmDenoiser(_random_gmm(rng, 3, 4))
    xs = [rng.standard_normal((10, 3)) for _ in range(16)]
    sigmas = [0.5, 1.0, 2.0, 4.0] * 4
    serial = [den.evaluate(x, s) for x, s in zip(xs, sigmas)]
    fresh = GmmDenoiser(den.model)
    with ThreadPoolExecutor(4) as pool:
        parallel = list(pool.map(fresh.evaluate, xs, sigmas))
    for a, b in zip(serial, parallel):
        assert np.array_equal(a, b)


def test_oracle_denoisers_are_marginals(rng):
    model = build_pivot_tree(random_pivot_tree_spec(rng, 2, 3, 2))
    rows, cols, entries = oracle_denoisers(model)
    assert len(rows) == 2 and len(cols) == 3 and len(entries) == 2 and len(entries[0]) == 3
    assert rows[1].dim == 6 and cols[2].dim == 4 and entries[1][2].dim == 2
    x = rng.standard_normal(4)
    want = GaussianDenoiser(marginal(model, model.col_entries(1))).evaluate(x, 0.9)
    assert np.array_equal(cols[1].evaluate(x, 0.9), want)
