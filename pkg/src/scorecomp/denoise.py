"""Posterior-mean denoisers ``D(x; sigma)`` and their score/ODE views.

A denoiser maps a noisy observation ``x = x0 + sigma * eps`` to
``E[x0 | x]``.  ``evaluate`` accepts a single vector or any batch shaped
``(..., dim)``; a batch is the unit the sampler hands over per row or
column so that per-sigma factorizations are computed once.
"""

from __future__ import annotations

import abc
import threading
from typing import Callable

import numpy as np
from scipy import linalg
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from . import kernels
from .models import LOG_2PI, GaussianModel, GmmModel, MatrixGaussianModel, _cholesky, marginal

_CACHE_SIZE = 1024


class Denoiser(abc.ABC):
    """Stateless posterior-mean estimator over vectors of length ``dim``."""

    dim: int

    @abc.abstractmethod
    def _evaluate(self, x: np.ndarray, sigma: float) -> np.ndarray:
        """Evaluate on a 2-D batch ``(B, dim)``."""

    def evaluate(self, x, sigma: float) -> np.ndarray:
        if not sigma > 0:
            raise ValueError("denoisers are evaluated at sigma > 0")
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1:] != (self.dim,):
            raise ValueError(f"expected trailing dimension {self.dim}, got shape {x.shape}")
        flat = x.reshape(-1, self.dim)
        return self._evaluate(flat, float(sigma)).reshape(x.shape)

    __call__ = evaluate


class _SigmaCache:
    """Bounded per-sigma memo for factorizations; safe under concurrent reads."""

    def __init__(self, build: Callable[[float], object]):
        self._build = build
        self._store: dict[float, object] = {}
        self._lock = threading.Lock()

    def __call__(self, sigma: float):
        hit = self._store.get(sigma)
        if hit is not None:
            return hit
        value = self._build(sigma)
        with self._lock:
            if len(self._store) >= _CACHE_SIZE:
                self._store.clear()
            self._store[sigma] = value
        return value


class GaussianDenoiser(Denoiser):
    """``mean + cov (cov + sigma^2 I)^{-1} (x - mean)``.

    Mutually uncorrelated coordinate groups (connected components of the
    covariance sparsity pattern) are factorized separately, so a
    block-diagonal model gives bit-for-bit the same output as one denoiser
    per block.
    """

    def __init__(self, model: GaussianModel):
        self.model = model
        self.dim = model.dim
        n_blocks, labels = connected_components(csr_matrix(model.cov != 0), directed=False)
        self._blocks = [np.flatnonzero(labels == b) for b in range(n_blocks)]
        self._gain = _SigmaCache(self._build_gain)

    def _build_gain(self, sigma: float) -> list[np.ndarray]:
        gains = []
        for idx in self._blocks:
            cov = self.model.cov[np.ix_(idx, idx)]
            noisy = cov + sigma**2 * np.eye(idx.size)
            # gain = cov @ noisy^{-1}; both symmetric, so gain.T = noisy^{-1} @ cov
            gains.append(np.ascontiguousarray(linalg.cho_solve((_cholesky(noisy), True), cov).T))
        return gains

    def _evaluate(self, x, sigma):
        mu = self.model.mean
        out = np.empty_like(x)
        for idx, gain in zip(self._blocks, self._gain(sigma)):
            m = mu[idx]
            out[:, idx] = m + _rowwise_matvec(gain, x[:, idx] - m)
        return out


def _rowwise_matvec(mat: np.ndarray, y: np.ndarray) -> np.ndarray:
    """``y @ mat.T`` accumulated column by column.

    Every output row sees the same sequence of floating-point operations
    whatever the batch size, unlike BLAS products whose blocking depends on
    the shape.  The dimensions here are small, so the loop is cheap.
    """
    acc = y[:, :1] * mat[:, 0]
    for k in range(1, mat.shape[1]):
        acc += y[:, k:k + 1] * mat[:, k]
    return acc


class GmmDenoiser(Denoiser):
    """Responsibility-weighted per-component Gaussian posterior means."""

    def __init__(self, model: GmmModel):
        self.model = model
        self.dim = model.dim
        self._means = np.ascontiguousarray(model.means)
        self._covs = model.covs
        with np.errstate(divide="ignore"):
            self._logw = np.log(model.weights)
        self._factors = _SigmaCache(self._build_factors)

    def _build_factors(self, sigma: float):
        eye = np.eye(self.dim)
        precisions, gains, log_norms = [], [], []
        for cov, logw in zip(self._covs, self._logw):
            chol = _cholesky(cov + sigma**2 * eye)
            prec = linalg.cho_solve((chol, True), eye)
            prec = 0.5 * (prec + prec.T)
            precisions.append(prec)
            gains.append(cov @ prec)
            logdet = 2.0 * np.sum(np.log(np.diag(chol)))
            log_norms.append(logw - 0.5 * logdet - 0.5 * self.dim * LOG_2PI)
        return (
            np.ascontiguousarray(precisions),
            np.ascontiguousarray(gains),
            np.asarray(log_norms, dtype=np.float64),
        )

    def _evaluate(self, x, sigma):
        precisions, gains, log_norms = self._factors(sigma)
        return kernels.gmm_posterior_mean(x, self._means, precisions, gains, log_norms)


class IdentityDenoiser(Denoiser):
    """Returns its input; every score and ODE direction is zero."""

    def __init__(self, dim: int):
        self.dim = dim

    def _evaluate(self, x, sigma):
        return x.copy()


class FunctionDenoiser(Denoiser):
    """Adapter for an arbitrary ``fn(batch, sigma) -> batch``."""

    def __init__(self, fn: Callable[[np.ndarray, float], np.ndarray], dim: int):
        self.fn = fn
        self.dim = dim

    def _evaluate(self, x, sigma):
        return np.asarray(self.fn(x, sigma), dtype=np.float64).reshape(x.shape)


def denoiser_from_gaussian(model: GaussianModel) -> GaussianDenoiser:
    return GaussianDenoiser(model)


def denoiser_from_gmm(model: GmmModel) -> GmmDenoiser:
    return GmmDenoiser(model)


def score_of(denoiser: Denoiser, x, sigma: float) -> np.ndarray:
    """Tweedie score estimate ``(D(x; sigma) - x) / sigma^2``."""
    if not sigma > 0:
        raise ValueError("the score is defined for sigma > 0")
    x = np.asarray(x, dtype=np.float64)
    return (denoiser.evaluate(x, sigma) - x) / sigma**2


def ode_direction(denoiser: Denoiser, x, sigma: float) -> np.ndarray:
    """Probability-flow direction ``dx/dsigma = (x - D(x; sigma)) / sigma``."""
    if not sigma > 0:
        raise ValueError("the ODE direction is defined for sigma > 0")
    x = np.asarray(x, dtype=np.float64)
    return (x - denoiser.evaluate(x, sigma)) / sigma


def oracle_denoisers(model: MatrixGaussianModel):
    """Exact per-row, per-column and per-entry denoisers of a matrix model.

    Returns ``(rows, cols, entries)``: V row denoisers over F*d values, F
    column denoisers over V*d values and a V x F grid of entry denoisers.
    """
    rows = [GaussianDenoiser(marginal(model, model.row_entries(i))) for i in range(model.v)]
    cols = [GaussianDenoiser(marginal(model, model.col_entries(j))) for j in range(model.f)]
    entries = [
        [GaussianDenoiser(marginal(model, [(i, j)])) for j in range(model.f)] for i in range(model.v)
    ]
    return rows, cols, entries
