"""Exact Gaussian and Gaussian-mixture ground truth.

The matrix models here are linear-Gaussian structural models over a V x F
grid of d-dimensional entries.  Entry ``(i, j)`` is view ``i`` at frame
``j``; a *row* is one view across all frames and a *column* is one frame
across all views.  Flat coordinates are row-major: ``(i * F + j) * d + k``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import linalg
from scipy.special import logsumexp

LOG_2PI = np.log(2.0 * np.pi)
MIN_CHOL_DIAG = 1e-10
SYMMETRY_TOL = 1e-12

Entry = tuple[int, int]


class DegenerateModelError(ValueError):
    """Raised for singular or non positive-definite covariances."""


def _cholesky(cov: np.ndarray) -> np.ndarray:
    try:
        chol = linalg.cholesky(cov, lower=True)
    except linalg.LinAlgError as exc:
        raise DegenerateModelError("covariance is not positive definite") from exc
    if np.min(np.diag(chol)) < MIN_CHOL_DIAG:
        raise DegenerateModelError("covariance is numerically singular")
    return chol


def _check_dim(x: np.ndarray, dim: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1:] != (dim,):
        raise ValueError(f"expected trailing dimension {dim}, got shape {x.shape}")
    return x


class GaussianModel:
    """Multivariate normal with a cached lower Cholesky factor."""

    def __init__(self, mean, cov):
        mean = np.atleast_1d(np.asarray(mean, dtype=np.float64)).copy()
        cov = np.atleast_2d(np.asarray(cov, dtype=np.float64)).copy()
        if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
            raise ValueError("mean must be (m,) and covariance (m, m)")
        if not np.all(np.isfinite(cov)) or not np.all(np.isfinite(mean)):
            raise DegenerateModelError("non-finite model parameters")
        scale = max(1.0, float(np.max(np.abs(cov))))
        if np.max(np.abs(cov - cov.T)) > SYMMETRY_TOL * scale:
            raise ValueError("covariance is not symmetric")
        cov = 0.5 * (cov + cov.T)
        self.chol = _cholesky(cov)
        for a in (mean, cov, self.chol):
            a.setflags(write=False)
        self.mean = mean
        self.cov = cov

    @property
    def dim(self) -> int:
        return self.mean.size

    def __repr__(self):
        return f"GaussianModel(dim={self.dim})"

    def logpdf(self, x) -> np.ndarray:
        x = _check_dim(x, self.dim)
        z = linalg.solve_triangular(self.chol, (x - self.mean).T, lower=True).T
        logdet = 2.0 * np.sum(np.log(np.diag(self.chol)))
        return -0.5 * (np.sum(z * z, axis=-1) + logdet + self.dim * LOG_2PI)

    def score(self, x) -> np.ndarray:
        """``-cov^{-1} (x - mean)`` for one point or a batch of points."""
        x = _check_dim(x, self.dim)
        return -linalg.cho_solve((self.chol, True), (x - self.mean).T).T

    def sample(self, rng: np.random.Generator, size=None) -> np.ndarray:
        shape = () if size is None else np.atleast_1d(size).tolist()
        z = rng.standard_normal((*shape, self.dim))
        return self.mean + z @ self.chol.T


def joint_score(model: GaussianModel, x) -> np.ndarray:
    return model.score(x)


def noised_model(model: GaussianModel, sigma: float) -> GaussianModel:
    """The law of ``x + sigma * eps`` for ``x ~ model``."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if sigma == 0:
        return model
    return GaussianModel(model.mean, model.cov + sigma**2 * np.eye(model.dim))


class GmmModel:
    """Finite mixture of full-covariance Gaussians of a common dimension."""

    def __init__(self, weights, components: Sequence[GaussianModel]):
        weights = np.asarray(weights, dtype=np.float64).copy()
        components = list(components)
        if weights.ndim != 1 or weights.size != len(components) or not components:
            raise ValueError("need one weight per component")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be a probability vector")
        dims = {c.dim for c in components}
        if len(dims) != 1:
            raise ValueError("all components must share a dimension")
        weights.setflags(write=False)
        self.weights = weights
        self.components = components

    @classmethod
    def isotropic(cls, weights, means, std) -> "GmmModel":
        means = np.atleast_2d(np.asarray(means, dtype=np.float64))
        stds = np.broadcast_to(np.asarray(std, dtype=np.float64), (means.shape[0],))
        m = means.shape[1]
        return cls(weights, [GaussianModel(mu, s**2 * np.eye(m)) for mu, s in zip(means, stds)])

    @property
    def dim(self) -> int:
        return self.components[0].dim

    @property
    def n_components(self) -> int:
        return len(self.components)

    @property
    def means(self) -> np.ndarray:
        return np.stack([c.mean for c in self.components])

    @property
    def covs(self) -> np.ndarray:
        return np.stack([c.cov for c in self.components])

    def noised(self, sigma: float) -> "GmmModel":
        return GmmModel(self.weights, [noised_model(c, sigma) for c in self.components])

    def component_logpdfs(self, x, sigma: float = 0.0) -> np.ndarray:
        """``log w_k + log N(x; mu_k, cov_k + sigma^2 I)``, shape ``(..., K)``."""
        with np.errstate(divide="ignore"):
            logw = np.log(self.weights)
        comps = self.noised(sigma).components
        return np.stack([c.logpdf(x) for c in comps], axis=-1) + logw

    def logpdf(self, x, sigma: float = 0.0) -> np.ndarray:
        return logsumexp(self.component_logpdfs(x, sigma), axis=-1)

    def responsibilities(self, x, sigma: float = 0.0) -> np.ndarray:
        lp = self.component_logpdfs(x, sigma)
        return np.exp(lp - logsumexp(lp, axis=-1, keepdims=True))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        labels = rng.choice(self.n_components, size=size, p=self.weights)
        out = np.empty((size, self.dim))
        for k, comp in enumerate(self.components):
            idx = np.flatnonzero(labels == k)
            if idx.size:
                out[idx] = comp.sample(rng, idx.size)
        return out


def gmm_score(model: GmmModel, x, sigma: float = 0.0) -> np.ndarray:
    """Exact gradient of the log-density of the sigma-noised mixture."""
    x = _check_dim(x, model.dim)
    noisy = model.noised(sigma).components
    resp = model.responsibilities(x, sigma)
    per_comp = np.stack([c.score(x) for c in noisy], axis=-2)
    return np.einsum("...k,...kn->...n", resp, per_comp)


@dataclass(frozen=True)
class MatrixGaussianModel:
    """Joint Gaussian over a V x F grid of d-vectors."""

    v: int
    f: int
    entry_dim: int
    joint: GaussianModel

    def __post_init__(self):
        if self.joint.dim != self.v * self.f * self.entry_dim:
            raise ValueError("joint dimension must equal V * F * d")

    @property
    def n_entries(self) -> int:
        return self.v * self.f

    def flat_index(self, i: int, j: int, k: int) -> int:
        if not (0 <= i < self.v and 0 <= j < self.f and 0 <= k < self.entry_dim):
            raise IndexError(f"({i}, {j}, {k}) outside a {self.v}x{self.f}x{self.entry_dim} grid")
        return (i * self.f + j) * self.entry_dim + k

    def unflatten(self, flat: int) -> tuple[int, int, int]:
        if not 0 <= flat < self.joint.dim:
            raise IndexError(f"flat index {flat} out of range")
        e, k = divmod(flat, self.entry_dim)
        i, j = divmod(e, self.f)
        return i, j, k

    def entry_slice(self, entry: Entry) -> np.ndarray:
        i, j = entry
        start = self.flat_index(i, j, 0)
        return np.arange(start, start + self.entry_dim)

    def coords(self, entries: Sequence[Entry]) -> np.ndarray:
        return np.concatenate([self.entry_slice(e) for e in entries])

    def row_entries(self, i: int) -> list[Entry]:
        """View ``i`` across all frames."""
        return [(i, j) for j in range(self.f)]

    def col_entries(self, j: int) -> list[Entry]:
        """Frame ``j`` across all views."""
        return [(i, j) for i in range(self.v)]

    def noised(self, sigma: float) -> "MatrixGaussianModel":
        return MatrixGaussianModel(self.v, self.f, self.entry_dim, noised_model(self.joint, sigma))

    def to_grid(self, flat) -> np.ndarray:
        flat = np.asarray(flat)
        return flat.reshape(*flat.shape[:-1], self.v, self.f, self.entry_dim)

    def sample(self, rng: np.random.Generator, size=None) -> np.ndarray:
        """Draws shaped ``(..., V, F, d)``."""
        return self.to_grid(self.joint.sample(rng, size))


def marginal(model: MatrixGaussianModel, entries: Sequence[Entry]) -> GaussianModel:
    entries = [tuple(e) for e in entries]
    if not entries:
        raise ValueError("need at least one entry")
    if len(set(entries)) != len(entries):
        raise ValueError("duplicate entries")
    idx = model.coords(entries)
    return GaussianModel(model.joint.mean[idx], model.joint.cov[np.ix_(idx, idx)])


def partial_covariance(
    model: MatrixGaussianModel, a: Entry, b: Entry, given: Entry | Sequence[Entry]
) -> np.ndarray:
    """``Cov(a, b | given)`` by Schur complement; zero iff ``a`` and ``b`` are
    conditionally independent (Gaussian case)."""
    given_list = [tuple(given)] if np.ndim(given) == 1 else [tuple(g) for g in given]
    everything = [tuple(a), tuple(b), *given_list]
    if len(set(everything)) != len(everything):
        raise ValueError("a, b and the conditioning entries must be distinct")
    cov = model.joint.cov
    ia, ib, ig = model.entry_slice(a), model.entry_slice(b), model.coords(given_list)
    s_gg = cov[np.ix_(ig, ig)]
    s_ag = cov[np.ix_(ia, ig)]
    s_gb = cov[np.ix_(ig, ib)]
    return cov[np.ix_(ia, ib)] - s_ag @ linalg.solve(s_gg, s_gb, assume_a="pos")


@dataclass
class PivotTreeSpec:
    """Linear structural model rooted at one pivot entry.

    Off-pivot entries of the pivot row and column regress on the pivot;
    every other entry regresses on its column anchor ``(i, j0)``.
    ``extra_links`` adds further ``child -> [(parent, coeff), ...]`` edges,
    which is how the assumption-violating controls are wired.
    """

    v: int
    f: int
    entry_dim: int
    pivot: Entry
    pivot_prior: GaussianModel
    row_coeffs: dict[int, np.ndarray] = field(default_factory=dict)
    col_coeffs: dict[int, np.ndarray] = field(default_factory=dict)
    rest_coeffs: dict[Entry, np.ndarray] = field(default_factory=dict)
    noise_covs: dict[Entry, np.ndarray] = field(default_factory=dict)
    extra_links: dict[Entry, list[tuple[Entry, np.ndarray]]] = field(default_factory=dict)

    def parents(self, entry: Entry) -> list[tuple[Entry, np.ndarray]]:
        i0, j0 = self.pivot
        i, j = entry
        d = self.entry_dim
        zero = np.zeros((d, d))
        if entry == self.pivot:
            links = []
        elif i == i0:
            links = [(self.pivot, self.row_coeffs.get(j, zero))]
        elif j == j0:
            links = [(self.pivot, self.col_coeffs.get(i, zero))]
        else:
            links = [((i, j0), self.rest_coeffs.get(entry, zero))]
        return links + list(self.extra_links.get(entry, []))


def build_pivot_tree(spec: PivotTreeSpec) -> MatrixGaussianModel:
    """Joint law ``(I - B)^{-1} Omega (I - B)^{-T}`` of the structural model."""
    v, f, d = spec.v, spec.f, spec.entry_dim
    i0, j0 = spec.pivot
    if not (0 <= i0 < v and 0 <= j0 < f):
        raise IndexError("pivot outside the grid")
    if spec.pivot_prior.dim != d:
        raise ValueError("pivot prior must have the entry dimension")
    n = v * f * d
    grid = MatrixGaussianModel(v, f, d, GaussianModel(np.zeros(n), np.eye(n)))

    coef = np.zeros((n, n))
    omega = np.zeros((n, n))
    base_mean = np.zeros(n)
    for i in range(v):
        for j in range(f):
            e = (i, j)
            ie = grid.entry_slice(e)
            if e == spec.pivot:
                omega[np.ix_(ie, ie)] = spec.pivot_prior.cov
                base_mean[ie] = spec.pivot_prior.mean
            else:
                nc = np.asarray(spec.noise_covs.get(e, np.eye(d)), dtype=np.float64)
                _cholesky(0.5 * (nc + nc.T))
                omega[np.ix_(ie, ie)] = nc
            for parent, mat in spec.parents(e):
                coef[np.ix_(ie, grid.entry_slice(parent))] += np.asarray(mat, dtype=np.float64).reshape(d, d)

    lhs = np.eye(n) - coef
    if np.linalg.cond(lhs) > 1e12:
        raise DegenerateModelError("structural coefficient system is singular")
    inv = linalg.solve(lhs, np.eye(n))
    cov = inv @ omega @ inv.T
    return MatrixGaussianModel(v, f, d, GaussianModel(inv @ base_mean, 0.5 * (cov + cov.T)))


WIRINGS = ("tree", "both_anchors", "cross", "interior_pivot")


def random_pivot_tree_spec(
    rng: np.random.Generator,
    v: int,
    f: int,
    entry_dim: int,
    noise: float = 0.0,
    wiring: str = "tree",
    coeff_scale: float = 0.8,
    pivot: Entry | None = None,
) -> PivotTreeSpec:
    """Randomized pivot tree over variables observed at noise level ``noise``.

    Adding ``noise**2 I`` to every innovation (and to the pivot prior) keeps
    the tree structure intact, so the model is a valid pivot tree *over the
    noisy variables themselves*.

    ``wiring`` selects the structure:

    - ``"tree"``: interior entries hang off their column anchor only.
    - ``"both_anchors"``: interior entries also regress on their row anchor
      ``(i0, j)``.  The pivot's Markov blanket is still its row and column.
    - ``"cross"``: each off-pivot column entry also regresses on an off-pivot
      row entry, breaking row/column independence given the pivot.
    - ``"interior_pivot"``: interior entries also regress on the pivot.
    """
    if wiring not in WIRINGS:
        raise ValueError(f"unknown wiring {wiring!r}; expected one of {WIRINGS}")
    d = entry_dim
    if pivot is None:
        pivot = (int(rng.integers(v)), int(rng.integers(f)))
    i0, j0 = pivot
    bump = noise**2 * np.eye(d)

    def mat():
        return coeff_scale * rng.uniform(-1.0, 1.0, (d, d)) / np.sqrt(d)

    def spd():
        a = rng.standard_normal((d, d))
        return 0.5 * np.eye(d) + 0.5 * a @ a.T / d + bump

    prior = GaussianModel(rng.standard_normal(d), spd())
    spec = PivotTreeSpec(v, f, d, pivot, prior)
    for j in range(f):
        if j != j0:
            spec.row_coeffs[j] = mat()
    for i in range(v):
        if i != i0:
            spec.col_coeffs[i] = mat()
    for i in range(v):
        for j in range(f):
            if (i, j) == pivot:
                continue
            spec.noise_covs[(i, j)] = spd()
            if i != i0 and j != j0:
                spec.rest_coeffs[(i, j)] = mat()

    off_rows = [(i0, j) for j in range(f) if j != j0]
    for i in range(v):
        for j in range(f):
            interior = i != i0 and j != j0
            if wiring == "both_anchors" and interior:
                spec.extra_links[(i, j)] = [((i0, j), mat())]
            elif wiring == "interior_pivot" and interior:
                spec.extra_links[(i, j)] = [(pivot, mat())]
            elif wiring == "cross" and j == j0 and i != i0 and off_rows:
                spec.extra_links[(i, j)] = [(off_rows[int(rng.integers(len(off_rows)))], mat())]
    return spec


def independent_matrix_model(
    entry_models: Mapping[Entry, GaussianModel], v: int, f: int
) -> MatrixGaussianModel:
    """Block-diagonal joint with the given per-entry Gaussians."""
    d = next(iter(entry_models.values())).dim
    n = v * f * d
    mean = np.zeros(n)
    cov = np.zeros((n, n))
    for i in range(v):
        for j in range(f):
            g = entry_models[(i, j)]
            s = slice((i * f + j) * d, (i * f + j + 1) * d)
            mean[s] = g.mean
            cov[s, s] = g.cov
    return MatrixGaussianModel(v, f, d, GaussianModel(mean, cov))
