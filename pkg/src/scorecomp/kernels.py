"""Kernel backend selection.

The compiled extension is used when it was built; otherwise, or when
``SCORECOMP_PURE_PYTHON=1`` is set, the numpy implementations are used.
Both backends agree to round-off but are not bit-identical, so reproducible
reports are only byte-identical within one backend.
"""

from __future__ import annotations

import os

import numpy as np

from . import _kernels_py

_compiled = None
if os.environ.get("SCORECOMP_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

BACKEND = "compiled" if _compiled is not None else "python"
_impl = _compiled if _compiled is not None else _kernels_py


def gmm_posterior_mean(x, means, precisions, gains, log_norms) -> np.ndarray:
    """Posterior mean of a Gaussian mixture observed through Gaussian noise.

    Parameters
    ----------
    x : (B, n) array
    means : (K, n) array
    precisions : (K, n, n) array
        ``(cov_k + sigma^2 I)^{-1}``.
    gains : (K, n, n) array
        ``cov_k (cov_k + sigma^2 I)^{-1}``.
    log_norms : (K,) array
        ``log w_k - 0.5 log det(cov_k + sigma^2 I) - n/2 log(2 pi)``.
    """
    return _impl.gmm_posterior_mean(
        np.ascontiguousarray(x, dtype=np.float64),
        np.ascontiguousarray(means, dtype=np.float64),
        np.ascontiguousarray(precisions, dtype=np.float64),
        np.ascontiguousarray(gains, dtype=np.float64),
        np.ascontiguousarray(log_norms, dtype=np.float64),
    )


def energy_sums(points, labels) -> tuple[float, float, float]:
    """Pairwise Euclidean distance sums ``(within 0, within 1, across)``."""
    return _impl.energy_sums(
        np.ascontiguousarray(points, dtype=np.float64),
        np.ascontiguousarray(labels, dtype=np.int8),
    )
