"""Pure numpy versions of the compiled kernels."""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp


def gmm_posterior_mean(x, means, precisions, gains, log_norms):
    diff = x[:, None, :] - means[None, :, :]
    quad = np.einsum("bkr,krc,bkc->bk", diff, precisions, diff)
    lp = log_norms[None, :] - 0.5 * quad
    resp = np.exp(lp - logsumexp(lp, axis=1, keepdims=True))
    post = means[None, :, :] + np.einsum("krc,bkc->bkr", gains, diff)
    return np.einsum("bk,bkr->br", resp, post)


def energy_sums(points, labels, chunk: int = 256):
    n = points.shape[0]
    lab = labels.astype(bool)
    s00 = s11 = s01 = 0.0
    for start in range(0, n, chunk):
        block = points[start:start + chunk]
        dist = np.sqrt(np.maximum(
            np.sum(block**2, axis=1)[:, None] + np.sum(points**2, axis=1)[None, :]
            - 2.0 * block @ points.T, 0.0))
        rows = np.arange(start, start + block.shape[0])
        # keep each unordered pair once: column index > row index
        upper = np.arange(n)[None, :] > rows[:, None]
        bl = lab[start:start + block.shape[0]]
        s00 += dist[(~bl)[:, None] & ~lab[None, :] & upper].sum()
        s11 += dist[bl[:, None] & lab[None, :] & upper].sum()
        s01 += dist[(bl[:, None] != lab[None, :]) & upper].sum()
    return float(s00), float(s11), float(s01)
