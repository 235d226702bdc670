"""Compiled vs numpy kernel timings.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5]

Prints one line per (kernel, size): best wall time for each backend, their
ratio, and the max absolute difference between outputs.
"""

import argparse
import time

import numpy as np

from scorecomp import _kernels_py
from scorecomp.harness.stats import _energy_sums_many

try:
    from scorecomp import _kernels as _compiled
except ImportError:
    _compiled = None


def best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def gmm_inputs(rng, batch, n, k):
    x = rng.standard_normal((batch, n))
    means = rng.standard_normal((k, n))
    a = rng.standard_normal((k, n, n))
    covs = a @ a.transpose(0, 2, 1) / n + 0.1 * np.eye(n)
    sig2 = 0.25
    prec = np.linalg.inv(covs + sig2 * np.eye(n))
    gains = covs @ prec
    _, logdet = np.linalg.slogdet(covs + sig2 * np.eye(n))
    log_norms = np.log(np.full(k, 1.0 / k)) - 0.5 * logdet - 0.5 * n * np.log(2 * np.pi)
    return x, means, prec, gains, log_norms


def report(name, t_c, t_p, diff):
    ratio = t_p / t_c if t_c else np.nan
    print(f"{name:<36} compiled {t_c * 1e3:9.3f} ms  python {t_p * 1e3:9.3f} ms  "
          f"speedup {ratio:6.2f}x  max|diff| {diff:.2e}")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if _compiled is None:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation`")
    rng = np.random.default_rng(0)

    for batch, n, k in [(1, 1, 2), (8, 4, 2), (2000, 4, 2), (2000, 8, 4), (20000, 1, 2)]:
        args_g = gmm_inputs(rng, batch, n, k)
        t_c, out_c = best_of(lambda: _compiled.gmm_posterior_mean(*args_g), args.repeat)
        t_p, out_p = best_of(lambda: _kernels_py.gmm_posterior_mean(*args_g), args.repeat)
        report(f"gmm_posterior_mean B={batch} n={n} K={k}", t_c, t_p, float(np.max(np.abs(out_c - out_p))))

    for n, dim in [(200, 2), (1000, 9), (2000, 9)]:
        pts = rng.standard_normal((n, dim))
        labels = (rng.random(n) < 0.5).astype(np.int8)
        t_c, out_c = best_of(lambda: _compiled.energy_sums(pts, labels), args.repeat)
        t_p, out_p = best_of(lambda: _kernels_py.energy_sums(pts, labels), args.repeat)
        report(f"energy_sums n={n} dim={dim}", t_c, t_p, float(np.max(np.abs(np.subtract(out_c, out_p)))))

    # permutation null: per-labeling compiled loop vs one batched GEMM pass
    n, dim, n_perm = 1000, 9, 199
    pts = rng.standard_normal((n, dim))
    base = np.r_[np.zeros(n // 2, np.int8), np.ones(n - n // 2, np.int8)]
    perms = np.stack([rng.permutation(base) for _ in range(n_perm)], axis=1)
    t_c, loop = best_of(lambda: [_compiled.energy_sums(pts, np.ascontiguousarray(perms[:, k])) for k in range(n_perm)], 1)
    t_p, batched = best_of(lambda: _energy_sums_many(pts, perms), 1)
    loop = np.array(loop)
    diff = float(np.max(np.abs(loop - np.stack(batched, axis=1))))
    print(f"{'permutation null n=1000 L=199':<36} compiled loop {t_c:7.3f} s  batched numpy {t_p:7.3f} s  "
          f"ratio {t_c / t_p:5.2f}x  max|diff| {diff:.2e}")


if __name__ == "__main__":
    main()
