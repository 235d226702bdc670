"""Noise-level schedules and the forward perturbation kernel."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SIGMA_MIN = 0.002
SIGMA_MAX = 80.0
RHO = 7.0


@dataclass(frozen=True)
class SigmaSchedule:
    """Strictly decreasing noise levels ending at exactly zero.

    ``levels[0]`` is the starting noise std and ``levels[-1] == 0``; the
    schedule drives ``n_steps = len(levels) - 1`` Euler steps.
    """

    levels: np.ndarray

    def __post_init__(self):
        levels = np.asarray(self.levels, dtype=np.float64)
        if levels.ndim != 1 or levels.size < 2:
            raise ValueError("a schedule needs at least two levels")
        if levels[-1] != 0.0:
            raise ValueError("the last noise level must be exactly 0")
        if not np.all(np.diff(levels) < 0):
            raise ValueError("noise levels must be strictly decreasing")
        if not np.all(np.isfinite(levels)):
            raise ValueError("noise levels must be finite")
        levels.setflags(write=False)
        object.__setattr__(self, "levels", levels)

    @property
    def n_steps(self) -> int:
        return self.levels.size - 1

    @property
    def sigma_max(self) -> float:
        return float(self.levels[0])

    def __len__(self):
        return self.levels.size

    def __getitem__(self, i):
        return float(self.levels[i])


def karras_sigmas(
    n_steps: int,
    sigma_min: float = SIGMA_MIN,
    sigma_max: float = SIGMA_MAX,
    rho: float = RHO,
) -> SigmaSchedule:
    """Polynomially spaced levels interpolated in ``sigma ** (1 / rho)``.

    The first ``n_steps`` levels run from ``sigma_max`` to ``sigma_min``
    inclusive and a final 0 is appended.  ``n_steps == 1`` gives
    ``[sigma_max, 0]``.
    """
    if int(n_steps) != n_steps or n_steps < 1:
        raise ValueError("n_steps must be a positive integer")
    if not (sigma_min > 0 and sigma_max > sigma_min):
        raise ValueError("require sigma_max > sigma_min > 0")
    if not rho > 0:
        raise ValueError("rho must be positive")
    n_steps = int(n_steps)
    if n_steps == 1:
        return SigmaSchedule(np.array([float(sigma_max), 0.0]))
    ramp = np.arange(n_steps, dtype=np.float64) / (n_steps - 1)
    lo = sigma_min ** (1.0 / rho)
    hi = sigma_max ** (1.0 / rho)
    sigmas = (hi + ramp * (lo - hi)) ** rho
    # pin endpoints against round-off in the power
    sigmas[0] = sigma_max
    sigmas[-1] = sigma_min
    return SigmaSchedule(np.append(sigmas, 0.0))


def perturb(x, sigma: float, rng: np.random.Generator, alpha: float = 1.0) -> np.ndarray:
    """Draw ``alpha * x + sigma * eps`` with ``eps ~ N(0, I)``.

    ``sigma == 0`` returns ``alpha * x`` without consuming randomness.
    """
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    x = np.asarray(x, dtype=np.float64)
    if sigma == 0:
        return alpha * x
    return alpha * x + sigma * rng.standard_normal(x.shape)
