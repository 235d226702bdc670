"""Euler probability-flow sampling, for single vectors and for latent
matrices with rollback (variance-reducing) steps."""

from __future__ import annotations

import logging
from concurrent.futures import Executor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import streams
from .compose import (
    CallCounter,
    CompositionConfig,
    ConditionSet,
    LatentMatrix,
    _per_slot,
    apply_conditions,
    entry_denoised,
    row_column_denoised,
)
from .denoise import Denoiser, ode_direction
from .schedule import SigmaSchedule

log = logging.getLogger(__name__)


def pf_ode_sample(denoiser: Denoiser, schedule: SigmaSchedule, rng: np.random.Generator) -> np.ndarray:
    """Integrate the probability-flow ODE from ``sigma_0 * eps`` down to 0."""
    levels = schedule.levels
    x = levels[0] * rng.standard_normal(denoiser.dim)
    for i in range(schedule.n_steps):
        x = x + (levels[i + 1] - levels[i]) * ode_direction(denoiser, x, levels[i])
    return x


def pf_ode_sample_batch(denoiser: Denoiser, schedule: SigmaSchedule, noise) -> np.ndarray:
    """Batched :func:`pf_ode_sample` started from unit noise ``(B, dim)``."""
    levels = schedule.levels
    x = levels[0] * np.asarray(noise, dtype=np.float64)
    for i in range(schedule.n_steps):
        x = x + (levels[i + 1] - levels[i]) * ode_direction(denoiser, x, levels[i])
    return x


def vrs_renoise(
    x_next,
    sigma_hi: float,
    sigma_lo: float,
    rng: np.random.Generator | None = None,
    mode: str = "as_written",
    noise: np.ndarray | None = None,
) -> np.ndarray:
    """Push a state at ``sigma_lo`` back up to ``sigma_hi``.

    ``"as_written"`` adds ``(sigma_hi - sigma_lo) * eps``, which leaves the
    state with less noise than ``sigma_hi`` calls for;
    ``"variance_matched"`` adds ``sqrt(sigma_hi^2 - sigma_lo^2) * eps``.
    ``noise`` supplies ``eps`` directly instead of drawing from ``rng``.
    """
    if sigma_hi < sigma_lo or sigma_lo < 0:
        raise ValueError("require sigma_hi >= sigma_lo >= 0")
    x_next = np.asarray(x_next, dtype=np.float64)
    if mode == "as_written":
        scale = sigma_hi - sigma_lo
    elif mode == "variance_matched":
        scale = np.sqrt(sigma_hi**2 - sigma_lo**2)
    else:
        raise ValueError(f"unknown renoise mode {mode!r}")
    if scale == 0:
        return x_next.copy()
    if noise is None:
        noise = rng.standard_normal(x_next.shape)
    return x_next + scale * noise


@dataclass
class StepRecord:
    step: int
    repeat: int
    sigma: float
    sigma_next: float
    s: float
    row_calls: int
    col_calls: int


@dataclass
class Snapshot:
    """State entering one composed step, before conditions are injected,
    with both models' denoised predictions at that state."""

    step: int
    repeat: int
    sigma: float
    state: np.ndarray
    row_pred: np.ndarray
    col_pred: np.ndarray


@dataclass
class SamplerRun:
    schedule: SigmaSchedule
    config: CompositionConfig
    seeds: list[int]
    steps: list[StepRecord] = field(default_factory=list)
    snapshots: list[Snapshot] = field(default_factory=list)

    @property
    def seed(self) -> int:
        return self.seeds[0]

    @property
    def composed_steps(self) -> int:
        return len(self.steps)

    @property
    def denoiser_calls(self) -> int:
        return sum(r.row_calls + r.col_calls for r in self.steps)

    def records(self) -> list[dict]:
        return [vars(r).copy() for r in self.steps]


def _calls(counters) -> int:
    return sum(c.calls for c in counters)


def expected_composed_steps(n_steps: int, n_rollback: int, repeats: int) -> int:
    return n_steps + n_rollback * (repeats - 1)


def _entry_noise(seeds: Sequence[int], key: tuple[int, ...], v: int, f: int, d: int) -> np.ndarray:
    out = np.empty((len(seeds), v, f, d))
    for b, sd in enumerate(seeds):
        for i in range(v):
            for j in range(f):
                out[b, i, j] = streams.normal(int(sd), (*key, i, j), d)
    return out


def initial_noise(seeds: Sequence[int], v: int, f: int, d: int) -> np.ndarray:
    """Unit normal draws; entry ``(i, j)`` of seed ``s`` uses stream
    ``(s, INIT, i, j)``."""
    return _entry_noise(seeds, (streams.INIT,), v, f, d)


def sample_matrix_batch(
    row_denoiser: Denoiser,
    col_denoiser: Denoiser,
    schedule: SigmaSchedule,
    config: CompositionConfig,
    conditions: ConditionSet | None,
    seeds: Sequence[int],
    shape: tuple[int, int, int] | None = None,
    entry_denoiser: Denoiser | None = None,
    snapshots: bool = False,
    executor: Executor | None = None,
) -> tuple[np.ndarray, SamplerRun]:
    """Run the composed sampler for several seeds at once.

    Returns the final states shaped ``(len(seeds), V, F, d)``.  Every seed's
    trajectory depends only on its own streams, so a seed's output does not
    depend on which batch it runs in.  This holds bit for bit with the
    Gaussian denoisers and the compiled mixture kernel; the numpy mixture
    fallback agrees to round-off.
    """
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise ValueError("need at least one seed")
    if shape is None:
        raise ValueError("matrix shape (V, F, d) is required")
    v, f, d = shape
    rows = [CallCounter(den) for den in _per_slot(row_denoiser, v, f * d, "row")]
    cols = [CallCounter(den) for den in _per_slot(col_denoiser, f, v * d, "column")]
    n = schedule.n_steps
    if config.n_rollback > n:
        raise ValueError("n_rollback exceeds the number of steps")
    if config.mode == "exact_thm1" and entry_denoiser is None:
        raise ValueError("exact composition needs an entry denoiser")
    conditions = conditions or ConditionSet()
    conditions.validate(v, f, d)

    run = SamplerRun(schedule, config, seeds)
    levels = schedule.levels
    x = levels[0] * initial_noise(seeds, v, f, d)

    for i in range(n):
        s = config.s_at(i)
        w_row = config.row_weight(s)
        repeats = config.rollback_repeats if i < config.n_rollback else 1
        sigma = levels[i]
        sigma_next = levels[i + 1]
        for j in range(repeats):
            r0, c0 = _calls(rows), _calls(cols)
            raw = x
            x = apply_conditions(x, conditions, sigma, seeds, key=(i, j))
            row_pred, col_pred = row_column_denoised(x, rows, cols, sigma, executor=executor)
            if config.mode == "convex":
                direction = w_row * ((x - row_pred) / sigma) + (1.0 - w_row) * ((x - col_pred) / sigma)
            else:
                entry_pred = entry_denoised(x, entry_denoiser, sigma)
                direction = ((x - row_pred) + (x - col_pred) - (x - entry_pred)) / sigma
            if snapshots:
                run.snapshots.append(Snapshot(i, j, sigma, raw.copy(), row_pred, col_pred))
            run.steps.append(StepRecord(i, j, sigma, sigma_next, s, _calls(rows) - r0, _calls(cols) - c0))
            x = x + (sigma_next - sigma) * direction
            if j < repeats - 1:
                reentry = sigma_next + config.reentry * (levels[i] - sigma_next)
                eps = _entry_noise(seeds, (streams.RENOISE, i, j), v, f, d)
                x = vrs_renoise(x, reentry, sigma_next, mode=config.renoise, noise=eps)
                sigma = reentry
    x = apply_conditions(x, conditions, 0.0, seeds)
    log.debug("sampled %d seeds in %d composed steps", len(seeds), run.composed_steps)
    return x, run


def sample_matrix(
    row_denoiser: Denoiser,
    col_denoiser: Denoiser,
    schedule: SigmaSchedule,
    config: CompositionConfig,
    conditions: ConditionSet | None,
    seed: int,
    shape: tuple[int, int, int],
    **kwargs,
) -> tuple[LatentMatrix, SamplerRun]:
    """Sample one latent matrix; see :func:`sample_matrix_batch`."""
    out, run = sample_matrix_batch(
        row_denoiser, col_denoiser, schedule, config, conditions, [seed], shape=shape, **kwargs
    )
    if run.snapshots:
        for snap in run.snapshots:
            snap.state, snap.row_pred, snap.col_pred = snap.state[0], snap.row_pred[0], snap.col_pred[0]
    return LatentMatrix(out[0]), run


__all__ = [
    "SamplerRun",
    "Snapshot",
    "StepRecord",
    "expected_composed_steps",
    "initial_noise",
    "pf_ode_sample",
    "pf_ode_sample_batch",
    "sample_matrix",
    "sample_matrix_batch",
    "vrs_renoise",
]
