"""Score composition over a V x F latent matrix.

Rows are views followed across frames and are handled by the *row* (video)
denoiser; columns are frames seen across views and are handled by the
*column* (multi-view) denoiser.
"""

from __future__ import annotations

from concurrent.futures import Executor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from . import streams
from .denoise import Denoiser

ScaleSchedule = Callable[[int], float]

ORIENTATIONS = ("algorithm", "equation")
RENOISE_MODES = ("as_written", "variance_matched")
MODES = ("convex", "exact_thm1")


@dataclass(frozen=True)
class LatentMatrix:
    """A V x F grid of d-vectors, stored as a ``(V, F, d)`` array."""

    data: np.ndarray

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64)
        if data.ndim != 3:
            raise ValueError("latent matrix data must be shaped (V, F, d)")
        if not np.all(np.isfinite(data)):
            raise ValueError("latent matrix entries must be finite")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def v(self) -> int:
        return self.data.shape[0]

    @property
    def f(self) -> int:
        return self.data.shape[1]

    @property
    def entry_dim(self) -> int:
        return self.data.shape[2]

    def __getitem__(self, entry) -> np.ndarray:
        return self.data[entry]


def scale_schedule_default(step: int) -> float:
    if step < 0:
        raise ValueError("step must be non-negative")
    return 0.5


def linear_scale_schedule(start: float, stop: float, n_steps: int) -> ScaleSchedule:
    """``s`` ramping linearly from ``start`` at step 0 to ``stop`` at ``n_steps``."""

    def schedule(step: int) -> float:
        return start + (stop - start) * min(step, n_steps) / n_steps

    return schedule


def constant_scale_schedule(s: float) -> ScaleSchedule:
    if not 0.0 <= s <= 1.0:
        raise ValueError("s must lie in [0, 1]")
    return lambda step: s


@dataclass
class CompositionConfig:
    """How row and column estimates are fused and how rollback runs.

    ``orientation="algorithm"`` gives the row (video) term weight ``1 - s``
    and the column (multi-view) term weight ``s``; ``"equation"`` swaps
    them.  ``reentry`` in ``(0, 1]`` places the rollback level at
    ``sigma_next + reentry * (sigma - sigma_next)``; 1 re-enters the same
    level.
    """

    mode: str = "convex"
    s_schedule: ScaleSchedule = scale_schedule_default
    n_rollback: int = 0
    rollback_repeats: int = 2
    orientation: str = "algorithm"
    renoise: str = "as_written"
    reentry: float = 1.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.orientation not in ORIENTATIONS:
            raise ValueError(f"orientation must be one of {ORIENTATIONS}")
        if self.renoise not in RENOISE_MODES:
            raise ValueError(f"renoise must be one of {RENOISE_MODES}")
        if self.n_rollback < 0:
            raise ValueError("n_rollback must be non-negative")
        if self.rollback_repeats < 1:
            raise ValueError("rollback_repeats must be at least 1")
        if not 0.0 < self.reentry <= 1.0:
            raise ValueError("reentry must lie in (0, 1]")

    def s_at(self, step: int) -> float:
        s = float(self.s_schedule(step))
        if not 0.0 <= s <= 1.0:
            raise ValueError(f"scale schedule returned {s} at step {step}, outside [0, 1]")
        return s

    def row_weight(self, s: float) -> float:
        return 1.0 - s if self.orientation == "algorithm" else s


@dataclass
class ConditionSet:
    """Known clean entries ``(i, j) -> d-vector`` held fixed during sampling."""

    entries: Mapping[tuple[int, int], np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.entries = {
            (int(i), int(j)): np.asarray(val, dtype=np.float64).copy()
            for (i, j), val in self.entries.items()
        }

    def __len__(self):
        return len(self.entries)

    def validate(self, v: int, f: int, d: int):
        for (i, j), val in self.entries.items():
            if not (0 <= i < v and 0 <= j < f):
                raise IndexError(f"condition entry ({i}, {j}) outside a {v}x{f} matrix")
            if val.shape != (d,):
                raise ValueError(f"condition ({i}, {j}) must have shape ({d},)")

    @classmethod
    def first_row_and_column(cls, clean: np.ndarray) -> "ConditionSet":
        """Condition on row 0 and column 0 of a clean ``(V, F, d)`` matrix."""
        v, f, _ = clean.shape
        keys = {(0, j) for j in range(f)} | {(i, 0) for i in range(v)}
        return cls({k: clean[k] for k in sorted(keys)})


def _same_shape(*arrays):
    shapes = {np.shape(a) for a in arrays}
    if len(shapes) != 1:
        raise ValueError(f"score shapes differ: {sorted(shapes)}")


def compose_scores_thm1(row_score, col_score, pivot_score) -> np.ndarray:
    """Joint score of an entry as row + column - entry marginal score."""
    _same_shape(row_score, col_score, pivot_score)
    return np.asarray(row_score) + np.asarray(col_score) - np.asarray(pivot_score)


def compose_scores_convex(row_score, col_score, s: float) -> np.ndarray:
    """``s * row_score + (1 - s) * col_score``."""
    _same_shape(row_score, col_score)
    if not 0.0 <= s <= 1.0:
        raise ValueError("s must lie in [0, 1]")
    return s * np.asarray(row_score) + (1.0 - s) * np.asarray(col_score)


class CallCounter:
    """Wraps a denoiser and counts ``evaluate`` invocations."""

    def __init__(self, denoiser: Denoiser):
        self.denoiser = denoiser
        self.dim = denoiser.dim
        self.calls = 0

    def evaluate(self, x, sigma):
        self.calls += 1
        return self.denoiser.evaluate(x, sigma)


def _per_slot(denoisers, count: int, dim: int, what: str) -> list:
    """Broadcast one denoiser to every row/column, or validate a list of them."""
    items = list(denoisers) if isinstance(denoisers, (list, tuple)) else [denoisers] * count
    if len(items) != count:
        raise ValueError(f"need {count} {what} denoisers, got {len(items)}")
    for den in items:
        if den.dim != dim:
            raise ValueError(f"{what} denoiser must take {dim} values, takes {den.dim}")
    return items


def row_column_denoised(
    state: np.ndarray,
    row_denoiser: Denoiser,
    col_denoiser: Denoiser,
    sigma: float,
    row_order: Sequence[int] | None = None,
    col_order: Sequence[int] | None = None,
    executor: Executor | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Denoised predictions from every row and every column.

    ``state`` is shaped ``(..., V, F, d)``; leading axes are a batch.  Each
    row/column result lands in its own slot, so the output does not depend
    on evaluation order or on whether an executor runs them concurrently.
    Either denoiser argument may be a list with one denoiser per row
    (respectively column), for models whose rows are not exchangeable.
    """
    state = np.asarray(state, dtype=np.float64)
    v, f, d = state.shape[-3:]
    row_dens = _per_slot(row_denoiser, v, f * d, "row")
    col_dens = _per_slot(col_denoiser, f, v * d, "column")
    lead = state.shape[:-3]
    row_pred = np.empty_like(state)
    col_pred = np.empty_like(state)

    def do_row(i):
        x = state[..., i, :, :].reshape(*lead, f * d)
        row_pred[..., i, :, :] = row_dens[i].evaluate(x, sigma).reshape(*lead, f, d)

    def do_col(j):
        x = state[..., :, j, :].reshape(*lead, v * d)
        col_pred[..., :, j, :] = col_dens[j].evaluate(x, sigma).reshape(*lead, v, d)

    rows = range(v) if row_order is None else list(row_order)
    cols = range(f) if col_order is None else list(col_order)
    if sorted(rows) != list(range(v)) or sorted(cols) != list(range(f)):
        raise ValueError("row/column orders must be permutations")
    if executor is None:
        for i in rows:
            do_row(i)
        for j in cols:
            do_col(j)
    else:
        jobs = [executor.submit(do_row, i) for i in rows] + [executor.submit(do_col, j) for j in cols]
        for job in jobs:
            job.result()
    return row_pred, col_pred


def matrix_direction(
    state,
    row_denoiser: Denoiser,
    col_denoiser: Denoiser,
    sigma: float,
    s: float,
    orientation: str = "algorithm",
    **kwargs,
) -> np.ndarray:
    """Composed probability-flow direction for every entry.

    ``(1 - s) * (x - D_row) / sigma + s * (x - D_col) / sigma`` under the
    default orientation, which equals ``-sigma`` times the convex
    combination of row and column scores with row weight ``1 - s``.
    Makes exactly V row and F column denoiser calls.
    """
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if not 0.0 <= s <= 1.0:
        raise ValueError("s must lie in [0, 1]")
    if orientation not in ORIENTATIONS:
        raise ValueError(f"orientation must be one of {ORIENTATIONS}")
    state = np.asarray(state, dtype=np.float64)
    row_pred, col_pred = row_column_denoised(state, row_denoiser, col_denoiser, sigma, **kwargs)
    w_row = 1.0 - s if orientation == "algorithm" else s
    w_col = 1.0 - w_row
    return w_row * ((state - row_pred) / sigma) + w_col * ((state - col_pred) / sigma)


def exact_matrix_direction(
    state,
    row_denoiser: Denoiser,
    col_denoiser: Denoiser,
    entry_denoiser: Denoiser,
    sigma: float,
    **kwargs,
) -> np.ndarray:
    """Direction from the row + column - entry composition.

    Needs a per-entry denoiser, which only oracle models provide.
    """
    state = np.asarray(state, dtype=np.float64)
    row_pred, col_pred = row_column_denoised(state, row_denoiser, col_denoiser, sigma, **kwargs)
    entry_pred = entry_denoised(state, entry_denoiser, sigma)
    return ((state - row_pred) + (state - col_pred) - (state - entry_pred)) / sigma


def entry_denoised(state: np.ndarray, entry_denoiser, sigma: float) -> np.ndarray:
    """Per-entry predictions; ``entry_denoiser`` is one denoiser or a V x F
    nested list of them."""
    v, f, d = state.shape[-3:]
    if not isinstance(entry_denoiser, (list, tuple)):
        entry_denoiser = [[entry_denoiser] * f for _ in range(v)]
    if len(entry_denoiser) != v or any(len(r) != f for r in entry_denoiser):
        raise ValueError("need a V x F grid of entry denoisers")
    out = np.empty_like(state)
    for i in range(v):
        for j in range(f):
            den = entry_denoiser[i][j]
            if den.dim != d:
                raise ValueError("entry denoisers must take d values")
            out[..., i, j, :] = den.evaluate(state[..., i, j, :], sigma)
    return out


def apply_conditions(
    state,
    conditions: ConditionSet,
    sigma: float,
    seed: int,
    key: tuple[int, ...] = (),
) -> np.ndarray:
    """Replace conditioned entries by freshly noised copies of their clean values.

    ``state`` may carry leading batch axes, in which case ``seed`` is a
    sequence with one seed per batch element.  The noise for entry
    ``(i, j)`` comes from stream ``(seed, CONDITION, *key, i, j)``.  At
    ``sigma == 0`` the clean value is written exactly.
    """
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    out = np.array(state, dtype=np.float64)
    if not conditions.entries:
        return out
    v, f, d = out.shape[-3:]
    conditions.validate(v, f, d)
    batched = out.ndim > 3
    seeds = list(np.atleast_1d(seed)) if batched else [seed]
    if batched and len(seeds) != int(np.prod(out.shape[:-3])):
        raise ValueError("need one seed per batch element")
    flat = out.reshape(-1, v, f, d)
    for (i, j), clean in conditions.entries.items():
        if sigma == 0:
            flat[:, i, j, :] = clean
            continue
        for b, sd in enumerate(seeds):
            eps = streams.normal(int(sd), (streams.CONDITION, *key, i, j), d)
            flat[b, i, j, :] = clean + sigma * eps
    return flat.reshape(out.shape)
