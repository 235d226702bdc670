"""Experiment configuration: a YAML document with one section per concern.

Every section is optional and falls back to the defaults below.  Unknown
keys anywhere are rejected.  See ``configs/default.yaml`` for the full
schema with comments.
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, get_type_hints

import numpy as np
import yaml

from ..compose import CompositionConfig, constant_scale_schedule, linear_scale_schedule
from ..models import GaussianModel, GmmModel, PivotTreeSpec
from ..schedule import RHO, SIGMA_MAX, SIGMA_MIN, SigmaSchedule, karras_sigmas


class ConfigError(ValueError):
    pass


@dataclass
class ScheduleSection:
    n_steps: int = 50
    sigma_min: float = SIGMA_MIN
    sigma_max: float = SIGMA_MAX
    rho: float = RHO

    def build(self) -> SigmaSchedule:
        return karras_sigmas(self.n_steps, self.sigma_min, self.sigma_max, self.rho)


@dataclass
class ScaleSection:
    kind: str = "constant"  # constant | linear
    value: float = 0.5
    start: float = 0.0
    stop: float = 1.0
    n_steps: int = 50

    def build(self):
        if self.kind == "constant":
            return constant_scale_schedule(self.value)
        if self.kind == "linear":
            return linear_scale_schedule(self.start, self.stop, self.n_steps)
        raise ConfigError(f"unknown scale schedule kind {self.kind!r}")


@dataclass
class CompositionSection:
    mode: str = "convex"
    scale: ScaleSection = field(default_factory=ScaleSection)
    n_rollback: int = 0
    rollback_repeats: int = 2
    orientation: str = "algorithm"
    renoise: str = "as_written"
    reentry: float = 1.0

    def build(self, **overrides) -> CompositionConfig:
        kw = dict(
            mode=self.mode,
            s_schedule=self.scale.build(),
            n_rollback=self.n_rollback,
            rollback_repeats=self.rollback_repeats,
            orientation=self.orientation,
            renoise=self.renoise,
            reentry=self.reentry,
        )
        kw.update(overrides)
        return CompositionConfig(**kw)


@dataclass
class TheoremSection:
    n_models: int = 20
    n_points: int = 50
    v_range: list[int] = field(default_factory=lambda: [2, 5])
    f_range: list[int] = field(default_factory=lambda: [2, 5])
    d_choices: list[int] = field(default_factory=lambda: [1, 2, 3])
    noise_levels: list[float] = field(default_factory=lambda: [0.0, 0.5, 2.0, 10.0])
    wiring: str = "tree"
    control_wiring: str = "cross"
    tolerance: float = 1e-8
    independent_tolerance: float = 1e-10
    control_threshold: float = 1e-4
    control_fraction: float = 0.9


@dataclass
class VrsSection:
    shape: list[int] = field(default_factory=lambda: [2, 2, 1])
    modes: list[float] = field(default_factory=lambda: [-3.0, 3.0])
    component_std: float = 0.5
    delta: float = 1.0
    control_delta: float = 0.0
    n_seeds: int = 2000
    n_rollback: int = 5
    rollback_repeats: int = 2
    n_boot: int = 2000
    ci_level: float = 0.95
    control_alpha: float = 0.01
    bimodality_step: int = 4


@dataclass
class SweepSection:
    shape: list[int] = field(default_factory=lambda: [3, 3, 2])
    n_models: int = 5
    n_points: int = 50
    s_grid: list[float] = field(default_factory=lambda: [round(0.1 * k, 1) for k in range(11)])
    noise_levels: list[float] = field(default_factory=lambda: [0.0, 0.5, 2.0, 10.0])
    independent_tolerance: float = 1e-12


@dataclass
class CouplingSection:
    """Pivot tree at (0, 0) with one shared coefficient and innovation variance."""

    coefficient: float = 0.8
    innovation_var: float = 0.25
    pivot_var: float = 1.0


@dataclass
class ConditionSection:
    shape: list[int] = field(default_factory=lambda: [3, 3, 1])
    coupling: CouplingSection = field(default_factory=CouplingSection)
    n_runs: int = 100
    n_energy: int = 500
    n_permutations: int = 199
    alpha: float = 0.01
    n_correlation: int = 1000


@dataclass
class SampleSection:
    model: str = "pivot_tree"  # pivot_tree | gmm_pair
    shape: list[int] = field(default_factory=lambda: [3, 4, 2])
    n_samples: int = 16
    condition_first_row_column: bool = False
    pivot_tree: dict | None = None
    gmm_row: dict | None = None
    gmm_col: dict | None = None
    coupling: CouplingSection = field(default_factory=CouplingSection)


@dataclass
class ExperimentConfig:
    seed: int = 0
    schedule: ScheduleSection = field(default_factory=ScheduleSection)
    composition: CompositionSection = field(default_factory=CompositionSection)
    theorem: TheoremSection = field(default_factory=TheoremSection)
    vrs: VrsSection = field(default_factory=VrsSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    condition: ConditionSection = field(default_factory=ConditionSection)
    sample: SampleSection = field(default_factory=SampleSection)
    source_bytes: bytes = field(default=b"", repr=False, compare=False)

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.source_bytes).hexdigest()

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out.pop("source_bytes")
        return out


def _build(cls, data: Any, path: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'} must be a mapping")
    hints = get_type_hints(cls)
    fields = {f.name: f for f in dataclasses.fields(cls) if f.name != "source_bytes"}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        raise ConfigError(f"unknown key(s) in {path or 'config'}: {', '.join(unknown)}")
    kwargs = {}
    for name, value in data.items():
        hint = hints[name]
        where = f"{path}.{name}" if path else name
        if dataclasses.is_dataclass(hint):
            kwargs[name] = _build(hint, value, where)
        else:
            kwargs[name] = _coerce(hint, value, where)
    return cls(**kwargs)


def _coerce(hint, value, where):
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where} must be an integer")
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} must be a number")
        return float(value)
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where} must be true or false")
        return value
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where} must be a string")
        return value
    origin = getattr(hint, "__origin__", None)
    if origin is list:
        if not isinstance(value, list):
            raise ConfigError(f"{where} must be a list")
        (item,) = hint.__args__
        return [_coerce(item, v, f"{where}[{k}]") for k, v in enumerate(value)]
    if value is not None and not isinstance(value, dict):
        raise ConfigError(f"{where} must be a mapping")
    return value


def parse_config(text: str | bytes) -> ExperimentConfig:
    raw = text.encode() if isinstance(text, str) else text
    try:
        data = yaml.safe_load(raw) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from exc
    cfg = _build(ExperimentConfig, data, "")
    cfg.source_bytes = raw
    _validate(cfg)
    return cfg


def load_config(path: str | Path | None) -> ExperimentConfig:
    if path is None:
        return parse_config(b"")
    return parse_config(Path(path).read_bytes())


def _validate(cfg: ExperimentConfig):
    for name in ("vrs", "sweep", "condition", "sample"):
        shape = getattr(cfg, name).shape
        if len(shape) != 3 or min(shape) < 1:
            raise ConfigError(f"{name}.shape must be [V, F, d] with positive entries")
    th = cfg.theorem
    if len(th.v_range) != 2 or len(th.f_range) != 2 or th.v_range[0] > th.v_range[1] or th.f_range[0] > th.f_range[1]:
        raise ConfigError("theorem.v_range and theorem.f_range must be [lo, hi]")
    if any(s < 0 or s > 1 for s in cfg.sweep.s_grid):
        raise ConfigError("sweep.s_grid values must lie in [0, 1]")
    if cfg.sample.model not in ("pivot_tree", "gmm_pair"):
        raise ConfigError("sample.model must be pivot_tree or gmm_pair")
    if len(cfg.vrs.modes) != 2:
        raise ConfigError("vrs.modes must list two scalar modes")


# -- model (de)serialization -------------------------------------------------


def _arr(x) -> list:
    return np.asarray(x, dtype=np.float64).tolist()


def gaussian_to_dict(model: GaussianModel) -> dict:
    return {"mean": _arr(model.mean), "cov": _arr(model.cov)}


def gaussian_from_dict(data: dict) -> GaussianModel:
    return GaussianModel(data["mean"], data["cov"])


def gmm_to_dict(model: GmmModel) -> dict:
    return {"weights": _arr(model.weights), "components": [gaussian_to_dict(c) for c in model.components]}


def gmm_from_dict(data: dict) -> GmmModel:
    return GmmModel(data["weights"], [gaussian_from_dict(c) for c in data["components"]])


def _key(entry) -> str:
    return f"{entry[0]},{entry[1]}"


def _unkey(text: str) -> tuple[int, int]:
    i, j = text.split(",")
    return int(i), int(j)


def pivot_tree_to_dict(spec: PivotTreeSpec) -> dict:
    return {
        "v": spec.v,
        "f": spec.f,
        "entry_dim": spec.entry_dim,
        "pivot": list(spec.pivot),
        "pivot_prior": gaussian_to_dict(spec.pivot_prior),
        "row_coeffs": {str(j): _arr(m) for j, m in sorted(spec.row_coeffs.items())},
        "col_coeffs": {str(i): _arr(m) for i, m in sorted(spec.col_coeffs.items())},
        "rest_coeffs": {_key(e): _arr(m) for e, m in sorted(spec.rest_coeffs.items())},
        "noise_covs": {_key(e): _arr(m) for e, m in sorted(spec.noise_covs.items())},
        "extra_links": {
            _key(e): [{"parent": list(p), "coeff": _arr(m)} for p, m in links]
            for e, links in sorted(spec.extra_links.items())
        },
    }


PIVOT_TREE_KEYS = {
    "v", "f", "entry_dim", "pivot", "pivot_prior", "row_coeffs", "col_coeffs",
    "rest_coeffs", "noise_covs", "extra_links",
}


def pivot_tree_from_dict(data: dict) -> PivotTreeSpec:
    unknown = set(data) - PIVOT_TREE_KEYS
    if unknown:
        raise ConfigError(f"unknown pivot_tree key(s): {', '.join(sorted(unknown))}")
    d = int(data["entry_dim"])

    def mat(x):
        return np.asarray(x, dtype=np.float64).reshape(d, d)

    return PivotTreeSpec(
        v=int(data["v"]),
        f=int(data["f"]),
        entry_dim=d,
        pivot=tuple(int(k) for k in data["pivot"]),
        pivot_prior=gaussian_from_dict(data["pivot_prior"]),
        row_coeffs={int(j): mat(m) for j, m in data.get("row_coeffs", {}).items()},
        col_coeffs={int(i): mat(m) for i, m in data.get("col_coeffs", {}).items()},
        rest_coeffs={_unkey(e): mat(m) for e, m in data.get("rest_coeffs", {}).items()},
        noise_covs={_unkey(e): mat(m) for e, m in data.get("noise_covs", {}).items()},
        extra_links={
            _unkey(e): [(tuple(int(k) for k in link["parent"]), mat(link["coeff"])) for link in links]
            for e, links in data.get("extra_links", {}).items()
        },
    )
