"""Experiment configuration stored as a nested JSON document.

Every field has a default; the defaults reproduce the reference experiment
(λ=0.1, L=100, R ∈ {3, 10}, M=100, Zipf tilt 0.1, p0=1, c=10, gamma marks of
scale 1 and mean 0.7 times the hard-core radius).
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import numpy as np

from .calibration import POLICY_FAMILIES, SoftCoreSettings
from .demand import DemandModel
from .estimators import ReplicationPlan
from .spatial import EDGE_MODES, Window


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class NetworkConfig:
    intensity: float = 0.1
    side_length: float = 100.0
    edge_mode: str = "border_crop"
    radii: tuple[float, ...] = (3.0, 10.0)


@dataclass(frozen=True)
class DemandConfig:
    catalog_size: int = 100
    zipf_tilt: float = 0.1


@dataclass(frozen=True)
class PolicyConfig:
    families: tuple[str, ...] = POLICY_FAMILIES
    p0: float = 1.0
    softness: float = 10.0
    mark_scale: float = 1.0
    mark_rule: str = "radius_ratio"
    mark_ratio: float = 0.7
    exponent: float = 1.0


@dataclass(frozen=True)
class SweepConfig:
    # budgets are multiples of the independent-placement budget reaching hit_level
    scales: tuple[float, ...] = (0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0)
    hit_level: float = 0.7
    coverage: float = 0.95


@dataclass(frozen=True)
class RunConfig:
    replications: int = 200
    probes: int = 300
    seed: int = 20190101
    confidence: float = 0.95
    output_dir: str = "results"


@dataclass(frozen=True)
class ExperimentConfig:
    network: NetworkConfig = field(default_factory=NetworkConfig)
    demand: DemandConfig = field(default_factory=DemandConfig)
    policies: PolicyConfig = field(default_factory=PolicyConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    run: RunConfig = field(default_factory=RunConfig)

    def __post_init__(self):
        validate(self)

    # convenience views -------------------------------------------------
    @property
    def window(self) -> Window:
        return Window(self.network.side_length, self.network.edge_mode)

    @property
    def demand_model(self) -> DemandModel:
        return DemandModel(self.demand.catalog_size, self.demand.zipf_tilt)

    @property
    def plan(self) -> ReplicationPlan:
        r = self.run
        return ReplicationPlan(r.replications, r.seed, r.probes, r.confidence)

    @property
    def soft(self) -> SoftCoreSettings:
        p = self.policies
        return SoftCoreSettings(p.mark_scale, p.p0, p.softness, p.mark_rule, p.mark_ratio)

    def to_dict(self) -> dict[str, Any]:
        return json.loads(json.dumps(asdict(self)))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def digest(self) -> str:
        # the output location does not affect results
        data = self.to_dict()
        del data["run"]["output_dir"]
        return hashlib.sha256(json.dumps(data, sort_keys=True).encode()).hexdigest()[:12]

    def with_overrides(self, seed=None, replications=None, radius=None, output_dir=None) -> "ExperimentConfig":
        run, net = self.run, self.network
        if seed is not None:
            run = replace(run, seed=seed)
        if replications is not None:
            run = replace(run, replications=replications)
        if output_dir is not None:
            run = replace(run, output_dir=str(output_dir))
        if radius is not None:
            net = replace(net, radii=tuple(float(r) for r in np.atleast_1d(radius)))
        return replace(self, run=run, network=net)


_SECTIONS = {
    "network": NetworkConfig,
    "demand": DemandConfig,
    "policies": PolicyConfig,
    "sweep": SweepConfig,
    "run": RunConfig,
}


def _build(section: str, cls, data: dict):
    if not isinstance(data, dict):
        raise ConfigError(section, "expected an object")
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"{section}.{key}", "unknown field")
        if isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(section, str(exc)) from None


def from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("<root>", "expected an object")
    unknown = set(data) - set(_SECTIONS)
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown section")
    parts = {name: _build(name, cls, data.get(name, {})) for name, cls in _SECTIONS.items()}
    return ExperimentConfig(**parts)


def loads(text: str) -> ExperimentConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"not valid JSON ({exc})") from None
    return from_dict(data)


def load(path: str | Path) -> ExperimentConfig:
    return loads(Path(path).read_text())


def _positive(name, value, integer=False):
    ok = isinstance(value, (int, float)) and not isinstance(value, bool) and np.isfinite(value) and value > 0
    if integer:
        ok = ok and float(value).is_integer()
    if not ok:
        raise ConfigError(name, f"must be a positive {'integer' if integer else 'number'}, got {value!r}")


def validate(cfg: ExperimentConfig) -> None:
    n, d, p, s, r = cfg.network, cfg.demand, cfg.policies, cfg.sweep, cfg.run
    _positive("network.intensity", n.intensity)
    _positive("network.side_length", n.side_length)
    if n.edge_mode not in EDGE_MODES:
        raise ConfigError("network.edge_mode", f"must be one of {EDGE_MODES}")
    if not n.radii:
        raise ConfigError("network.radii", "at least one radius is required")
    for R in n.radii:
        _positive("network.radii", R)
    _positive("demand.catalog_size", d.catalog_size, integer=True)
    if not (isinstance(d.zipf_tilt, (int, float)) and d.zipf_tilt >= 0):
        raise ConfigError("demand.zipf_tilt", "must be non-negative")
    if not p.families:
        raise ConfigError("policies.families", "policy list is empty")
    for fam in p.families:
        if fam not in POLICY_FAMILIES:
            raise ConfigError("policies.families", f"unknown policy {fam!r}")
    if not (isinstance(p.p0, (int, float)) and 0 < p.p0 <= 1):
        raise ConfigError("policies.p0", "must lie in (0, 1]")
    _positive("policies.softness", p.softness)
    if not (isinstance(p.mark_scale, (int, float)) and p.mark_scale >= 0):
        raise ConfigError("policies.mark_scale", "must be non-negative")
    if p.mark_rule not in ("radius_ratio", "budget"):
        raise ConfigError("policies.mark_rule", "must be 'radius_ratio' or 'budget'")
    _positive("policies.mark_ratio", p.mark_ratio)
    if not (isinstance(p.exponent, (int, float)) and p.exponent >= 0):
        raise ConfigError("policies.exponent", "must be non-negative")
    if not s.scales:
        raise ConfigError("sweep.scales", "at least one scale is required")
    for v in s.scales:
        _positive("sweep.scales", v)
    if not 0 < s.hit_level < 1:
        raise ConfigError("sweep.hit_level", "must lie in (0, 1)")
    if not 0 < s.coverage < 1:
        raise ConfigError("sweep.coverage", "must lie in (0, 1)")
    _positive("run.replications", r.replications, integer=True)
    _positive("run.probes", r.probes, integer=True)
    if not (isinstance(r.seed, int) and not isinstance(r.seed, bool) and r.seed >= 0):
        raise ConfigError("run.seed", "must be a non-negative integer")
    if not 0 < r.confidence < 1:
        raise ConfigError("run.confidence", "must lie in (0, 1)")
