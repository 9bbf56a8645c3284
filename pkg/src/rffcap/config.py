"""Structured configuration for scenarios, populations, and sweeps.

A scenario YAML file is a nested key-value document; every key is optional
and falls back to the defaults below. Unknown keys are rejected so typos
fail loudly. See the README for the full schema.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import yaml

from .fingerprint import PipelineConfig
from .signal_model import ParamDist, PopulationSpec

SWEEP_AXES = ("n_train_devices", "snr_db", "q_bits", "n_fft", "fs_hz")


class ConfigError(ValueError):
    pass


@dataclass
class EstimatorConfig:
    bins: int = 64
    projected_dim: int = 10


@dataclass
class ClassifierConfig:
    kappa: int = 150
    ridge: float | None = None
    train_per_class: int = 200
    test_per_class: int = 200
    max_devices: int = 40


@dataclass
class CapacityConfig:
    n_max: int = 10_000


@dataclass
class SweepConfig:
    axis: str = "snr_db"
    values: list = field(default_factory=lambda: [10.0, 20.0, 30.0])


@dataclass
class ScenarioConfig:
    """Complete description of one synthetic identification scenario."""

    population: PopulationSpec = field(default_factory=PopulationSpec)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    n_devices: int = 12
    per_class: int = 150
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    capacity: CapacityConfig = field(default_factory=CapacityConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    seed: int = 1234


def _build(cls, data: dict, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping, got {type(data).__name__}")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    return cls(**data)


def _population_from(data: dict, path: str) -> PopulationSpec:
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping")
    known = {f.name for f in fields(PopulationSpec)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    dists = {}
    for name, sub in data.items():
        if not isinstance(sub, dict) or set(sub) - {"mean", "std"}:
            raise ConfigError(f"{path}.{name}: expected mean/std mapping")
        dists[name] = ParamDist(float(sub.get("mean", 0.0)), float(sub.get("std", 0.0)))
    return PopulationSpec(**dists)


def scenario_from_dict(data: dict) -> ScenarioConfig:
    """Build a validated ScenarioConfig; missing sections use defaults."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("top level: expected a mapping")
    known = {f.name for f in fields(ScenarioConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"top level: unknown keys {sorted(unknown)}")

    cfg = ScenarioConfig()
    if "population" in data:
        cfg = replace(cfg, population=_population_from(data["population"], "population"))
    if "pipeline" in data:
        pdata = dict(data["pipeline"])
        if "lead_pad" in pdata:
            lp = pdata["lead_pad"]
            if not (isinstance(lp, (list, tuple)) and len(lp) == 2):
                raise ConfigError("pipeline.lead_pad: expected [low, high]")
            pdata["lead_pad"] = (int(lp[0]), int(lp[1]))
        cfg = replace(cfg, pipeline=_build(PipelineConfig, pdata, "pipeline"))
    for section, cls in (("estimator", EstimatorConfig),
                         ("classifier", ClassifierConfig),
                         ("capacity", CapacityConfig),
                         ("sweep", SweepConfig)):
        if section in data:
            cfg = replace(cfg, **{section: _build(cls, data[section], section)})
    for scalar in ("n_devices", "per_class", "seed"):
        if scalar in data:
            cfg = replace(cfg, **{scalar: int(data[scalar])})

    if cfg.n_devices < 2:
        raise ConfigError("n_devices must be >= 2")
    if cfg.per_class < 2:
        raise ConfigError("per_class must be >= 2")
    if cfg.sweep.axis not in SWEEP_AXES:
        raise ConfigError(f"sweep.axis must be one of {SWEEP_AXES}: {cfg.sweep.axis}")
    return cfg


def load_config(path) -> ScenarioConfig:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    return scenario_from_dict(data)


def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    pop = {f.name: {"mean": getattr(cfg.population, f.name).mean,
                    "std": getattr(cfg.population, f.name).std}
           for f in fields(PopulationSpec)}
    pipe = {f.name: getattr(cfg.pipeline, f.name) for f in fields(PipelineConfig)}
    pipe["lead_pad"] = list(pipe["lead_pad"])
    return {
        "population": pop,
        "pipeline": pipe,
        "n_devices": cfg.n_devices,
        "per_class": cfg.per_class,
        "estimator": {"bins": cfg.estimator.bins,
                      "projected_dim": cfg.estimator.projected_dim},
        "classifier": {"kappa": cfg.classifier.kappa, "ridge": cfg.classifier.ridge,
                       "train_per_class": cfg.classifier.train_per_class,
                       "test_per_class": cfg.classifier.test_per_class,
                       "max_devices": cfg.classifier.max_devices},
        "capacity": {"n_max": cfg.capacity.n_max},
        "sweep": {"axis": cfg.sweep.axis, "values": list(cfg.sweep.values)},
        "seed": cfg.seed,
    }


def save_config(cfg: ScenarioConfig, path) -> None:
    Path(path).write_text(yaml.safe_dump(scenario_to_dict(cfg), sort_keys=False))
