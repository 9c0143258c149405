"""JSON run configuration shared by all CLI commands.

A config document looks like::

    {
      "schema_version": 1,
      "sampler":   {"n_qubits": 4, "max_gates": 50, "num_samples": 100000, "seed": 0, "n_bins": 200},
      "qfi":       {"max_depth": 8, "min_leaf": 2, "grid_points": 1001, "n_knots": 25, "ridge_lambda": 0.001},
      "evolution": {"n_qubits": 4, "pop_size": 60, "generations": 80, "max_gates": 50,
                    "angle_sigma": 0.1, "seed": 0},
      "noise":     {"p1": 0.001, "p2": 0.01, "epsilon": 1e-9},
      "compare":   {"seeds": [0, 1, 2, 3, 4, 5, 6, 7, 8, 9]}
    }

Every section and field is optional; unknown keys are rejected.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .evolution import EvoConfig
from .noise import NoiseModel
from .qfi import QfiParams
from .sampling import DEFAULT_BINS, SamplerConfig

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SamplerSection:
    n_qubits: int = 4
    max_gates: int = 50
    num_samples: int = 100_000
    seed: int = 0
    n_bins: int = DEFAULT_BINS

    def build(self) -> SamplerConfig:
        return SamplerConfig(self.n_qubits, self.max_gates, self.num_samples, self.seed)


@dataclass(frozen=True)
class EvolutionSection:
    n_qubits: int = 4
    pop_size: int = 60
    generations: int = 80
    max_gates: int = 50
    angle_sigma: float = 0.1
    seed: int = 0

    def build(self, noise: NoiseModel, seed: int | None = None) -> EvoConfig:
        return EvoConfig(self.n_qubits, self.pop_size, self.generations, max_gates=self.max_gates,
                         noise=noise, angle_sigma=self.angle_sigma,
                         seed=self.seed if seed is None else seed)


@dataclass(frozen=True)
class CompareSection:
    seeds: tuple[int, ...] = tuple(range(10))


@dataclass(frozen=True)
class RunConfig:
    schema_version: int = SCHEMA_VERSION
    sampler: SamplerSection = field(default_factory=SamplerSection)
    qfi: QfiParams = field(default_factory=QfiParams)
    evolution: EvolutionSection = field(default_factory=EvolutionSection)
    noise: NoiseModel = field(default_factory=NoiseModel)
    compare: CompareSection = field(default_factory=CompareSection)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["compare"]["seeds"] = list(self.compare.seeds)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, sampler=replace(self.sampler, seed=seed),
                       evolution=replace(self.evolution, seed=seed))


_SECTIONS = {
    "sampler": SamplerSection,
    "qfi": QfiParams,
    "evolution": EvolutionSection,
    "noise": NoiseModel,
    "compare": CompareSection,
}


def _coerce(name: str, value, default):
    if isinstance(default, bool) or isinstance(value, bool):
        raise ConfigError(f"{name}: booleans are not accepted")
    if isinstance(default, int):
        if not isinstance(value, int):
            raise ConfigError(f"{name}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if not isinstance(value, (int, float)):
            raise ConfigError(f"{name}: expected a number, got {value!r}")
        return float(value)
    if isinstance(default, tuple):
        if not isinstance(value, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
            raise ConfigError(f"{name}: expected a list of integers, got {value!r}")
        return tuple(value)
    return value


def _section(name: str, cls, data) -> object:
    if not isinstance(data, dict):
        raise ConfigError(f"{name}: expected an object")
    defaults = cls()
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"{name}: unknown field(s) {sorted(unknown)}")
    values = {k: _coerce(f"{name}.{k}", v, getattr(defaults, k)) for k, v in data.items()}
    try:
        return cls(**values)
    except ValueError as exc:
        raise ConfigError(f"{name}: {exc}") from None


def config_from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(data) - set(_SECTIONS) - {"schema_version"}
    if unknown:
        raise ConfigError(f"unknown top-level field(s) {sorted(unknown)}")
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version {version!r} is not supported (expected {SCHEMA_VERSION})")
    parts = {name: _section(name, cls, data[name]) for name, cls in _SECTIONS.items() if name in data}
    cfg = RunConfig(**parts)
    try:
        cfg.sampler.build()
    except ValueError as exc:
        raise ConfigError(f"sampler: {exc}") from None
    return cfg


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return config_from_dict(data)
