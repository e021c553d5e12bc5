"""Scenario configuration: a strict ``key = value`` format with ``[section]``
grouping.

Example::

    scenario = harmonic
    alpha = 1.0
    engines = [qch, classical]

    [grid]
    n = 512

Unknown keys, duplicate keys and type mismatches are rejected with the line
number they occur on.
"""
from __future__ import annotations

import math
import os
from dataclasses import asdict, dataclass, field, fields, replace

from .core import (
    ConfigurationError,
    GaussianRepulsivePotential,
    Grid1D,
    HarmonicPotential,
    PhysParams,
    ZeroPotential,
)

__all__ = [
    "ScenarioConfig",
    "GridConfig",
    "parse_config",
    "apply_overrides",
    "SCENARIOS",
    "ENGINES",
]

SCENARIOS = ("harmonic", "repulsive", "free", "custom")
ENGINES = ("qch", "qm2d", "classical", "sampler")
POTENTIALS = ("zero", "harmonic", "gaussian_repulsive")


@dataclass(frozen=True)
class GridConfig:
    x_min: float = -20.0
    x_max: float = 20.0
    n: int = 1024

    def build(self) -> Grid1D:
        return Grid1D(self.x_min, self.x_max, self.n)


@dataclass(frozen=True)
class PotentialConfig:
    kind: str = ""
    K: float = 1.0
    A: float = 1.0
    width: float = 1.0


@dataclass(frozen=True)
class SamplerConfig:
    n_particles: int = 100_000
    dt: float = 1e-3


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str = "harmonic"
    alpha: float = 1.0
    mass_ratio: float = 5.0
    dt: float = 1e-3
    t_max: float = 1.2
    record_every: int = 1
    snapshot_every: int = 0
    engines: tuple = ("qch",)
    qm_phase_k: float = -5.0
    seed: int = 20140101
    out_dir: str = ""
    r1_0: float = 0.5
    v1_0: float = -1.0
    kinetic_coupling: float = 0.0
    qm_record_every: int = 10
    label: str = ""
    grid: GridConfig = field(default_factory=GridConfig)
    grid2d: GridConfig = field(default_factory=lambda: GridConfig(n=512))
    potential: PotentialConfig = field(default_factory=PotentialConfig)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)

    def __post_init__(self):
        validate(self)

    @property
    def params(self) -> PhysParams:
        return PhysParams(mass_ratio=self.mass_ratio)

    @property
    def n_steps(self) -> int:
        return int(round(self.t_max / self.dt))

    def build_potential(self):
        kind = self.potential.kind or {
            "harmonic": "harmonic",
            "repulsive": "gaussian_repulsive",
            "free": "zero",
        }[self.scenario]
        if kind == "harmonic":
            return HarmonicPotential(self.potential.K)
        if kind == "gaussian_repulsive":
            return GaussianRepulsivePotential(self.potential.A,
                                              self.potential.width)
        return ZeroPotential()

    def output_dir(self) -> str:
        return self.out_dir or os.environ.get("QCH_LAB_OUT", "qch-out")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["engines"] = list(self.engines)
        return d


def validate(cfg: ScenarioConfig):
    if cfg.scenario not in SCENARIOS:
        raise ConfigurationError(
            f"scenario must be one of {', '.join(SCENARIOS)}; got {cfg.scenario!r}")
    if not cfg.alpha > 0:
        raise ConfigurationError("alpha must be positive")
    if not cfg.mass_ratio > 0:
        raise ConfigurationError("mass_ratio must be positive")
    if not cfg.dt > 0:
        raise ConfigurationError("dt must be positive")
    if cfg.t_max < 0:
        raise ConfigurationError("t_max must be non-negative")
    if cfg.record_every < 1 or cfg.qm_record_every < 1:
        raise ConfigurationError("record_every must be at least 1")
    if cfg.snapshot_every < 0:
        raise ConfigurationError("snapshot_every must be non-negative")
    if not cfg.engines:
        raise ConfigurationError("engines must not be empty")
    bad = [e for e in cfg.engines if e not in ENGINES]
    if bad:
        raise ConfigurationError(f"unknown engine(s): {', '.join(bad)}")
    steps = cfg.t_max / cfg.dt
    if abs(steps - round(steps)) > 1e-6 * max(1.0, steps):
        raise ConfigurationError("t_max must be a whole number of dt steps")
    if round(steps) % cfg.record_every:
        raise ConfigurationError("dt * record_every must divide t_max")
    if cfg.scenario == "custom" and not cfg.potential.kind:
        raise ConfigurationError("custom scenario needs [potential] kind")
    if cfg.potential.kind and cfg.potential.kind not in POTENTIALS:
        raise ConfigurationError(
            f"potential kind must be one of {', '.join(POTENTIALS)}")
    if "sampler" in cfg.engines and "qch" not in cfg.engines \
            and cfg.scenario != "free":
        raise ConfigurationError(
            "the sampler engine needs the qch engine or the free scenario")
    if cfg.sampler.n_particles < 1:
        raise ConfigurationError("sampler n_particles must be positive")
    for g in (cfg.grid, cfg.grid2d):
        g.build()


_SECTIONS = {"grid": GridConfig, "grid2d": GridConfig,
             "potential": PotentialConfig, "sampler": SamplerConfig}
_TOP = {f.name: f for f in fields(ScenarioConfig) if f.name not in _SECTIONS}
_REQUIRED = ("scenario",)


def _convert(raw: str, target, key: str, lineno):
    where = f"line {lineno}: " if lineno else ""
    raw = raw.strip()
    if len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in "\"'":
        raw = raw[1:-1]
    try:
        if target is tuple:
            inner = raw
            if inner.startswith("[") and inner.endswith("]"):
                inner = inner[1:-1]
            items = [s.strip().strip("\"'") for s in inner.split(",")]
            return tuple(s for s in items if s)
        if target is bool:
            if raw.lower() in ("true", "yes", "1"):
                return True
            if raw.lower() in ("false", "no", "0"):
                return False
            raise ValueError
        if target is int:
            val = float(raw)
            if val != int(val):
                raise ValueError
            return int(val)
        if target is float:
            val = float(raw)
            if not math.isfinite(val):
                raise ValueError
            return val
        return raw
    except ValueError:
        raise ConfigurationError(
            f"{where}{key}: expected {target.__name__}, got {raw!r}") from None


def _field_type(f):
    t = f.type if isinstance(f.type, str) else f.type.__name__
    return {"float": float, "int": int, "str": str, "tuple": tuple,
            "bool": bool}[t]


def parse_config(text: str) -> ScenarioConfig:
    """Parse and validate a scenario configuration document."""
    top: dict = {}
    sections: dict = {name: {} for name in _SECTIONS}
    current = None
    seen = set()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]") and "=" not in line:
            current = line[1:-1].strip()
            if current not in _SECTIONS:
                raise ConfigurationError(
                    f"line {lineno}: unknown section [{current}]")
            continue
        if "=" not in line:
            raise ConfigurationError(
                f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        qualified = f"{current}.{key}" if current else key
        if qualified in seen:
            raise ConfigurationError(f"line {lineno}: duplicate key {qualified}")
        seen.add(qualified)
        if current is None:
            if key not in _TOP:
                raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
            top[key] = _convert(raw, _field_type(_TOP[key]), key, lineno)
        else:
            cls = _SECTIONS[current]
            sec_fields = {f.name: f for f in fields(cls)}
            if key not in sec_fields:
                raise ConfigurationError(
                    f"line {lineno}: unknown key {key!r} in [{current}]")
            sections[current][key] = _convert(
                raw, _field_type(sec_fields[key]), qualified, lineno)
    for key in _REQUIRED:
        if key not in top:
            raise ConfigurationError(f"missing required key {key!r}")
    kwargs = dict(top)
    for name, cls in _SECTIONS.items():
        if sections[name]:
            base = ScenarioConfig.__dataclass_fields__[name].default_factory()
            kwargs[name] = replace(base, **sections[name])
    return ScenarioConfig(**kwargs)


def apply_overrides(cfg: ScenarioConfig, overrides) -> ScenarioConfig:
    """Apply ``key=value`` strings (``section.key`` for sections)."""
    top: dict = {}
    sections: dict = {}
    for item in overrides or ():
        if "=" not in item:
            raise ConfigurationError(f"override {item!r} is not key=value")
        key, raw = (s.strip() for s in item.split("=", 1))
        if "." in key:
            sec, sub = key.split(".", 1)
            if sec not in _SECTIONS:
                raise ConfigurationError(f"unknown section {sec!r}")
            sec_fields = {f.name: f for f in fields(_SECTIONS[sec])}
            if sub not in sec_fields:
                raise ConfigurationError(f"unknown key {key!r}")
            sections.setdefault(sec, {})[sub] = _convert(
                raw, _field_type(sec_fields[sub]), key, None)
        else:
            if key not in _TOP:
                raise ConfigurationError(f"unknown key {key!r}")
            top[key] = _convert(raw, _field_type(_TOP[key]), key, None)
    for sec, vals in sections.items():
        top[sec] = replace(getattr(cfg, sec), **vals)
    return replace(cfg, **top)
