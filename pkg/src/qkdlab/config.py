"""Scenario configuration: schema, defaults, validation and YAML round-trip.

Unknown keys are errors. Every validation failure names the dotted field
path, e.g. ``detectors.d0.dead_time``.
"""
from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path

import yaml

from .attacks import build_strategy
from .detector import DetectorParams, EfficiencyCurve, GateSchedule
from .errors import ConfigError, ParamError

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ChannelConfig:
    loss: float = 0.0
    delay: float = 0.0

    def __post_init__(self):
        if not (0 <= self.loss <= 1):
            raise ParamError("loss", "must be in [0, 1]")
        if not (math.isfinite(self.delay) and self.delay >= 0):
            raise ParamError("delay", "must be >= 0")


@dataclass(frozen=True)
class ScheduleConfig:
    period: float = 2000.0
    gate_offset_d0: float = 0.0
    gate_offset_d1: float = 0.0
    # per-session uniform draw added to gate_offset_d1; None disables
    random_mismatch: tuple[float, float] | None = None

    def __post_init__(self):
        GateSchedule(self.period, self.gate_offset_d0, self.gate_offset_d1)
        if self.random_mismatch is not None:
            lo, hi = self.random_mismatch
            if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
                raise ParamError("random_mismatch", "must be [lo, hi] with lo <= hi")

    def gate_schedule(self, origin: float = 0.0, extra_mismatch: float = 0.0) -> GateSchedule:
        return GateSchedule(self.period, self.gate_offset_d0,
                            self.gate_offset_d1 + extra_mismatch, origin)


@dataclass(frozen=True)
class StrategyConfig:
    kind: str = "none"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind != "none":
            build_strategy(self.kind, self.params)

    def build(self):
        return None if self.kind == "none" else build_strategy(self.kind, self.params)


@dataclass(frozen=True)
class CalibrationConfig:
    pulse_intensity: float = 2000.0
    num_pulses_per_step: int = 1000
    scan_min: float = -2.0
    scan_max: float = 2.0
    scan_step: float = 0.05
    pulse_duration: float = 2.0
    counting: str = "expected"
    run_before_session: bool = False

    def __post_init__(self):
        if not self.scan_step > 0:
            raise ParamError("scan_step", "must be > 0")
        if not self.scan_min < self.scan_max:
            raise ParamError("scan_max", "must exceed scan_min")
        if not (self.scan_min <= 0.0 <= self.scan_max):
            raise ParamError("scan_min", "scan range must cover the nominal arrival (0 ns)")
        if not self.pulse_intensity >= 0:
            raise ParamError("pulse_intensity", "must be >= 0")
        if not self.num_pulses_per_step >= 1:
            raise ParamError("num_pulses_per_step", "must be >= 1")
        if not self.pulse_duration >= 0:
            raise ParamError("pulse_duration", "must be >= 0")
        if self.counting not in ("expected", "sampled"):
            raise ParamError("counting", "must be 'expected' or 'sampled'")


@dataclass(frozen=True)
class AnalysisConfig:
    bin_width: float = 0.05

    def __post_init__(self):
        if not self.bin_width > 0:
            raise ParamError("bin_width", "must be > 0")


@dataclass(frozen=True)
class SessionConfig:
    num_pulses: int = 100_000
    seed: int = 0
    name: str = "custom"
    schema_version: int = SCHEMA_VERSION
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    detectors: tuple[DetectorParams, DetectorParams] = (DetectorParams(), DetectorParams())
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    strategy: StrategyConfig = field(default_factory=StrategyConfig)
    qber_threshold: float = 0.11
    sample_fraction: float = 0.5
    timestamp_resolution: float = 0.0
    calibration: CalibrationConfig | None = None
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)

    def __post_init__(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ParamError("schema_version", f"unsupported version {self.schema_version}")
        if not self.num_pulses >= 0:
            raise ParamError("num_pulses", "must be >= 0")
        if not (0 <= self.seed < 2**64):
            raise ParamError("seed", "must be a 64-bit unsigned integer")
        if not (0 <= self.qber_threshold <= 1):
            raise ParamError("qber_threshold", "must be in [0, 1]")
        if not (0 < self.sample_fraction <= 1):
            raise ParamError("sample_fraction", "must be in (0, 1]")
        if not self.timestamp_resolution >= 0:
            raise ParamError("timestamp_resolution", "must be >= 0")

    def gate_schedule(self, extra_mismatch: float = 0.0) -> GateSchedule:
        return self.schedule.gate_schedule(self.channel.delay, extra_mismatch)


# --- dict <-> dataclass ----------------------------------------------------

_NESTED = {
    "channel": ChannelConfig,
    "schedule": ScheduleConfig,
    "strategy": StrategyConfig,
    "calibration": CalibrationConfig,
    "analysis": AnalysisConfig,
}


def _coerce(value, default, path):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(path, f"expected a boolean, got {value!r}")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, float) and value.is_integer():
                return int(value)
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(path, f"expected a string, got {value!r}")
        return value
    return value


def _build(cls, data, path):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(path, "expected a mapping")
    names = {f.name: f for f in fields(cls)}
    proto = cls()
    kwargs = {}
    for key, value in data.items():
        sub = f"{path}.{key}" if path else key
        if key not in names:
            raise ConfigError(sub, "unknown key")
        if cls is SessionConfig and key == "detectors":
            kwargs[key] = _build_detectors(value, sub)
        elif cls is SessionConfig and key in _NESTED:
            kwargs[key] = None if (key == "calibration" and value is None) else _build(_NESTED[key], value, sub)
        elif cls is DetectorParams and key == "curve":
            kwargs[key] = _build(EfficiencyCurve, value, sub)
        elif cls is StrategyConfig and key == "params":
            if value is not None and not isinstance(value, dict):
                raise ConfigError(sub, "expected a mapping")
            kwargs[key] = dict(value or {})
        elif cls is ScheduleConfig and key == "random_mismatch":
            if value is not None:
                if not (isinstance(value, (list, tuple)) and len(value) == 2):
                    raise ConfigError(sub, "expected [lo, hi]")
                value = tuple(_coerce(v, 0.0, sub) for v in value)
            kwargs[key] = value
        else:
            kwargs[key] = _coerce(value, getattr(proto, key), sub)
    try:
        return cls(**kwargs)
    except ParamError as exc:
        raise ConfigError(f"{path}.{exc.field}" if path else exc.field, exc.reason) from None


def _build_detectors(data, path):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(path, "expected a mapping with d0/d1")
    shared = data.get("both", {}) or {}
    for key in data:
        if key not in ("d0", "d1", "both"):
            raise ConfigError(f"{path}.{key}", "unknown key")
    out = []
    for name in ("d0", "d1"):
        merged = _deep_merge(shared, data.get(name) or {})
        out.append(_build(DetectorParams, merged, f"{path}.{name}"))
    return tuple(out)


def _deep_merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = v
    return out


def config_from_dict(data: dict) -> SessionConfig:
    if not isinstance(data, dict):
        raise ConfigError("", "top level must be a mapping")
    if "num_pulses" not in data or "seed" not in data:
        missing = "num_pulses" if "num_pulses" not in data else "seed"
        raise ConfigError(missing, "required")
    cfg = _build(SessionConfig, data, "")
    if cfg.num_pulses <= 0:
        raise ConfigError("num_pulses", "must be > 0 for key sessions")
    return cfg


def _plain(obj):
    if hasattr(obj, "__dataclass_fields__"):
        return {f.name: _plain(getattr(obj, f.name)) for f in fields(obj)}
    if isinstance(obj, tuple):
        return [_plain(v) for v in obj]
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    return obj


def config_to_dict(cfg: SessionConfig) -> dict:
    d = _plain(cfg)
    d["detectors"] = {"d0": d["detectors"][0], "d1": d["detectors"][1]}
    return d


def dump_config(cfg: SessionConfig) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False)


def config_hash(cfg: SessionConfig) -> str:
    blob = json.dumps(config_to_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def load_config(path) -> SessionConfig:
    """Load a scenario file by path, or a shipped scenario by name."""
    p = Path(path)
    if not p.exists() and not p.suffix:
        text = scenario_text(str(path))
    else:
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError("", f"cannot read {path}: {exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("", f"parse error: {exc}") from None
    return config_from_dict(data)


def shipped_scenarios() -> list[str]:
    root = resources.files("qkdlab") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def scenario_text(name: str) -> str:
    res = resources.files("qkdlab") / "scenarios" / f"{name}.yaml"
    if not res.is_file():
        raise ConfigError("", f"no scenario file or shipped scenario named {name!r}")
    return res.read_text()


def with_override(cfg: SessionConfig, path: str, value) -> SessionConfig:
    """Return ``cfg`` with the numeric field at dotted ``path`` set to ``value``."""
    data = config_to_dict(cfg)
    node = data
    parts = path.split(".")
    for part in parts[:-1]:
        if not isinstance(node, dict) or part not in node or not isinstance(node[part], dict):
            raise ConfigError(path, "parameter path does not resolve")
        node = node[part]
    leaf = parts[-1]
    if not isinstance(node, dict) or leaf not in node:
        raise ConfigError(path, "parameter path does not resolve")
    if isinstance(node[leaf], bool) or not isinstance(node[leaf], (int, float)):
        raise ConfigError(path, "parameter is not numeric")
    node[leaf] = value
    return config_from_dict(data)
