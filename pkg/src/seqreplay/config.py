"""Experiment configuration.

Configs are flat ``key=value`` text with dotted section prefixes::

    # comments and blank lines are ignored
    seed = 7
    circuit.n = 128
    plasticity.trace_decay = 0.6

Every key not given takes its documented default.  Quantities measured in
current units are given relative to the firing threshold (``*_gain`` keys).
"""

from __future__ import annotations

import dataclasses
import hashlib
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import ConfigError
from .plasticity import PlasticityConfig

__all__ = [
    "SNNConfig",
    "PlasticitySection",
    "CircuitConfig",
    "EnvironmentConfig",
    "ProtocolConfig",
    "ExperimentConfig",
    "parse_config",
    "parse_config_text",
    "canonical_text",
    "config_hash",
    "with_overrides",
]


@dataclass(frozen=True)
class SNNConfig:
    threshold: float = 2.0
    leak: float = 0.0
    # external stimulus amplitude, in units of threshold
    stim_gain: float = 2.0


@dataclass(frozen=True)
class PlasticitySection:
    eta_rec: float = 0.1
    eta_pred: float = 0.1
    trace_decay: float = 0.01
    trace_decay_sensory: Optional[float] = None
    trace_decay_delay: Optional[float] = None
    trace_decay_prediction: Optional[float] = None
    w_min: float = 0.0
    # total current delivered by one fully potentiated pattern, in units of threshold
    rec_gain: float = 0.9
    pred_gain: float = 2.0


@dataclass(frozen=True)
class CircuitConfig:
    n: int = 128
    drive_gain: float = 1.5
    gate_inhibition_gain: float = 10.0
    replay_bias_gain: float = 0.5
    post_consolidation_wrec_decay: float = 1.0


@dataclass(frozen=True)
class EnvironmentConfig:
    k: Optional[int] = None
    num_sequences: int = 3
    length: int = 5
    duration: int = 5
    gap: int = 0
    seq_gap: int = 10
    repeats: int = 5
    policy: str = "disjoint"
    # "balanced" (even usage, bounded overlap) or "uniform" (independent draws)
    codebook: str = "balanced"
    max_shared: Optional[int] = None


@dataclass(frozen=True)
class ProtocolConfig:
    replay_count: int = 150
    replay_length: int = 40
    replay_flash: int = 1
    recall_repeats: int = 1
    recall_plasticity: bool = True


_SECTIONS = {
    "snn": SNNConfig,
    "plasticity": PlasticitySection,
    "circuit": CircuitConfig,
    "environment": EnvironmentConfig,
    "protocol": ProtocolConfig,
}


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    snn: SNNConfig = field(default_factory=SNNConfig)
    plasticity: PlasticitySection = field(default_factory=PlasticitySection)
    circuit: CircuitConfig = field(default_factory=CircuitConfig)
    environment: EnvironmentConfig = field(default_factory=EnvironmentConfig)
    protocol: ProtocolConfig = field(default_factory=ProtocolConfig)

    def __post_init__(self):
        _validate(self)

    # derived quantities

    @property
    def n(self) -> int:
        return self.circuit.n

    @property
    def k(self) -> int:
        if self.environment.k is not None:
            return self.environment.k
        return max(1, round(self.circuit.n / 8))

    @property
    def threshold(self) -> float:
        return self.snn.threshold

    @property
    def stim_amp(self) -> float:
        return self.snn.stim_gain * self.snn.threshold

    @property
    def w_drive(self) -> float:
        return self.circuit.drive_gain * self.snn.threshold

    @property
    def gate_inhibition(self) -> float:
        return self.circuit.gate_inhibition_gain * self.snn.threshold

    @property
    def replay_bias(self) -> float:
        return self.circuit.replay_bias_gain * self.snn.threshold

    @property
    def num_patterns(self) -> int:
        return self.environment.num_sequences * self.environment.length

    def trace_decay(self, population: str) -> float:
        p = self.plasticity
        own = {
            "sensory": p.trace_decay_sensory,
            "delay": p.trace_decay_delay,
            "prediction": p.trace_decay_prediction,
        }.get(population)
        return p.trace_decay if own is None else own

    def rec_plasticity(self) -> PlasticityConfig:
        p = self.plasticity
        return PlasticityConfig(p.eta_rec, self.trace_decay("sensory"), p.w_min,
                                p.rec_gain * self.threshold / self.k)

    def pred_plasticity(self) -> PlasticityConfig:
        p = self.plasticity
        return PlasticityConfig(p.eta_pred, self.trace_decay("delay"), p.w_min,
                                p.pred_gain * self.threshold / self.k)

    # flat key access

    def flat(self) -> dict[str, object]:
        out: dict[str, object] = {"seed": self.seed}
        for name in _SECTIONS:
            section = getattr(self, name)
            for f in dataclasses.fields(section):
                out[f"{name}.{f.name}"] = getattr(section, f.name)
        return out


def _fail(key: str, msg: str):
    raise ConfigError(f"{key}: {msg}")


def _validate(cfg: ExperimentConfig) -> None:
    s, p, c, e, pr = cfg.snn, cfg.plasticity, cfg.circuit, cfg.environment, cfg.protocol
    if cfg.seed < 0:
        _fail("seed", "must be a nonnegative integer")
    if not s.threshold > 0:
        _fail("snn.threshold", "must be positive")
    if not 0 <= s.leak < 1:
        _fail("snn.leak", "must lie in [0, 1)")
    if not s.stim_gain >= 1:
        _fail("snn.stim_gain", "must be >= 1 so stimulated neurons fire")
    for key in ("eta_rec", "eta_pred"):
        if not getattr(p, key) > 0:
            _fail(f"plasticity.{key}", "must be positive")
    for key in ("trace_decay", "trace_decay_sensory", "trace_decay_delay",
                "trace_decay_prediction"):
        v = getattr(p, key)
        if v is not None and not 0 < v < 1:
            _fail(f"plasticity.{key}", "must lie in (0, 1)")
    for key in ("rec_gain", "pred_gain"):
        if not getattr(p, key) > 0:
            _fail(f"plasticity.{key}", "must be positive")
    if p.w_min > 0:
        _fail("plasticity.w_min", "must be <= 0 (weights start at zero)")
    if c.n < 2:
        _fail("circuit.n", "must be >= 2")
    if not c.drive_gain >= 1:
        _fail("circuit.drive_gain", "one-to-one drive must reach threshold (>= 1)")
    if c.gate_inhibition_gain < 0:
        _fail("circuit.gate_inhibition_gain", "must be >= 0")
    if c.replay_bias_gain < 0 or c.replay_bias_gain >= 1:
        _fail("circuit.replay_bias_gain", "must lie in [0, 1) so bias alone stays subthreshold")
    if not 0 <= c.post_consolidation_wrec_decay <= 1:
        _fail("circuit.post_consolidation_wrec_decay", "must lie in [0, 1]")
    if e.k is not None and not 1 <= e.k:
        _fail("environment.k", "must be >= 1")
    if cfg.k > c.n:
        _fail("environment.k", f"pattern size {cfg.k} exceeds population size {c.n}")
    for key in ("num_sequences", "length", "duration", "repeats"):
        if getattr(e, key) < 1:
            _fail(f"environment.{key}", "must be >= 1")
    for key in ("gap", "seq_gap"):
        if getattr(e, key) < 0:
            _fail(f"environment.{key}", "must be >= 0")
    if e.policy not in ("disjoint", "shared"):
        _fail("environment.policy", "must be 'disjoint' or 'shared'")
    if e.codebook not in ("balanced", "uniform"):
        _fail("environment.codebook", "must be 'balanced' or 'uniform'")
    if e.max_shared is not None and not 0 <= e.max_shared <= cfg.k:
        _fail("environment.max_shared", f"must lie in [0, k={cfg.k}]")
    if pr.replay_count < 0:
        _fail("protocol.replay_count", "must be >= 0")
    if pr.replay_flash < 1:
        _fail("protocol.replay_flash", "must be >= 1")
    if pr.replay_length < e.length * e.duration:
        _fail("protocol.replay_length",
              f"must be >= length*duration = {e.length * e.duration}")
    if pr.replay_length < pr.replay_flash:
        _fail("protocol.replay_length", "must be >= protocol.replay_flash")
    if pr.recall_repeats < 1:
        _fail("protocol.recall_repeats", "must be >= 1")


def _field_types() -> dict[str, object]:
    out: dict[str, object] = {"seed": int}
    for name, cls in _SECTIONS.items():
        hints = typing.get_type_hints(cls)
        for f in dataclasses.fields(cls):
            out[f"{name}.{f.name}"] = hints[f.name]
    return out


def _coerce(key: str, raw, tp):
    if typing.get_origin(tp) is typing.Union:
        inner = [a for a in typing.get_args(tp) if a is not type(None)][0]
        if raw is None or (isinstance(raw, str) and raw.strip().lower() in ("", "none")):
            return None
        return _coerce(key, raw, inner)
    if not isinstance(raw, str):
        if tp is float and isinstance(raw, (int, float)) and not isinstance(raw, bool):
            return float(raw)
        if tp is int and isinstance(raw, int) and not isinstance(raw, bool):
            return raw
        if tp is bool and isinstance(raw, bool):
            return raw
        if tp is str and isinstance(raw, str):
            return raw
        raw = str(raw)
    text = raw.strip()
    try:
        if tp is bool:
            low = text.lower()
            if low in ("true", "1", "yes"):
                return True
            if low in ("false", "0", "no"):
                return False
            raise ValueError(text)
        if tp is int:
            return int(text)
        if tp is float:
            return float(text)
        return text
    except ValueError:
        _fail(key, f"cannot parse {text!r} as {getattr(tp, '__name__', tp)}")


def _build(values: dict[str, object]) -> ExperimentConfig:
    types = _field_types()
    sections: dict[str, dict[str, object]] = {name: {} for name in _SECTIONS}
    seed = 0
    for key, raw in values.items():
        if key not in types:
            _fail(key, "unknown key")
        value = _coerce(key, raw, types[key])
        if key == "seed":
            seed = value
        else:
            name, attr = key.split(".", 1)
            sections[name][attr] = value
    return ExperimentConfig(
        seed=seed, **{name: cls(**sections[name]) for name, cls in _SECTIONS.items()}
    )


def parse_config_text(text: str, source: str = "<config>") -> ExperimentConfig:
    values: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in values:
            _fail(key, f"duplicate key ({source}:{lineno})")
        values[key] = value
    return _build(values)


def parse_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text, str(path))


def _format_value(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def canonical_text(cfg: ExperimentConfig) -> str:
    """Sorted ``key=value`` lines covering every key, defaults included."""
    return "".join(f"{k}={_format_value(v)}\n" for k, v in sorted(cfg.flat().items()))


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(canonical_text(cfg).encode("utf-8")).hexdigest()


def with_overrides(cfg: ExperimentConfig, overrides: dict[str, object]) -> ExperimentConfig:
    values = cfg.flat()
    for key, value in overrides.items():
        if key not in values:
            _fail(key, "unknown key")
        values[key] = value
    return _build(values)
