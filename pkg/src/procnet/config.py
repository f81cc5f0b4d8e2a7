"""Experiment configuration: YAML in, validated integer-step scenario out.

Delays are written in milliseconds and converted to steps of ``T`` here;
nothing past this module deals with milliseconds.
"""
from __future__ import annotations

import copy
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .env import Scenario
from .model import NoiseCovariance, make_double_integrator_2d
from .qlearning import LearningParams
from .sensing import DecisionSchedule, Mode, SensingMode, homogeneous_sensors

CONFIG_VERSION = 1


class ConfigError(ValueError):
    """Invalid or unparsable experiment configuration."""


@dataclass(frozen=True)
class SystemSection:
    T_ms: float = 10.0
    preset: str = "double_integrator_2d"
    noise_model: str = "cwna"
    vel_noise_var: float = 0.1
    pos_noise_var: float = 0.025
    measure: str = "position"
    P0_scale: float = 10.0


@dataclass(frozen=True)
class SensorSection:
    N: int = 4
    raw_delay_ms: float = 40.0
    proc_delay_ms: float = 140.0
    comm_raw_ms: float = 10.0
    comm_proc_ms: float = 10.0
    var_raw: float = 10.0
    var_proc: float = 1.0


@dataclass(frozen=True)
class ScheduleSection:
    window_ms: float = 500.0
    windows: int = 10


@dataclass(frozen=True)
class LearningSection:
    bins: int = 5
    alpha: float = 0.01
    gamma: float = 0.99
    eps_max: float = 0.9
    eps_min: float = 0.1
    episodes: int = 20000
    seed: int = 0
    early_stop: int = 2000
    eval_every: int = 100


_SECTIONS = {
    "system": SystemSection,
    "sensors": SensorSection,
    "schedule": ScheduleSection,
    "learning": LearningSection,
}


@dataclass(frozen=True)
class ExperimentConfig:
    system: SystemSection = field(default_factory=SystemSection)
    sensors: SensorSection = field(default_factory=SensorSection)
    schedule: ScheduleSection = field(default_factory=ScheduleSection)
    learning: LearningSection = field(default_factory=LearningSection)

    def __post_init__(self):
        validate(self)

    # derived integer-step quantities
    @property
    def T(self) -> float:
        return self.system.T_ms / 1000.0

    def steps(self, ms: float, what: str) -> int:
        n = ms / self.system.T_ms
        if not math.isclose(n, round(n), rel_tol=0, abs_tol=1e-9):
            raise ConfigError(f"{what} = {ms} ms is not a whole number of {self.system.T_ms} ms steps")
        return int(round(n))

    @property
    def raw_delay(self) -> int:
        return self.steps(self.sensors.raw_delay_ms, "raw_delay_ms")

    @property
    def proc_delay(self) -> int:
        return self.steps(self.sensors.proc_delay_ms, "proc_delay_ms")

    @property
    def comm_raw(self) -> int:
        return self.steps(self.sensors.comm_raw_ms, "comm_raw_ms")

    @property
    def comm_proc(self) -> int:
        return self.steps(self.sensors.comm_proc_ms, "comm_proc_ms")

    @property
    def window(self) -> int:
        return self.steps(self.schedule.window_ms, "window_ms")

    @property
    def horizon(self) -> int:
        return self.window * self.schedule.windows

    def learning_params(self, **overrides) -> LearningParams:
        lp = self.learning
        kw = dict(
            alpha=lp.alpha,
            gamma=lp.gamma,
            eps_max=lp.eps_max,
            eps_min=lp.eps_min,
            episodes=lp.episodes,
            seed=lp.seed,
            early_stop=lp.early_stop,
            eval_every=lp.eval_every,
        )
        kw.update({k: v for k, v in overrides.items() if v is not None})
        return LearningParams(**kw)

    def scenario(self) -> Scenario:
        sy, se = self.system, self.sensors
        model = make_double_integrator_2d(
            self.T,
            sy.vel_noise_var,
            P0=sy.P0_scale,
            noise_model=sy.noise_model,
            pos_noise_var=sy.pos_noise_var,
            measure=sy.measure,
        )
        r = model.meas_dim
        raw = SensingMode(Mode.RAW, self.raw_delay, self.comm_raw, NoiseCovariance.isotropic(se.var_raw, r))
        proc = SensingMode(
            Mode.PROCESSED, self.proc_delay, self.comm_proc, NoiseCovariance.isotropic(se.var_proc, r)
        )
        return Scenario(
            model,
            homogeneous_sensors(se.N, raw, proc),
            DecisionSchedule.uniform(self.window, self.schedule.windows),
            gamma=self.learning.gamma,
        )

    def to_dict(self) -> dict:
        return {"version": CONFIG_VERSION, **asdict(self)}


def validate(cfg: ExperimentConfig):
    sy, se, sc, lp = cfg.system, cfg.sensors, cfg.schedule, cfg.learning
    if sy.T_ms <= 0:
        raise ConfigError("T_ms must be positive")
    if sy.preset != "double_integrator_2d":
        raise ConfigError(f"unknown system preset {sy.preset!r}")
    if sy.noise_model not in ("velocity", "cwna"):
        raise ConfigError(f"noise_model must be 'velocity' or 'cwna', got {sy.noise_model!r}")
    if sy.measure not in ("full", "position"):
        raise ConfigError(f"measure must be 'full' or 'position', got {sy.measure!r}")
    if sy.vel_noise_var < 0 or sy.pos_noise_var < 0:
        raise ConfigError("noise variances must be non-negative")
    if sy.P0_scale < 0:
        raise ConfigError("P0_scale must be non-negative")
    if se.N < 1:
        raise ConfigError("need at least one sensor")
    raw, proc = cfg.raw_delay, cfg.proc_delay
    comm_raw, comm_proc = cfg.comm_raw, cfg.comm_proc
    if raw < 1:
        raise ConfigError("raw_delay_ms must be at least one step")
    if not proc > raw:
        raise ConfigError(
            f"latency-accuracy trade-off violated: processing delay ({proc} steps) "
            f"must exceed raw delay ({raw} steps)"
        )
    if not se.var_raw > se.var_proc > 0:
        raise ConfigError(
            f"latency-accuracy trade-off violated: need var_raw > var_proc > 0, "
            f"got {se.var_raw} and {se.var_proc}"
        )
    if comm_raw < 1 or comm_proc < 1:
        raise ConfigError("communication model violated: communication delays must be at least one step")
    if comm_proc > comm_raw:
        raise ConfigError(
            "communication model violated: processed data cannot take longer to transmit than raw data"
        )
    if sc.windows < 1:
        raise ConfigError("need at least one decision window")
    if cfg.window < proc:
        raise ConfigError(
            f"decision spacing violated: window ({cfg.window} steps) shorter than processing delay ({proc} steps)"
        )
    if lp.bins < 2:
        raise ConfigError("need at least two bins")
    try:
        cfg.learning_params()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _section(name: str, raw) -> object:
    cls = _SECTIONS[name]
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    known = {f.name: f for f in fields(cls)}
    unknown = set(raw) - set(known)
    if unknown:
        raise ConfigError(f"unknown keys in {name!r}: {', '.join(sorted(unknown))}")
    kw = {}
    for key, value in raw.items():
        default = known[key].default
        try:
            if isinstance(default, bool):
                kw[key] = bool(value)
            elif isinstance(default, int):
                if isinstance(value, float) and not value.is_integer():
                    raise ValueError
                kw[key] = int(value)
            elif isinstance(default, float):
                kw[key] = float(value)
            else:
                kw[key] = str(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{name}.{key}: cannot use {value!r}") from None
    return cls(**kw)


def config_from_dict(data: dict | None) -> ExperimentConfig:
    data = copy.deepcopy(data) or {}
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping")
    version = data.pop("version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ConfigError(f"unsupported config version {version}")
    unknown = set(data) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown sections: {', '.join(sorted(unknown))}")
    return ExperimentConfig(**{name: _section(name, data.get(name)) for name in _SECTIONS})


def loads_config(text: str) -> ExperimentConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"cannot parse configuration{where}: {getattr(exc, 'problem', exc)}") from None
    return config_from_dict(data)


def load_config(path: str | Path) -> ExperimentConfig:
    return loads_config(Path(path).read_text())


def dumps_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)


def write_config(cfg: ExperimentConfig, path: str | Path):
    Path(path).write_text(dumps_config(cfg))
