"""Run configuration: YAML file plus ``--set section.key=value`` overrides.

Frequencies and times in the protocol block are in units of
g = sqrt(gamma1 gamma2) (tilde units); ``null`` means "optimise/choose".
"""

import dataclasses
import math
from dataclasses import dataclass, field

import yaml

from .errors import ConfigError
from .geometry import LatticeSpec


@dataclass
class LatticeConfig:
    nx: int = 10
    ny: int = 10
    spacing: float = 0.3
    site_ratio: int = 2
    polarization: list = field(default_factory=lambda: [0.0, 0.0, 1.0])
    delta_LI: float = 0.0
    gamma_L: float = 1.0
    gamma: float = 0.01
    R: float = 1.0


@dataclass
class ProtocolConfig:
    Delta: float = 0.0
    Delta_add: float = None
    t0: float = None
    n_shots: int = 1
    t_max: float = None
    n_t: int = 201
    methods: list = field(default_factory=lambda: ["closed_form", "eigen_2x2"])


@dataclass
class ScanConfig:
    kind: str = "spacing"
    a_min: float = 0.08
    a_max: float = 0.45
    a_count: int = 38
    Delta_add_min: float = None
    Delta_add_max: float = None
    t0_min: float = None
    t0_max: float = None
    n_delta: int = 41
    n_t: int = 41
    R_grid: list = field(default_factory=lambda: [0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0])


@dataclass
class OptimizeConfig:
    a_min: float = 0.08
    a_max: float = 0.45
    release_R: bool = False
    R_min: float = 0.1
    R_max: float = 10.0
    n_grid: int = 21
    n_starts: int = 3


@dataclass
class DisorderConfig:
    sigma_pos: list = field(default_factory=lambda: [0.0, 0.05, 0.1, 0.15, 0.2])
    n_real: int = 100
    reoptimize: bool = True
    offsets: list = field(default_factory=lambda: [-0.02, -0.01, 0.0, 0.01, 0.02])


@dataclass
class RunConfig:
    lattice: LatticeConfig = field(default_factory=LatticeConfig)
    protocol: ProtocolConfig = field(default_factory=ProtocolConfig)
    scan: ScanConfig = field(default_factory=ScanConfig)
    optimize: OptimizeConfig = field(default_factory=OptimizeConfig)
    disorder: DisorderConfig = field(default_factory=DisorderConfig)
    seed: int = 0
    threads: int = 1
    out: str = None

    def lattice_spec(self):
        L = self.lattice
        g = L.gamma
        return LatticeSpec(nx=L.nx, ny=L.ny, spacing=L.spacing, separation=L.site_ratio * L.spacing,
                           polarization=tuple(L.polarization), delta_LI=L.delta_LI,
                           gamma_L=L.gamma_L, gamma_1=g * math.sqrt(L.R), gamma_2=g / math.sqrt(L.R))

    def to_dict(self):
        return dataclasses.asdict(self)


def _section_classes():
    return {"lattice": LatticeConfig, "protocol": ProtocolConfig, "scan": ScanConfig,
            "optimize": OptimizeConfig, "disorder": DisorderConfig}


def _coerce(cls, name, value):
    default = {f.name: f for f in dataclasses.fields(cls)}[name]
    dv = default.default if default.default is not dataclasses.MISSING else default.default_factory()
    if value is None:
        return None
    try:
        if dv is None:
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if isinstance(dv, bool):
            if not isinstance(value, bool):
                raise TypeError
            return value
        if isinstance(dv, int):
            if isinstance(value, bool) or int(value) != value:
                raise TypeError
            return int(value)
        if isinstance(dv, float):
            return float(value)
        if isinstance(dv, list):
            if not isinstance(value, list):
                raise TypeError
            return value
        if isinstance(dv, str):
            return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"bad value for {name!r}: {value!r}") from None
    return value


def _apply(cfg, key, value):
    parts = key.split(".")
    sections = _section_classes()
    if len(parts) == 1:
        name = parts[0]
        if name in sections:
            if not isinstance(value, dict):
                raise ConfigError(f"section {name!r} must be a mapping")
            for k, v in value.items():
                _apply(cfg, f"{name}.{k}", v)
            return
        if name not in ("seed", "threads", "out"):
            raise ConfigError(f"unknown config key {key!r}")
        if name in ("seed", "threads"):
            if isinstance(value, bool) or not isinstance(value, int) or value < 0:
                raise ConfigError(f"bad value for {key!r}: {value!r}")
        setattr(cfg, name, value)
        return
    if len(parts) != 2 or parts[0] not in sections:
        raise ConfigError(f"unknown config key {key!r}")
    sec, name = parts
    cls = sections[sec]
    if name not in {f.name for f in dataclasses.fields(cls)}:
        raise ConfigError(f"unknown config key {key!r}")
    setattr(getattr(cfg, sec), name, _coerce(cls, name, value))


def load_config(path=None, overrides=()):
    """Resolve defaults <- YAML file <- ``key=value`` overrides."""
    cfg = RunConfig()
    if path:
        try:
            with open(path) as f:
                data = yaml.safe_load(f) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path!r}: {exc}") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"malformed config {path!r}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a mapping")
        for k, v in data.items():
            _apply(cfg, str(k), v)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        k, v = item.split("=", 1)
        try:
            val = yaml.safe_load(v)
        except yaml.YAMLError:
            val = v
        _apply(cfg, k.strip(), val)
    return cfg
