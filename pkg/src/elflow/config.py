"""Run configuration: one JSON document drives every experiment.

``RunConfig`` carries the grid, physics, time stepping, initial condition,
forcing, potential mode, reset policy, diagnostics cadence and seeds. Every
output of a run is a deterministic function of the configuration, and
``config_hash`` pins it in the emitted manifest.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, asdict

from .errors import ConfigError
from .forcing import ForcingSpec
from .grid import Grid

__all__ = [
    "GridConfig", "InitialConfig", "ForcingConfig", "ResetConfig", "MCConfig",
    "RunConfig", "load_config", "preset", "PRESETS",
]

RUN_MODES = ("classical", "el", "cotangent", "compare")
COMPARE_KINDS = ("classical", "gauge", "cotangent")
POTENTIAL_MODES = ("static", "dynamic")


@dataclass
class GridConfig:
    dim: int = 2
    n: int = 64
    L: float = 6.283185307179586

    def build(self) -> Grid:
        return Grid(self.dim, self.n, self.L)


@dataclass
class InitialConfig:
    kind: str = "taylor_green"      # taylor_green | abc | random_bandlimited
    seed: int = 0
    amplitude: float = 1.0
    band: int | None = None
    mode: int = 1


@dataclass
class ForcingConfig:
    kind: str = "zero"              # zero | single_mode | multi_mode
    amplitude: float = 0.0
    mode: int = 1
    modes: tuple[int, int] = (1, 2)
    second_weight: float = 0.5

    def build(self) -> ForcingSpec:
        return ForcingSpec(self.kind, self.amplitude, self.mode,
                           tuple(self.modes), self.second_weight)


@dataclass
class ResetConfig:
    enabled: bool = True
    threshold: float = 0.25


@dataclass
class MCConfig:
    samples: int = 100_000
    seed: int = 7
    delta0: float | None = None     # defaults to L/8 at use time


@dataclass
class RunConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    nu: float = 0.01
    dt: float | None = 1e-3         # None: derived from cfl_target at t = 0
    cfl_target: float = 0.2
    cfl_limit: float = 0.4
    t_end: float = 1.0
    initial: InitialConfig = field(default_factory=InitialConfig)
    forcing: ForcingConfig = field(default_factory=ForcingConfig)
    potential_mode: str = "static"
    reset: ResetConfig = field(default_factory=ResetConfig)
    cadence: int = 10               # diagnostics every this many steps
    m_list: tuple[int, ...] = (2, 3)
    C0: float = 1.0                 # embedding constant for the v-growth bound
    C_K: float = 1.0                # prefactor of the sup-norm integral bound
    mc: MCConfig = field(default_factory=MCConfig)
    mode: str = "el"
    compare_kind: str = "classical"
    gauge_seed: int = 42
    snapshots: str = "ends"         # none | ends
    identity_seed: int = 1
    identity_dts: tuple[float, ...] = (4e-3, 2e-3, 1e-3)

    # -- validation / serialization ------------------------------------------

    def validate(self) -> "RunConfig":
        if self.nu < 0:
            raise ConfigError("nu must be >= 0 (nu = 0 runs in Euler mode)")
        if self.mode not in RUN_MODES:
            raise ConfigError(f"mode must be one of {RUN_MODES}, got {self.mode!r}")
        if self.compare_kind not in COMPARE_KINDS:
            raise ConfigError(f"compare_kind must be one of {COMPARE_KINDS}")
        if self.potential_mode not in POTENTIAL_MODES:
            raise ConfigError(f"potential_mode must be one of {POTENTIAL_MODES}")
        if self.t_end <= 0:
            raise ConfigError("t_end must be positive")
        if self.dt is not None and self.dt <= 0:
            raise ConfigError("dt must be positive when given")
        if self.cadence < 1:
            raise ConfigError("cadence must be >= 1")
        if any(m < 2 for m in self.m_list):
            raise ConfigError("m_list entries must be integers >= 2")
        if self.snapshots not in ("none", "ends"):
            raise ConfigError("snapshots must be 'none' or 'ends'")
        try:
            self.grid.build()
            self.forcing.build()
        except ValueError as exc:   # grid/forcing carry their own diagnostics
            raise ConfigError(str(exc)) from exc
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        try:
            for key, sub in (("grid", GridConfig), ("initial", InitialConfig),
                             ("forcing", ForcingConfig), ("reset", ResetConfig),
                             ("mc", MCConfig)):
                if key in data and isinstance(data[key], dict):
                    data[key] = sub(**data[key])
            for key in ("m_list", "identity_dts"):
                if key in data:
                    data[key] = tuple(data[key])
            if "forcing" in data and isinstance(data["forcing"], ForcingConfig):
                data["forcing"].modes = tuple(data["forcing"].modes)
            cfg = cls(**data)
        except TypeError as exc:
            raise ConfigError(f"bad configuration document: {exc}") from exc
        return cfg.validate()


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config document must be a JSON object")
    return RunConfig.from_dict(data)


# -- shipped desk-scale presets ---------------------------------------------------

def _desk_2d() -> RunConfig:
    return RunConfig(
        grid=GridConfig(dim=2, n=64), nu=0.01, dt=1e-3, t_end=1.0,
        initial=InitialConfig(kind="taylor_green"), mode="compare",
    )


def _desk_3d() -> RunConfig:
    return RunConfig(
        grid=GridConfig(dim=3, n=32), nu=0.01, dt=1e-3, t_end=0.5,
        initial=InitialConfig(kind="taylor_green"), mode="compare",
        m_list=(2,), cadence=25,
    )


def _bounds_3d(n: int = 32) -> RunConfig:
    return RunConfig(
        grid=GridConfig(dim=3, n=n), nu=0.05, dt=5e-3, t_end=2.0,
        initial=InitialConfig(kind="taylor_green", amplitude=0.2),
        forcing=ForcingConfig(kind="single_mode", amplitude=0.02, mode=2),
        reset=ResetConfig(enabled=False), mode="el", m_list=(2, 3), cadence=20,
    )


def _euler_2d() -> RunConfig:
    # short enough that the deformation stays invertible without resets
    return RunConfig(
        grid=GridConfig(dim=2, n=128), nu=0.0, dt=5e-3, t_end=0.2,
        initial=InitialConfig(kind="taylor_green"), mode="el", cadence=5,
        reset=ResetConfig(enabled=False),
    )


def _euler_3d() -> RunConfig:
    return RunConfig(
        grid=GridConfig(dim=3, n=32), nu=0.0, dt=2e-3, t_end=0.2,
        initial=InitialConfig(kind="abc", amplitude=0.5), mode="el",
        m_list=(2,), cadence=10, reset=ResetConfig(enabled=False),
    )


PRESETS = {
    "desk-2d": _desk_2d,
    "desk-3d": _desk_3d,
    "bounds-3d": _bounds_3d,
    "euler-2d": _euler_2d,
    "euler-3d": _euler_3d,
}


def preset(name: str) -> RunConfig:
    try:
        builder = PRESETS[name]
    except KeyError:
        raise ConfigError(
            f"unknown preset {name!r}; available: {sorted(PRESETS)}") from None
    return builder().validate()
