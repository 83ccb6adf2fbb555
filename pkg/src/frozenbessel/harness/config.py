"""Experiment configuration: a TOML file plus command-line overrides.

Example::

    kind = "mc-clt"
    seed = 1
    out = "runs/mc-clt"

    [model]
    root_system = "A"
    n = 3
    k = 400

    [start]
    mode = "special"   # special | explicit | special+offset
    c = 1.0

    [time]
    horizon = 1.0
    points = 101

    [ensemble]
    paths = 2000
    workers = 1

    [scheme]
    dt = 1e-3
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from ..errors import UsageError
from ..model import Kind, RootSystem
from ..simulate import SimScheme

KINDS = ("flow", "covariance", "spectral", "mc-clt", "rate-sweep", "ou", "b-phase")
START_MODES = ("special", "explicit", "special+offset")


@dataclass
class ExperimentConfig:
    kind: str
    root_system: str = "A"
    n: int = 3
    k: float = 400.0
    nu: float | None = None
    lam: float | None = None
    power: int = 1
    start_mode: str = "special"
    c: float = 1.0
    x: list[float] | None = None
    offset: list[float] | None = None
    horizon: float = 1.0
    grid_points: int = 101
    times: list[float] | None = None
    paths: int = 1000
    k_values: list[float] = field(default_factory=lambda: [50.0, 200.0, 800.0])
    workers: int = 1
    seed: int = 0
    dt: float = 1e-3
    eta: float = 0.1
    collision: str = "reject-and-halve"
    tol: float = 1e-11
    out: str = "runs/experiment"

    @property
    def rs(self) -> RootSystem:
        return RootSystem(Kind(self.root_system), self.n)

    @property
    def scheme(self) -> SimScheme:
        return SimScheme(dt=self.dt, eta=self.eta, collision=self.collision)

    def validate(self) -> "ExperimentConfig":
        if self.kind not in KINDS:
            raise UsageError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        if self.start_mode not in START_MODES:
            raise UsageError(f"start mode must be one of {START_MODES}")
        rs = self.rs
        if rs.kind is Kind.B and (self.nu is None or self.nu <= 0):
            raise UsageError("type B experiments need nu > 0")
        if rs.kind is not Kind.B and self.nu is not None:
            raise UsageError("nu is only used for type B")
        if self.start_mode == "explicit" and self.x is None:
            raise UsageError("start mode 'explicit' needs a start vector x")
        if self.start_mode == "special+offset" and self.offset is None:
            raise UsageError("start mode 'special+offset' needs an offset vector")
        for name in ("x", "offset"):
            v = getattr(self, name)
            if v is not None and len(v) != self.n:
                raise UsageError(f"{name} must have length n={self.n}")
        if self.paths < 1:
            raise UsageError("ensemble size must be at least 1")
        if self.grid_points < 2 or not self.horizon > 0:
            raise UsageError("need a positive horizon and at least two grid points")
        if self.workers < 1:
            raise UsageError("workers must be at least 1")
        if self.kind == "ou" and self.lam is None:
            raise UsageError("the ou experiment needs lam")
        if self.kind in ("ou",) and rs.kind is not Kind.A:
            raise UsageError("the ou experiment is defined for type A")
        if self.kind == "b-phase" and (rs.kind is not Kind.D or rs.n < 2):
            raise UsageError("b-phase runs on a type-D system (it is folded to type B)")
        self.scheme  # validates the scheme fields
        out = Path(self.out)
        if out.exists() and not out.is_dir():
            raise UsageError(f"output path {out} exists and is not a directory")
        return self

    def as_dict(self):
        return dataclasses.asdict(self)


_SECTIONS = {
    "model": {"root_system": "root_system", "n": "n", "k": "k", "nu": "nu", "lam": "lam", "power": "power"},
    "start": {"mode": "start_mode", "c": "c", "x": "x", "offset": "offset"},
    "time": {"horizon": "horizon", "points": "grid_points", "times": "times"},
    "ensemble": {"paths": "paths", "k_values": "k_values", "workers": "workers"},
    "scheme": {"dt": "dt", "eta": "eta", "collision": "collision", "tol": "tol"},
}
_TOP = {"kind", "seed", "out"}


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    """Read a TOML config; ``overrides`` (flat field names) win over the file."""
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    return config_from_mapping(raw, overrides)


def config_from_mapping(raw: dict, overrides: dict | None = None) -> ExperimentConfig:
    flat = {}
    for key, value in raw.items():
        if key in _TOP:
            flat[key] = value
        elif key in _SECTIONS and isinstance(value, dict):
            for sub, v in value.items():
                if sub not in _SECTIONS[key]:
                    raise UsageError(f"unknown key [{key}].{sub}")
                flat[_SECTIONS[key][sub]] = v
        else:
            raise UsageError(f"unknown config key {key!r}")
    for key, value in (overrides or {}).items():
        if value is not None:
            flat[key] = value
    if "kind" not in flat:
        raise UsageError("config must name an experiment kind")
    try:
        cfg = ExperimentConfig(**flat)
    except TypeError as exc:
        raise UsageError(str(exc)) from exc
    return cfg.validate()
