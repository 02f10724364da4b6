"""Declarative scenario description, read from and written to JSON."""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .. import disturbances as dist
from ..baselines import DmracConfig, MracConfig, PidGains
from ..dnac import DnacConfig
from ..nn_core import ConfigurationError
from ..plant import CascadeConfig, QuadParams
from ..trajectories import TrajectorySpec

SCHEMA_VERSION = 1
CONTROLLERS = ("pid", "pid+mrac", "pid+dmrac", "pid+dnac")
SHORT_NAMES = {"pid": "pid", "mrac": "pid+mrac", "dmrac": "pid+dmrac", "dnac": "pid+dnac"}


def controller_name(name: str) -> str:
    name = name.strip().lower()
    if name in CONTROLLERS:
        return name
    if name in SHORT_NAMES:
        return SHORT_NAMES[name]
    raise ConfigurationError(f"unknown controller {name!r}; choose from {', '.join(CONTROLLERS)}")


@dataclass
class ScenarioConfig:
    controller: str = "pid"
    trajectory: TrajectorySpec = field(default_factory=TrajectorySpec)
    disturbances: list = field(default_factory=list)
    plant: QuadParams = field(default_factory=QuadParams)
    cascade: CascadeConfig = field(default_factory=CascadeConfig)
    pid: PidGains = field(default_factory=PidGains)
    mrac: MracConfig = field(default_factory=MracConfig)
    dmrac: DmracConfig = field(default_factory=DmracConfig)
    dnac: DnacConfig = field(default_factory=DnacConfig)
    duration: float = 60.0
    physics_dt: float = 0.001
    control_dt: float = 0.004
    seed: int = 0
    warmup: float = 5.0
    rms_window: float = 2.0
    sensor_noise: bool = False
    name: str = "scenario"

    def __post_init__(self):
        self.controller = controller_name(self.controller)
        self.validate()

    def validate(self):
        if self.physics_dt <= 0 or self.control_dt <= 0:
            raise ConfigurationError("time steps must be positive")
        ratio = self.control_dt / self.physics_dt
        if ratio < 1 or abs(ratio - round(ratio)) > 1e-9:
            raise ConfigurationError("control_dt must be an integer multiple of physics_dt")
        if self.duration <= self.warmup or self.warmup < 0:
            raise ConfigurationError("duration must exceed warmup")
        if self.rms_window <= 0:
            raise ConfigurationError("rms_window must be positive")

    @property
    def substeps(self) -> int:
        return int(round(self.control_dt / self.physics_dt))

    @property
    def control_steps(self) -> int:
        return int(round(self.duration / self.control_dt))

    def with_overrides(self, **kw) -> "ScenarioConfig":
        cfg = copy.deepcopy(self)
        for k, v in kw.items():
            setattr(cfg, k, v)
        cfg.__post_init__()
        return cfg

    @classmethod
    def from_dict(cls, doc: dict) -> "ScenarioConfig":
        doc = dict(doc)
        version = doc.pop("schema_version", None)
        if version != SCHEMA_VERSION:
            raise ConfigurationError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
        kw = {}
        try:
            if "trajectory" in doc:
                kw["trajectory"] = TrajectorySpec.from_dict(doc.pop("trajectory"))
            kw["disturbances"] = [dist.from_dict(d) for d in doc.pop("disturbances", [])]
            for key, klass in (("plant", QuadParams), ("cascade", CascadeConfig), ("pid", PidGains),
                               ("mrac", MracConfig), ("dmrac", DmracConfig), ("dnac", DnacConfig)):
                if key in doc:
                    kw[key] = klass.from_dict(doc.pop(key))
            for key in ("controller", "duration", "physics_dt", "control_dt", "seed", "warmup",
                        "rms_window", "sensor_noise", "name"):
                if key in doc:
                    kw[key] = doc.pop(key)
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from exc
        if doc:
            raise ConfigurationError(f"unknown scenario keys: {sorted(doc)}")
        return cls(**kw)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "controller": self.controller,
            "trajectory": self.trajectory.to_dict(),
            "disturbances": [dist.to_dict(d) for d in self.disturbances],
            "plant": self.plant.to_dict(),
            "cascade": self.cascade.to_dict(),
            "pid": self.pid.to_dict(),
            "mrac": self.mrac.to_dict(),
            "dmrac": self.dmrac.to_dict(),
            "dnac": self.dnac.to_dict(),
            "duration": self.duration,
            "physics_dt": self.physics_dt,
            "control_dt": self.control_dt,
            "seed": self.seed,
            "warmup": self.warmup,
            "rms_window": self.rms_window,
            "sensor_noise": self.sensor_noise,
        }


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(cfg: ScenarioConfig) -> str:
    return json.dumps(cfg.to_dict(), indent=2, default=_jsonable)


def load_config(path) -> ScenarioConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read scenario {path}: {exc}") from exc
    return ScenarioConfig.from_dict(doc)


def load_scenario(name: str, **overrides) -> ScenarioConfig:
    """Load a bundled scenario fixture (``exp1_circle``, ``exp2_rose``, ...)."""
    ref = resources.files("dnaclab.scenarios") / f"{name}.json"
    if not ref.is_file():
        raise ConfigurationError(f"no bundled scenario named {name!r}")
    cfg = ScenarioConfig.from_dict(json.loads(ref.read_text()))
    return cfg.with_overrides(**overrides) if overrides else cfg


def bundled_scenarios() -> list:
    root = resources.files("dnaclab.scenarios")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))
