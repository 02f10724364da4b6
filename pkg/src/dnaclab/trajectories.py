"""Position references: circle, four-petal rose, hover and step."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson

from .nn_core import ConfigurationError

KINDS = ("circle", "rose", "hover", "step")


@dataclass
class TrajectorySpec:
    kind: str = "circle"
    radius: float = 1.0
    amplitude: float = 2.8
    period: float = 12.0
    center: tuple = (0.0, 0.0, 1.0)
    point: tuple = (0.0, 0.0, 1.0)
    start: tuple = (0.0, 0.0, 1.0)
    end: tuple = (1.0, 0.0, 1.0)
    at: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown trajectory kind {self.kind!r}")
        if self.kind in ("circle", "rose") and self.period <= 0:
            raise ConfigurationError("period must be positive")
        if self.kind == "circle" and self.radius <= 0:
            raise ConfigurationError("radius must be positive")
        self.center = np.asarray(self.center, dtype=float)
        self.point = np.asarray(self.point, dtype=float)
        self.start = np.asarray(self.start, dtype=float)
        self.end = np.asarray(self.end, dtype=float)

    @classmethod
    def from_dict(cls, doc: dict) -> "TrajectorySpec":
        doc = dict(doc)
        if "from" in doc:
            doc["start"] = doc.pop("from")
        if "to" in doc:
            doc["end"] = doc.pop("to")
        if "a" in doc:
            doc["amplitude"] = doc.pop("a")
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise ConfigurationError(f"unknown trajectory keys: {sorted(unknown)}")
        return cls(**doc)

    def to_dict(self) -> dict:
        base = {"kind": self.kind}
        if self.kind == "circle":
            base.update(radius=self.radius, period=self.period, center=self.center.tolist())
        elif self.kind == "rose":
            base.update(amplitude=self.amplitude, period=self.period, center=self.center.tolist())
        elif self.kind == "hover":
            base.update(point=self.point.tolist())
        else:
            base.update(start=self.start.tolist(), end=self.end.tolist(), at=self.at)
        return base

    @property
    def lap_period(self) -> float | None:
        return self.period if self.kind in ("circle", "rose") else None


def rose_radius(a, theta):
    return a * np.sin(2.0 * theta)


def position_ref(spec: TrajectorySpec, t: float):
    """Reference position and its exact time derivative."""
    if t < 0:
        raise ConfigurationError("t must be nonnegative")
    if spec.kind == "circle":
        w = 2.0 * np.pi / spec.period
        c, s = np.cos(w * t), np.sin(w * t)
        pos = spec.center + spec.radius * np.array([c, s, 0.0])
        vel = spec.radius * w * np.array([-s, c, 0.0])
        return pos, vel
    if spec.kind == "rose":
        w = 2.0 * np.pi / spec.period
        th = w * t
        r = rose_radius(spec.amplitude, th)
        dr = 2.0 * spec.amplitude * np.cos(2.0 * th)
        c, s = np.cos(th), np.sin(th)
        pos = spec.center + np.array([r * c, r * s, 0.0])
        vel = w * np.array([dr * c - r * s, dr * s + r * c, 0.0])
        return pos, vel
    if spec.kind == "hover":
        return spec.point.copy(), np.zeros(3)
    return (spec.start.copy() if t < spec.at else spec.end.copy()), np.zeros(3)


def rose_arc_length(a: float, panels: int = 10_000) -> float:
    """Length of the full four-petal pattern by composite Simpson."""
    th = np.linspace(0.0, 2.0 * np.pi, panels + 1)
    speed = np.hypot(rose_radius(a, th), 2.0 * a * np.cos(2.0 * th))
    return float(simpson(speed, x=th))


def arc_speed_normalize(spec: TrajectorySpec, target_speed: float) -> float:
    """Period giving a mean path speed of ``target_speed``."""
    if target_speed <= 0:
        raise ConfigurationError("target_speed must be positive")
    if spec.kind == "circle":
        return 2.0 * np.pi * spec.radius / target_speed
    if spec.kind == "rose":
        return rose_arc_length(spec.amplitude) / target_speed
    raise ConfigurationError(f"{spec.kind} has no closed path")
