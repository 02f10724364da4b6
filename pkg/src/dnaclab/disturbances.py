"""Crosswind, wall turbulence and slung sloshing bottle.

Every disturbance exposes ``wrench(state, t, dt, accel)`` returning
``(force_world, torque_body)`` and advancing its own internal state. The
force models are deliberately simple analogs; their magnitudes are set by
the scenario fixtures.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from . import kernels
from .nn_core import ConfigurationError

MPH_TO_MPS = 0.44704
CROSSWIND_SPEED = 18.0 * MPH_TO_MPS  # fan core speed, m/s
GRAVITY = 9.81


def _vec(v, n=3):
    arr = np.asarray(v, dtype=float)
    if arr.shape != (n,):
        raise ConfigurationError(f"expected a {n}-vector, got shape {arr.shape}")
    return arr


def _zero_wrench():
    return np.zeros(3), np.zeros(3)


def _body_from_world(s, f_world):
    return kernels.rotation_matrix(s[6], s[7], s[8]).T @ f_world


@dataclass
class WindField:
    source: tuple = (0.0, -2.0, 1.0)
    direction: tuple = (0.0, 1.0, 0.0)
    core_speed: float = CROSSWIND_SPEED
    cone_half_angle: float = 0.9
    decay_length: float = 4.0
    onset_ramp: float = 2.0
    drag: float = 0.3
    cop_lever: float = 0.02
    enabled: bool = True

    def __post_init__(self):
        self.source = _vec(self.source)
        d = _vec(self.direction)
        norm = np.linalg.norm(d)
        if norm == 0:
            raise ConfigurationError("wind direction must be nonzero")
        self.direction = d / norm
        if self.core_speed < 0 or self.decay_length <= 0 or not 0 < self.cone_half_angle < np.pi / 2:
            raise ConfigurationError("invalid wind field parameters")

    def immersion(self, position, t):
        """Fraction of the stream reaching ``position``: angular falloff times ramp."""
        rel = np.asarray(position, dtype=float) - self.source
        along = rel @ self.direction
        if along <= 0:
            return 0.0, along
        radial = np.linalg.norm(rel - along * self.direction)
        angle = np.arctan2(radial, along)
        if angle >= self.cone_half_angle:
            return 0.0, along
        ramp = 1.0 if self.onset_ramp <= 0 else min(1.0, t / self.onset_ramp)
        return np.cos(0.5 * np.pi * angle / self.cone_half_angle) * ramp, along

    def velocity_at(self, position, t):
        k, along = self.immersion(position, t)
        if k == 0.0:
            return np.zeros(3)
        return self.core_speed * np.exp(-along / self.decay_length) * k * self.direction

    def wrench(self, s, t, dt=None, accel=None):
        if not self.enabled:
            return _zero_wrench()
        k, along = self.immersion(s[0:3], t)
        if k == 0.0:
            return _zero_wrench()
        wind = self.core_speed * np.exp(-along / self.decay_length) * k * self.direction
        force = self.drag * k * (wind - s[3:6])
        f_body = _body_from_world(s, force)
        # centre of pressure sits cop_lever above the centre of mass
        torque = np.array([-self.cop_lever * f_body[1], self.cop_lever * f_body[0], 0.0])
        return force, torque

    def reset(self):
        pass


def wind_wrench(field_: WindField, state, t=1e9):
    s = state.as_array() if hasattr(state, "as_array") else np.asarray(state, dtype=float)
    return field_.wrench(s, t)


def segment_distance(p, a, b):
    ab = b - a
    denom = ab @ ab
    u = 0.0 if denom == 0 else np.clip((p - a) @ ab / denom, 0.0, 1.0)
    return float(np.linalg.norm(p - (a + u * ab)))


@dataclass
class WallEffect:
    walls: list = field(default_factory=list)  # [[x1, y1], [x2, y2]] segments
    influence_distance: float = 1.0
    contact_std: float = 0.1
    correlation_time: float = 0.1
    clip_sigmas: float = 4.0
    seed: int = 0
    enabled: bool = True

    def __post_init__(self):
        if self.influence_distance <= 0 or self.correlation_time <= 0 or self.contact_std < 0:
            raise ConfigurationError("invalid wall effect parameters")
        self.walls = [(np.asarray(a, dtype=float)[:2], np.asarray(b, dtype=float)[:2]) for a, b in self.walls]
        self.reset()

    def reset(self, seed=None):
        if seed is not None:
            self.seed = seed
        self.rng = np.random.default_rng(self.seed)
        self.noise = np.zeros(2)

    def distance(self, position) -> float:
        p = np.asarray(position, dtype=float)[:2]
        if not self.walls:
            return np.inf
        return min(segment_distance(p, a, b) for a, b in self.walls)

    def wrench(self, s, t=None, dt=1e-3, accel=None):
        if not self.enabled:
            return _zero_wrench()
        if dt <= 0:
            raise ConfigurationError("dt must be positive")
        d = self.distance(s[0:3])
        a = np.exp(-dt / self.correlation_time)
        if d > self.influence_distance:
            self.noise *= a
            return _zero_wrench()
        self.noise = a * self.noise + np.sqrt(1.0 - a * a) * self.rng.standard_normal(2)
        scale = self.contact_std * (1.0 - d / self.influence_distance)
        lim = self.clip_sigmas * self.contact_std
        torque = np.zeros(3)
        torque[:2] = np.clip(scale * self.noise, -lim, lim)
        return np.zeros(3), torque


def wall_wrench(effect: WallEffect, state, dt):
    s = state.as_array() if hasattr(state, "as_array") else np.asarray(state, dtype=float)
    return effect.wrench(s, None, dt)[1]


@dataclass
class SlungMass:
    offset: tuple = (0.177, 0.177, -0.02)
    length: float = 0.3
    mass: float = 0.165
    water_mass: float = 0.125
    pendulum_damping: float = 0.1
    slosh_frequency: float = 9.0
    slosh_damping: float = 0.15
    coupling: float = 1.0
    slosh_std: float = 0.003  # stationary slosh displacement from random forcing, m
    gravity: float = GRAVITY
    seed: int = 0
    enabled: bool = True

    def __post_init__(self):
        self.offset = _vec(self.offset)
        if self.mass < 0 or self.water_mass < 0 or self.water_mass > self.mass and self.mass > 0:
            raise ConfigurationError("bottle mass must be nonnegative and include the water")
        if self.length <= 0 or not 0 < self.slosh_damping < 1 or self.pendulum_damping < 0:
            raise ConfigurationError("invalid slung mass parameters")
        self.reset()

    def reset(self, seed=None):
        if seed is not None:
            self.seed = seed
        self.rng = np.random.default_rng(self.seed)
        self.z = np.zeros(8)
        self.prm = np.array([
            self.length, self.gravity, self.pendulum_damping, self.slosh_frequency,
            self.slosh_damping, self.coupling, self.mass, self.water_mass,
        ])
        w, zeta = self.slosh_frequency, self.slosh_damping
        self._forcing = self.slosh_std * np.sqrt(4.0 * zeta * w**3)

    def pendulum_energy(self) -> float:
        """Mechanical energy per unit mass of the two planar swings."""
        a, b, ad, bd = self.z[:4]
        ell, g = self.length, self.gravity
        return 0.5 * ell**2 * (ad**2 + bd**2) + g * ell * (2.0 - np.cos(a) - np.cos(b))

    def wrench(self, s, t=None, dt=1e-3, accel=None):
        if not self.enabled or self.mass == 0:
            return _zero_wrench()
        if dt <= 0:
            raise ConfigurationError("dt must be positive")
        acc = np.zeros(3) if accel is None else np.asarray(accel, dtype=float)
        if self._forcing > 0:
            noise = self._forcing * self.rng.standard_normal(2) / np.sqrt(dt)
        else:
            noise = np.zeros(2)
        self.z, force = kernels.slung_step(self.z, acc, noise, self.prm, dt)
        fb = _body_from_world(s, force)
        o = self.offset
        # explicit cross product; np.cross is slow for single 3-vectors
        torque = np.array([o[1] * fb[2] - o[2] * fb[1], o[2] * fb[0] - o[0] * fb[2], o[0] * fb[1] - o[1] * fb[0]])
        return force, torque


def slung_mass_wrench(mass: SlungMass, state, dt, accel=None):
    s = state.as_array() if hasattr(state, "as_array") else np.asarray(state, dtype=float)
    return mass.wrench(s, None, dt, accel)


def compose(wrenches):
    force, torque = np.zeros(3), np.zeros(3)
    for f, tq in wrenches:
        force = force + f
        torque = torque + tq
    return force, torque


_TYPES = {"wind": WindField, "wall": WallEffect, "slung_mass": SlungMass}


def from_dict(doc: dict):
    doc = dict(doc)
    kind = doc.pop("type", None)
    if kind not in _TYPES:
        raise ConfigurationError(f"unknown disturbance type {kind!r}")
    cls = _TYPES[kind]
    known = {f.name for f in fields(cls)}
    unknown = set(doc) - known
    if unknown:
        raise ConfigurationError(f"unknown {kind} keys: {sorted(unknown)}")
    return cls(**doc)


def to_dict(dist) -> dict:
    for name, cls in _TYPES.items():
        if isinstance(dist, cls):
            doc = {"type": name}
            for f in fields(cls):
                v = getattr(dist, f.name)
                if f.name == "walls":
                    v = [[a.tolist(), b.tolist()] for a, b in v]
                elif isinstance(v, np.ndarray):
                    v = v.tolist()
                doc[f.name] = v
            return doc
    raise ConfigurationError(f"not a disturbance: {dist!r}")
