"""Quadrotor rigid body, RK4 stepping, cascaded position control and the
torque augmentation point.

Frames: world is x forward, y left, z up; body is FLU. Euler angles are
Z-Y-X, so a positive pitch tilts the nose down and the thrust vector toward
world +x, and a positive roll tilts thrust toward world -y.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import kernels
from .nn_core import ConfigurationError

GRAVITY = 9.81
CRASH_ANGLE = np.deg2rad(85.0)


class CrashFault(RuntimeError):
    """The vehicle left the valid flight envelope."""


def _from_dict(cls, doc):
    doc = dict(doc or {})
    known = {f.name for f in fields(cls)}
    unknown = set(doc) - known
    if unknown:
        raise ConfigurationError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    return cls(**doc)


@dataclass
class QuadParams:
    mass: float = 1.2
    inertia: tuple = (0.01, 0.01, 0.02)
    arm_length: float = 0.25
    linear_drag: float = 0.1
    rotational_drag: float = 0.002
    max_thrust: float = 30.0
    max_torque: float = 1.0
    gravity: float = GRAVITY

    def __post_init__(self):
        self.inertia = tuple(float(i) for i in self.inertia)
        values = [self.mass, *self.inertia, self.arm_length, self.linear_drag,
                  self.rotational_drag, self.max_thrust, self.max_torque, self.gravity]
        if len(self.inertia) != 3 or min(values) <= 0:
            raise ConfigurationError("quad parameters must all be positive")

    def as_array(self) -> np.ndarray:
        return np.array([self.mass, *self.inertia, self.linear_drag, self.rotational_drag, self.gravity])

    from_dict = classmethod(_from_dict)

    def to_dict(self):
        return asdict(self)


@dataclass
class RigidBodyState:
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    attitude: np.ndarray = field(default_factory=lambda: np.zeros(3))
    body_rates: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.position, self.velocity, self.attitude, self.body_rates]).astype(float)

    @classmethod
    def from_array(cls, s) -> "RigidBodyState":
        s = np.asarray(s, dtype=float)
        return cls(s[0:3].copy(), s[3:6].copy(), s[6:9].copy(), s[9:12].copy())


@dataclass
class ActuatorCommand:
    thrust: float
    torque: np.ndarray

    def as_array(self) -> np.ndarray:
        return np.array([self.thrust, *self.torque], dtype=float)


def _state_array(state):
    return state.as_array() if isinstance(state, RigidBodyState) else np.asarray(state, dtype=float)


def _wrench_array(wrench):
    if wrench is None:
        return np.zeros(6)
    if isinstance(wrench, tuple):
        return np.concatenate([np.asarray(wrench[0], float), np.asarray(wrench[1], float)])
    return np.asarray(wrench, dtype=float)


def check_envelope(s) -> None:
    if not np.all(np.isfinite(s)):
        raise CrashFault("non-finite vehicle state")
    if abs(s[6]) > CRASH_ANGLE or abs(s[7]) > CRASH_ANGLE:
        raise CrashFault(f"attitude outside envelope: roll {np.rad2deg(s[6]):.1f} deg, pitch {np.rad2deg(s[7]):.1f} deg")


def dynamics_derivative(state, cmd, external_wrench=None, params: QuadParams | None = None) -> np.ndarray:
    """Time derivative of the 12-element state.

    ``external_wrench`` is ``(force_world, torque_body)`` or a 6-vector.
    """
    params = params or QuadParams()
    s = _state_array(state)
    if abs(s[7]) > CRASH_ANGLE:
        raise CrashFault("pitch near gimbal lock")
    c = cmd.as_array() if isinstance(cmd, ActuatorCommand) else np.asarray(cmd, dtype=float)
    return kernels.rb_deriv(s, c, _wrench_array(external_wrench), params.as_array())


def rk4(fun, t, y, dt):
    """One classical Runge-Kutta step of ``y' = fun(t, y)``."""
    k1 = fun(t, y)
    k2 = fun(t + 0.5 * dt, y + 0.5 * dt * k1)
    k3 = fun(t + 0.5 * dt, y + 0.5 * dt * k2)
    k4 = fun(t + dt, y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_step(state, cmd, wrench, params: QuadParams, dt: float, *, _prm=None):
    """RK4 with command and wrench held over the step; returns a state array."""
    if dt <= 0:
        raise ConfigurationError("dt must be positive")
    s = _state_array(state)
    c = cmd.as_array() if isinstance(cmd, ActuatorCommand) else np.asarray(cmd, dtype=float)
    prm = params.as_array() if _prm is None else _prm
    out = kernels.rb_rk4(s, c, _wrench_array(wrench), prm, dt)
    check_envelope(out)
    return out


def euler_rates(s) -> np.ndarray:
    """Euler angle rates from a state array."""
    return kernels.euler_rate_matrix(s[6], s[7]) @ s[9:12]


@dataclass
class CascadeConfig:
    pos_kp: float = 2.0
    pos_ki: float = 0.05
    pos_int_limit: float = 1.0
    vel_kp: float = 4.0
    vel_ki: float = 1.0
    vel_kd: float = 0.0
    vel_int_limit: float = 3.0
    max_speed: float = 3.0
    max_tilt: float = 0.35
    ref_time_constant: float = 0.05
    nominal_mass: float = 1.2
    gravity: float = GRAVITY
    max_thrust: float = 30.0

    def __post_init__(self):
        if not 0 < self.max_tilt < np.pi / 2:
            raise ConfigurationError("max_tilt must lie in (0, pi/2)")
        if self.ref_time_constant <= 0:
            raise ConfigurationError("ref_time_constant must be positive")

    from_dict = classmethod(_from_dict)

    def to_dict(self):
        return asdict(self)


class CascadeController:
    """Position PID -> velocity PID -> roll/pitch reference and thrust.

    The roll/pitch reference passes through a first-order low-pass; its
    derivative is read off the filter state exactly, which supplies the
    reference rate to the attitude layer.
    """

    def __init__(self, cfg: CascadeConfig | None = None):
        self.cfg = cfg or CascadeConfig()
        self.pos_int = np.zeros(3)
        self.vel_int = np.zeros(3)
        self.prev_vel_err = None
        self.att_filter = None

    def step(self, s, pos_ref, vel_ref, dt):
        cfg = self.cfg
        pos, vel = s[0:3], s[3:6]
        e_pos = np.asarray(pos_ref) - pos
        self.pos_int = np.clip(self.pos_int + e_pos * dt, -cfg.pos_int_limit, cfg.pos_int_limit)
        v_cmd = np.asarray(vel_ref) + cfg.pos_kp * e_pos + cfg.pos_ki * self.pos_int
        speed = np.linalg.norm(v_cmd)
        if speed > cfg.max_speed:
            v_cmd *= cfg.max_speed / speed

        e_vel = v_cmd - vel
        self.vel_int = np.clip(self.vel_int + e_vel * dt, -cfg.vel_int_limit, cfg.vel_int_limit)
        d_vel = np.zeros(3) if self.prev_vel_err is None else (e_vel - self.prev_vel_err) / dt
        self.prev_vel_err = e_vel
        acc = cfg.vel_kp * e_vel + cfg.vel_ki * self.vel_int + cfg.vel_kd * d_vel

        att_raw = self.tilt_for_acceleration(acc, s[8])
        phi, theta = s[6], s[7]
        thrust = cfg.nominal_mass * (cfg.gravity + acc[2]) / max(np.cos(phi) * np.cos(theta), 0.5)
        thrust = float(np.clip(thrust, 0.0, cfg.max_thrust))

        if self.att_filter is None:
            self.att_filter = att_raw.copy()
        alpha = 1.0 - np.exp(-dt / cfg.ref_time_constant)
        self.att_filter = self.att_filter + alpha * (att_raw - self.att_filter)
        att_rate = (att_raw - self.att_filter) / cfg.ref_time_constant
        return self.att_filter.copy(), att_rate, thrust

    def tilt_for_acceleration(self, acc, yaw):
        """Roll/pitch that point thrust along the desired horizontal acceleration."""
        cfg = self.cfg
        c, s = np.cos(yaw), np.sin(yaw)
        gz = max(cfg.gravity + acc[2], 0.1 * cfg.gravity)
        theta = np.arctan2(c * acc[0] + s * acc[1], gz)
        phi = np.arctan2((s * acc[0] - c * acc[1]) * np.cos(theta), gz)
        return np.clip(np.array([phi, theta]), -cfg.max_tilt, cfg.max_tilt)


def cascade_step(cfg_or_ctrl, state, position_ref, dt, velocity_ref=None):
    """Functional entry point: returns ``(attitude_ref, attitude_ref_rate, thrust)``.

    Passing a :class:`CascadeConfig` builds a fresh controller (integrators and
    filter at rest); pass a :class:`CascadeController` to keep state.
    """
    ctrl = cfg_or_ctrl if isinstance(cfg_or_ctrl, CascadeController) else CascadeController(cfg_or_ctrl)
    vel_ref = np.zeros(3) if velocity_ref is None else velocity_ref
    return ctrl.step(_state_array(state), position_ref, vel_ref, dt)


def augment_and_apply(base_torque, added_torque, yaw_torque, limits, thrust=0.0, max_thrust=None):
    """Sum baseline and added roll/pitch torque, saturate, and echo the total.

    Returns ``(ActuatorCommand, total_roll_pitch)``; the echo is the clamped
    value actually applied, which is what learning controllers must store.
    """
    total = np.clip(np.asarray(base_torque, dtype=float) + np.asarray(added_torque, dtype=float), -limits, limits)
    yaw = float(np.clip(yaw_torque, -limits, limits))
    if max_thrust is not None:
        thrust = float(np.clip(thrust, 0.0, max_thrust))
    cmd = ActuatorCommand(thrust, np.array([total[0], total[1], yaw]))
    return cmd, total.copy()
