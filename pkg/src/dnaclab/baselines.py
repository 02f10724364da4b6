"""Comparison attitude controllers: PID baseline, MRAC and deep MRAC.

MRAC and DMRAC run in the same added-torque slot as DNAC. Both use the
first-order attitude abstraction ``x_dot = f(x) + g_hat u`` with a matched
reference model, so the linear part of the law is
``u = g_hat^-1 (A_m e_m + x_m_dot - nu_ad)`` which yields
``e_m_dot = A_m e_m + (f - nu_ad)``. The adaptive element
``nu_ad = W^T phi(x)`` follows ``W_dot = Gamma_m phi e_m^T P B`` with
``A_m^T P + P A_m = -Q`` and ``B = I`` (the input is already normalised by
``g_hat``).
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy.linalg import solve_continuous_lyapunov

from .dnac import ControllerFault, ReplayBuffer, ReplaySample, TrainingFault, fit_inner_layers, _diag
from .nn_core import AdamState, ConfigurationError, TrainingError, forward, init_net
from .plant import rk4


def _from_dict(cls, doc):
    doc = dict(doc or {})
    known = {f.name for f in fields(cls)}
    unknown = set(doc) - known
    if unknown:
        raise ConfigurationError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    return cls(**doc)


@dataclass
class PidGains:
    kp: tuple = (1.5, 1.5)
    ki: tuple = (0.5, 0.5)
    kd: tuple = (0.3, 0.3)
    integrator_limit: float = 1.0
    output_limit: float = 1.0
    yaw_kp: float = 0.4
    yaw_ki: float = 0.05
    yaw_kd: float = 0.1

    from_dict = classmethod(_from_dict)

    def to_dict(self):
        return asdict(self)


class PidState:
    """Per-axis PID with integrator clamping and output saturation."""

    def __init__(self, kp, ki, kd, integrator_limit=1.0, output_limit=1.0):
        self.kp = np.atleast_1d(np.asarray(kp, dtype=float))
        n = self.kp.size
        self.ki = np.broadcast_to(np.asarray(ki, dtype=float), (n,)).copy()
        self.kd = np.broadcast_to(np.asarray(kd, dtype=float), (n,)).copy()
        self.integrator = np.zeros(n)
        self.prev_error = np.zeros(n)
        self.integrator_limit = float(integrator_limit)
        self.output_limit = float(output_limit)


def pid_step(state: PidState, error, error_rate, dt) -> np.ndarray:
    if dt <= 0:
        raise ConfigurationError("dt must be positive")
    e = np.asarray(error, dtype=float)
    lim = state.integrator_limit
    state.integrator = np.clip(state.integrator + e * dt, -lim, lim)
    state.prev_error = e.copy()
    out = state.kp * e + state.ki * state.integrator + state.kd * np.asarray(error_rate, dtype=float)
    return np.clip(out, -state.output_limit, state.output_limit)


def lyapunov_matrix(a_m, q) -> np.ndarray:
    """Solve ``A^T P + P A = -Q``."""
    return solve_continuous_lyapunov(np.asarray(a_m).T, -np.asarray(q))


def quadratic_basis(x) -> np.ndarray:
    r, p = x[0], x[1]
    return np.array([1.0, r, p, r * r, p * p, r * p])


@dataclass
class MracConfig:
    a_m: float = -4.0
    b_m: float = 4.0
    q: float = 1.0
    gamma: float = 10.0
    g_hat: tuple = (100.0, 100.0)
    weight_bound: float = 1e3
    output_gain: float = 1.0

    from_dict = classmethod(_from_dict)

    def to_dict(self):
        doc = asdict(self)
        doc["g_hat"] = list(np.asarray(self.g_hat, dtype=float))
        return doc


class MracState:
    def __init__(self, a_m, b_m, gamma, q=None, basis=quadratic_basis, n_basis=6, g_hat=(100.0, 100.0),
                 weight_bound=1e3):
        self.a_m = np.atleast_2d(np.asarray(a_m, dtype=float))
        n = self.a_m.shape[0]
        self.b_m = np.atleast_2d(np.asarray(b_m, dtype=float))
        if np.any(np.linalg.eigvals(self.a_m).real >= 0):
            raise ConfigurationError("reference model A_m must be Hurwitz")
        self.q = np.eye(n) if q is None else np.atleast_2d(np.asarray(q, dtype=float))
        self.p = lyapunov_matrix(self.a_m, self.q)
        self.b = np.eye(n)
        self.gamma = float(gamma)
        self.g_hat = _diag(g_hat, n, "g_hat")
        self.x_m = None
        self.weights = np.zeros((n_basis, n))
        self.basis = basis
        self.weight_bound = weight_bound

    @classmethod
    def from_config(cls, cfg: MracConfig, n=2) -> "MracState":
        eye = np.eye(n)
        return cls(cfg.a_m * eye, cfg.b_m * eye, cfg.gamma, cfg.q * eye, g_hat=cfg.g_hat,
                   weight_bound=cfg.weight_bound)

    def model_rate(self, x_m, r):
        return self.a_m @ x_m + self.b_m @ r

    def adaptation_rate(self, phi, e_m) -> np.ndarray:
        """Outer-weight derivative ``Gamma phi e_m^T P B``."""
        return self.gamma * np.outer(phi, e_m @ self.p @ self.b)


def _mrac_core(state: MracState, phi, x, r, dt):
    x = np.asarray(x, dtype=float)
    r = np.asarray(r, dtype=float)
    if dt <= 0:
        raise ConfigurationError("dt must be positive")
    if state.x_m is None:
        state.x_m = x.copy()
    state.x_m = rk4(lambda _t, xm: state.model_rate(xm, r), 0.0, state.x_m, dt)
    xm_dot = state.model_rate(state.x_m, r)
    e_m = x - state.x_m
    nu = state.weights.T @ phi
    torque = (state.a_m @ e_m + xm_dot - nu) / state.g_hat
    w = state.weights + dt * state.adaptation_rate(phi, e_m)
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(torque))):
        raise ControllerFault("non-finite MRAC output")
    if np.linalg.norm(w) >= state.weight_bound:
        raise ControllerFault("MRAC weights exceeded bound")
    state.weights = w
    return torque, e_m


def mrac_step(state: MracState, x, r, dt):
    """Advance the reference model one RK4 step and return ``(torque, state)``.

    The reference state starts at the first measured ``x`` so that the model
    error is zero at engagement.
    """
    torque, _ = _mrac_core(state, state.basis(np.asarray(x, dtype=float)), x, r, dt)
    return torque, state


@dataclass
class DmracConfig(MracConfig):
    memory_size: int = 100
    batch_size: int = 20
    epochs: int = 5
    beta: float = 1.0
    learning_rate: float = 1e-3
    layer_dims: tuple = (2, 3, 4, 8)
    activations: tuple = ("tanh", "log_sigmoid", "tanh")

    def __post_init__(self):
        if self.memory_size % self.batch_size:
            raise ConfigurationError("batch_size must divide memory_size")

    def to_dict(self):
        doc = super().to_dict()
        doc["layer_dims"] = list(self.layer_dims)
        doc["activations"] = list(self.activations)
        return doc


class DmracState(MracState):
    """MRAC whose basis is a DNN feature map trained on replay data."""

    def __init__(self, cfg: DmracConfig, seed=0, n=2):
        eye = np.eye(n)
        self.rng = np.random.default_rng(seed)
        self.net = init_net(self.rng, tuple(cfg.layer_dims), tuple(cfg.activations), output_dim=n)
        super().__init__(cfg.a_m * eye, cfg.b_m * eye, cfg.gamma, cfg.q * eye,
                         basis=None, n_basis=self.net.feature_dim, g_hat=cfg.g_hat,
                         weight_bound=cfg.weight_bound)
        self.cfg = cfg
        self.adam = AdamState.zeros_like(self.net.inner_params(), learning_rate=cfg.learning_rate)
        self.buffer = ReplayBuffer(cfg.memory_size, n)
        self.train_count = 0
        self.adam_steps = 0
        self.faults = 0

    @property
    def weights(self):
        return self.net.outer_weights

    @weights.setter
    def weights(self, value):
        # the MRAC outer weights are the network's outer layer
        if hasattr(self, "net"):
            self.net.outer_weights = value

    def train(self):
        try:
            net, adam, losses, _ = fit_inner_layers(
                self.net, self.adam, self.buffer, batch_size=self.cfg.batch_size,
                epochs=self.cfg.epochs, beta=self.cfg.beta, rng=self.rng,
            )
        except (TrainingError, FloatingPointError, ValueError) as exc:
            self.buffer.clear()
            self.faults += 1
            raise TrainingFault(f"DMRAC training pass aborted: {exc}") from exc
        net.outer_weights = self.net.outer_weights
        self.adam_steps += adam.step_count - self.adam.step_count
        self.net, self.adam = net, adam
        self.buffer.clear()
        self.train_count += 1
        return losses


def dmrac_step(state: DmracState, x, r, dt, phi=None):
    """MRAC step with DNN features. Returns ``(torque, state, training_due)``.

    ``training_due`` reports whether the replay buffer is full; samples are
    added through :meth:`DmracController.observe`.
    """
    if phi is None:
        phi = forward(state.net, np.asarray(x, dtype=float))[0]
    torque, _ = _mrac_core(state, phi, x, r, dt)
    return torque, state, len(state.buffer) >= state.buffer.capacity


class MracController:
    name = "mrac"

    def __init__(self, cfg: MracConfig | None = None, seed=0):
        self.cfg = cfg or MracConfig()
        self.state = MracState.from_config(self.cfg)
        self.last_f_hat = np.zeros(2)

    @property
    def weight_norm(self):
        return float(np.linalg.norm(self.state.weights))

    def added_torque(self, x, x_d, x_d_dot, dt):
        phi = self.state.basis(np.asarray(x, dtype=float))
        self.last_f_hat = self.state.weights.T @ phi
        torque, _ = mrac_step(self.state, x, x_d, dt)
        return self.cfg.output_gain * torque

    def observe(self, x_dot, x, total_torque):
        return False


class DmracController:
    name = "dmrac"

    def __init__(self, cfg: DmracConfig | None = None, seed=0):
        self.cfg = cfg or DmracConfig()
        self.state = DmracState(self.cfg, seed)
        self.last_f_hat = np.zeros(2)

    @property
    def weight_norm(self):
        return float(np.linalg.norm(self.state.weights))

    def added_torque(self, x, x_d, x_d_dot, dt):
        phi = forward(self.state.net, np.asarray(x, dtype=float))[0]
        self.last_f_hat = self.state.weights.T @ phi
        torque, _, _ = dmrac_step(self.state, x, x_d, dt, phi=phi)
        return self.cfg.output_gain * torque

    def observe(self, x_dot, x, total_torque):
        st = self.state
        gu = st.g_hat * np.asarray(total_torque, dtype=float)
        due = st.buffer.append(ReplaySample(np.asarray(x_dot, float), np.asarray(x, float), gu))
        if due:
            st.train()
        return due
