"""Deep nonlinear adaptive controller.

The uncertainty estimate is ``f_hat(x) = W^T sigma(Phi(x))``. The outer
weights ``W`` move every control step by the Lyapunov law
``W_dot = Gamma_W sigma(Phi(x)) e^T``; the inner layers ``Phi`` are refit in
batches from a replay buffer of ``(x_dot, x, g_hat u)`` triples.

Sign convention: ``e = x - x_d`` throughout. With this convention the control
law ``u = g_hat^-1 (-K e - Ks sgn(e) + x_d_dot - f_hat)`` gives ``e_dot = -K e``
when ``f_hat`` matches the drift.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .nn_core import (
    AdamState,
    ConfigurationError,
    FeedforwardNet,
    TrainingError,
    adam_step,
    backward,
    forward,
    init_net,
    net_from_dict,
    net_to_dict,
    smooth_l1,
)

log = logging.getLogger(__name__)


class ControllerFault(RuntimeError):
    """The augmentation produced a non-finite or divergent value."""


class TrainingFault(ControllerFault):
    """A batch training pass was aborted; previous weights were kept."""


# scenario JSON accepts the symbol names as aliases
_ALIASES = {
    "K": "k",
    "Ks": "ks",
    "Gamma_W": "gamma_w",
    "M": "memory_size",
    "S_b": "batch_size",
    "N_e": "epochs",
}


@dataclass
class DnacConfig:
    k: tuple = (10.0, 10.0)
    ks: float = 0.001
    g_hat: tuple = (100.0, 100.0)
    gamma_w: float = 10.0
    memory_size: int = 100
    batch_size: int = 20
    epochs: int = 5
    beta: float = 1.0
    sgn_boundary: float = 0.01
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    layer_dims: tuple = (2, 3, 4, 8)
    activations: tuple = ("tanh", "log_sigmoid", "tanh")
    weight_bound: float = 1e3
    # fraction of the added torque actually sent; 0 severs the augmentation
    output_gain: float = 1.0

    def __post_init__(self):
        n = self.layer_dims[0]
        self.k = _diag(self.k, n, "k")
        self.g_hat = _diag(self.g_hat, n, "g_hat")
        self.layer_dims = tuple(int(d) for d in self.layer_dims)
        self.activations = tuple(self.activations)
        if np.any(self.k <= 0) or np.any(self.g_hat <= 0):
            raise ConfigurationError("K and g_hat diagonals must be positive")
        if self.ks < 0 or self.sgn_boundary < 0:
            raise ConfigurationError("Ks and sgn_boundary must be nonnegative")
        if self.gamma_w <= 0 or self.beta <= 0:
            raise ConfigurationError("Gamma_W and beta must be positive")
        if min(self.memory_size, self.batch_size, self.epochs) < 1:
            raise ConfigurationError("M, S_b and N_e must be positive")
        if self.memory_size % self.batch_size:
            raise ConfigurationError(f"S_b={self.batch_size} must divide M={self.memory_size}")

    @property
    def n(self) -> int:
        return self.layer_dims[0]

    @classmethod
    def from_dict(cls, doc: dict | None) -> "DnacConfig":
        doc = dict(doc or {})
        known = {f.name for f in fields(cls)}
        kw = {}
        for key, value in doc.items():
            name = _ALIASES.get(key, key)
            if name not in known:
                raise ConfigurationError(f"unknown controller key {key!r}")
            kw[name] = value
        return cls(**kw)

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["k"] = self.k.tolist()
        doc["g_hat"] = self.g_hat.tolist()
        doc["layer_dims"] = list(self.layer_dims)
        doc["activations"] = list(self.activations)
        return doc


def _diag(value, n, name):
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(n, float(arr))
    elif arr.ndim == 2:
        if np.any(arr != np.diag(np.diag(arr))):
            raise ConfigurationError(f"{name} must be diagonal")
        arr = np.diag(arr).copy()
    if arr.shape != (n,):
        raise ConfigurationError(f"{name} needs {n} diagonal entries")
    return arr


@dataclass
class ReplaySample:
    x_dot: np.ndarray
    x: np.ndarray
    gu: np.ndarray


class ReplayBuffer:
    """Fixed-capacity store for one training pass, emptied after it."""

    def __init__(self, capacity: int, n: int):
        self.capacity = capacity
        self.x_dot = np.zeros((capacity, n))
        self.x = np.zeros((capacity, n))
        self.gu = np.zeros((capacity, n))
        self.size = 0

    def __len__(self):
        return self.size

    def append(self, sample: ReplaySample) -> bool:
        if self.size >= self.capacity:
            raise ConfigurationError("replay buffer overflow; train before recording more")
        i = self.size
        self.x_dot[i] = sample.x_dot
        self.x[i] = sample.x
        self.gu[i] = sample.gu
        self.size += 1
        return self.size == self.capacity

    def sample(self, i: int) -> ReplaySample:
        if not 0 <= i < self.size:
            raise IndexError(i)
        return ReplaySample(self.x_dot[i].copy(), self.x[i].copy(), self.gu[i].copy())

    def clear(self):
        self.size = 0

    def to_dict(self) -> dict:
        s = self.size
        return {
            "capacity": self.capacity,
            "x_dot": self.x_dot[:s].tolist(),
            "x": self.x[:s].tolist(),
            "gu": self.gu[:s].tolist(),
        }


@dataclass
class TrainingStats:
    passes: int = 0
    adam_steps: int = 0
    faults: int = 0
    # passes in which some sample was not visited exactly once per epoch
    touch_violations: int = 0
    last_pass_steps: int = 0
    last_touches: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    last_losses: list = field(default_factory=list)


@dataclass
class DnacState:
    net: FeedforwardNet
    adam: AdamState
    buffer: ReplayBuffer
    config: DnacConfig
    rng: np.random.Generator
    rng_seed: int = 0
    train_count: int = 0
    stats: TrainingStats = field(default_factory=TrainingStats)

    def checkpoint(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "network": net_to_dict(self.net),
            "buffer": self.buffer.to_dict(),
            "train_count": self.train_count,
            "adam_step_count": self.adam.step_count,
            "rng_seed": self.rng_seed,
        }


def new_state(config: DnacConfig | None = None, seed: int = 0) -> DnacState:
    config = config or DnacConfig()
    rng = np.random.default_rng(seed)
    net = init_net(rng, config.layer_dims, config.activations, output_dim=config.n)
    adam = _fresh_adam(net, config)
    return DnacState(net, adam, ReplayBuffer(config.memory_size, config.n), config, rng, seed)


def restore_state(doc: dict, seed: int | None = None) -> DnacState:
    """Rebuild a state from :meth:`DnacState.checkpoint` output (moments reset)."""
    config = DnacConfig.from_dict(doc["config"])
    net = net_from_dict(doc["network"])
    seed = doc.get("rng_seed", 0) if seed is None else seed
    state = DnacState(
        net,
        _fresh_adam(net, config),
        ReplayBuffer(config.memory_size, config.n),
        config,
        np.random.default_rng(seed),
        seed,
        doc.get("train_count", 0),
    )
    buf = doc.get("buffer") or {}
    for xd, x, gu in zip(buf.get("x_dot", []), buf.get("x", []), buf.get("gu", [])):
        state.buffer.append(ReplaySample(np.asarray(xd), np.asarray(x), np.asarray(gu)))
    return state


def _fresh_adam(net, config):
    return AdamState.zeros_like(
        net.inner_params(),
        learning_rate=config.learning_rate,
        beta1=config.adam_beta1,
        beta2=config.adam_beta2,
        epsilon=config.adam_epsilon,
    )


def estimate_uncertainty(state: DnacState, x) -> np.ndarray:
    return forward(state.net, x)[1]


def smoothed_sign(e, boundary):
    if boundary == 0:
        return np.sign(e)
    return np.clip(e / boundary, -1.0, 1.0)


def compute_control(state: DnacState, e, x_dot_d, x, f_hat=None) -> np.ndarray:
    """Control law; ``f_hat`` may be passed in to reuse a forward pass."""
    cfg = state.config
    if f_hat is None:
        f_hat = estimate_uncertainty(state, x)
    if not np.all(np.isfinite(f_hat)):
        raise ControllerFault("non-finite uncertainty estimate")
    e = np.asarray(e, dtype=float)
    v = -cfg.k * e - cfg.ks * smoothed_sign(e, cfg.sgn_boundary) + np.asarray(x_dot_d) - f_hat
    return v / cfg.g_hat


def outer_increment(state: DnacState, e, features, dt) -> np.ndarray:
    return state.config.gamma_w * dt * np.outer(features, e)


def update_outer_weights(state: DnacState, e, x, dt, features=None) -> DnacState:
    """Explicit Euler step of the outer-weight law."""
    if features is None:
        features = forward(state.net, x)[0]
    w = state.net.outer_weights + outer_increment(state, np.asarray(e, dtype=float), features, dt)
    if not np.all(np.isfinite(w)):
        raise ControllerFault("non-finite outer weights")
    norm = np.linalg.norm(w)
    if norm >= state.config.weight_bound:
        raise ControllerFault(f"outer weight norm {norm:.3g} exceeded bound {state.config.weight_bound:g}")
    state.net.outer_weights = w
    return state


def record_sample(state: DnacState, sample: ReplaySample):
    """Append a sample; returns ``(state, training_due)``."""
    due = state.buffer.append(sample)
    return state, due


def predict_xdot(state: DnacState, x, gu) -> np.ndarray:
    return estimate_uncertainty(state, x) + np.asarray(gu, dtype=float)


def buffer_loss(net: FeedforwardNet, buffer: ReplayBuffer, beta: float) -> float:
    """Full-buffer mean Smooth L1 of the state-derivative prediction."""
    s = buffer.size
    _, out, _ = forward(net, buffer.x[:s])
    return smooth_l1(out + buffer.gu[:s], buffer.x_dot[:s], beta)[0]


def fit_inner_layers(net, adam, buffer, *, batch_size, epochs, beta, rng):
    """Minibatch Adam on the inner layers with the outer weights held fixed.

    The buffer is cut into contiguous segments of ``batch_size``; the segment
    order is shuffled once, then visited ``epochs`` times. Returns
    ``(net, adam, epoch_losses, touches)``. Raises :class:`TrainingError` on any
    non-finite loss or gradient; inputs are never modified.
    """
    m = buffer.size
    n_seg = m // batch_size
    order = rng.permutation(n_seg)
    params = net.inner_params()
    touches = np.zeros(m, dtype=int)
    losses = []
    current = net
    for epoch in range(epochs):
        for seg in order:
            rows = slice(seg * batch_size, (seg + 1) * batch_size)
            _, out, cache = forward(current, buffer.x[rows])
            loss, grad = smooth_l1(out + buffer.gu[rows], buffer.x_dot[rows], beta)
            if not np.isfinite(loss):
                raise TrainingError("non-finite minibatch loss", batch=(epoch, int(seg)))
            grads = backward(current, cache, grad)
            params, adam = adam_step(adam, params, grads.inner(), batch=(epoch, int(seg)))
            current = net.with_inner_params(params)
            touches[rows] += 1
        epoch_loss = buffer_loss(current, buffer, beta)
        if not np.isfinite(epoch_loss):
            raise TrainingError("non-finite buffer loss", batch=(epoch, None))
        losses.append(epoch_loss)
    return current, adam, np.array(losses), touches


def train_inner(state: DnacState):
    """One batch pass over a full buffer. Returns ``(state, epoch_losses)``."""
    cfg = state.config
    if state.buffer.size != cfg.memory_size:
        raise ConfigurationError(f"buffer holds {state.buffer.size} samples, need M={cfg.memory_size}")
    try:
        net, adam, losses, touches = fit_inner_layers(
            state.net,
            state.adam,
            state.buffer,
            batch_size=cfg.batch_size,
            epochs=cfg.epochs,
            beta=cfg.beta,
            rng=state.rng,
        )
    except (TrainingError, FloatingPointError, ValueError) as exc:
        state.buffer.clear()
        state.stats.faults += 1
        raise TrainingFault(f"training pass aborted: {exc}") from exc
    # outer weights stay whatever the online law holds right now
    net.outer_weights = state.net.outer_weights
    state.net = net
    steps = adam.step_count - state.adam.step_count
    state.adam = adam
    state.buffer.clear()
    state.train_count += 1
    st = state.stats
    st.passes += 1
    st.adam_steps += steps
    st.last_pass_steps = steps
    st.last_touches = touches
    if np.any(touches != cfg.epochs):
        st.touch_violations += 1
    st.last_losses = losses.tolist()
    log.debug("inner pass %d: losses %s", state.train_count, np.array2string(losses, precision=4))
    return state, losses


class DnacController:
    """Added-torque augmentation driven by DNAC, for the scenario runner."""

    name = "dnac"

    def __init__(self, config: DnacConfig | None = None, seed: int = 0):
        self.state = new_state(config, seed)
        self.last_f_hat = np.zeros(self.state.config.n)

    @property
    def config(self) -> DnacConfig:
        return self.state.config

    @property
    def weight_norm(self) -> float:
        return float(np.linalg.norm(self.state.net.outer_weights))

    def added_torque(self, x, x_d, x_d_dot, dt):
        st = self.state
        e = np.asarray(x, dtype=float) - x_d
        features, f_hat, _ = forward(st.net, x)
        self.last_f_hat = f_hat
        u = compute_control(st, e, x_d_dot, x, f_hat=f_hat)
        update_outer_weights(st, e, x, dt, features=features)
        return self.config.output_gain * u

    def observe(self, x_dot, x, total_torque) -> bool:
        """Store the echoed total torque; runs a training pass when due."""
        st = self.state
        gu = st.config.g_hat * np.asarray(total_torque, dtype=float)
        _, due = record_sample(st, ReplaySample(np.asarray(x_dot, dtype=float), np.asarray(x, dtype=float), gu))
        if due:
            train_inner(st)
        return due
