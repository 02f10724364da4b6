"""Small dense feedforward network with exact backprop, Adam and Smooth L1.

Weights follow the column convention ``phi_l = act(W_l^T phi_{l-1} + b_l)``,
so a layer's weight matrix has shape ``(fan_in, fan_out)``. All functions
accept either a single input vector or a batch with samples along axis 0.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass

import numpy as np


class ConfigurationError(ValueError):
    """Shapes or hyperparameters are inconsistent."""


class InputError(ValueError):
    """A numeric input is not finite."""


class TrainingError(RuntimeError):
    """An optimizer step saw non-finite values."""

    def __init__(self, message, batch=None):
        super().__init__(message)
        self.batch = batch


class ActivationKind(enum.Enum):
    TANH = "tanh"
    LOG_SIGMOID = "log_sigmoid"
    IDENTITY = "identity"


def activate(kind: ActivationKind, z):
    if kind is ActivationKind.TANH:
        return np.tanh(z)
    if kind is ActivationKind.LOG_SIGMOID:
        # log(1 / (1 + e^-z)) = -log(1 + e^-z); logaddexp keeps both tails exact
        return -np.logaddexp(0.0, -z)
    return np.array(z, dtype=float, copy=True)


def activation_derivative(kind: ActivationKind, z):
    if kind is ActivationKind.TANH:
        t = np.tanh(z)
        return 1.0 - t * t
    if kind is ActivationKind.LOG_SIGMOID:
        # d/dz log(sigmoid(z)) = sigmoid(-z) = exp(-softplus(z))
        return np.exp(-np.logaddexp(0.0, z))
    return np.ones_like(z, dtype=float)


@dataclass
class DenseLayer:
    weights: np.ndarray
    bias: np.ndarray
    activation: ActivationKind

    @property
    def fan_in(self) -> int:
        return self.weights.shape[0]

    @property
    def fan_out(self) -> int:
        return self.weights.shape[1]


@dataclass
class FeedforwardNet:
    layers: list
    outer_weights: np.ndarray

    def __post_init__(self):
        validate_net(self)

    @property
    def input_dim(self) -> int:
        return self.layers[0].fan_in

    @property
    def feature_dim(self) -> int:
        return self.layers[-1].fan_out

    @property
    def output_dim(self) -> int:
        return self.outer_weights.shape[1]

    def inner_params(self) -> list:
        """Inner parameters in the fixed order ``[W1, b1, W2, b2, ...]``."""
        out = []
        for layer in self.layers:
            out.extend([layer.weights, layer.bias])
        return out

    def with_inner_params(self, params) -> "FeedforwardNet":
        layers = [
            DenseLayer(params[2 * i], params[2 * i + 1], layer.activation)
            for i, layer in enumerate(self.layers)
        ]
        return FeedforwardNet(layers, self.outer_weights)

    def copy(self) -> "FeedforwardNet":
        layers = [DenseLayer(l.weights.copy(), l.bias.copy(), l.activation) for l in self.layers]
        return FeedforwardNet(layers, self.outer_weights.copy())


@dataclass
class ForwardCache:
    inputs: list  # input to each layer
    pre: list  # pre-activations
    features: np.ndarray
    batched: bool


@dataclass
class GradientSet:
    weights: list
    biases: list
    outer: np.ndarray

    def inner(self) -> list:
        out = []
        for gw, gb in zip(self.weights, self.biases):
            out.extend([gw, gb])
        return out


def validate_net(net: FeedforwardNet) -> None:
    if not net.layers:
        raise ConfigurationError("network needs at least one layer")
    prev = None
    for i, layer in enumerate(net.layers):
        w, b = layer.weights, layer.bias
        if w.ndim != 2 or b.shape != (w.shape[1],):
            raise ConfigurationError(f"layer {i}: weights {w.shape} and bias {b.shape} do not match")
        if prev is not None and w.shape[0] != prev:
            raise ConfigurationError(f"layer {i}: fan_in {w.shape[0]} != previous fan_out {prev}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ConfigurationError(f"layer {i}: non-finite parameters")
        prev = w.shape[1]
    if net.outer_weights.ndim != 2 or net.outer_weights.shape[0] != prev:
        raise ConfigurationError(
            f"outer weights {net.outer_weights.shape} need {prev} rows (feature dim)"
        )


def init_net(rng, dims=(2, 3, 4, 8), activations=("tanh", "log_sigmoid", "tanh"), output_dim=2):
    """Glorot-uniform inner weights, small uniform biases, zero outer weights."""
    if len(activations) != len(dims) - 1:
        raise ConfigurationError("need one activation per layer")
    layers = []
    for fan_in, fan_out, act in zip(dims[:-1], dims[1:], activations):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        b = rng.uniform(-1.0, 1.0, size=fan_out) / np.sqrt(fan_in)
        layers.append(DenseLayer(w, b, ActivationKind(act)))
    return FeedforwardNet(layers, np.zeros((dims[-1], output_dim)))


def forward(net: FeedforwardNet, x):
    """Return ``(features, output, cache)`` for one input or a batch."""
    x = np.asarray(x, dtype=float)
    batched = x.ndim == 2
    if x.shape[-1] != net.input_dim or x.ndim not in (1, 2):
        raise ConfigurationError(f"input shape {x.shape} does not match input dim {net.input_dim}")
    if not np.all(np.isfinite(x)):
        raise InputError("non-finite network input")
    h = x
    inputs, pre = [], []
    for layer in net.layers:
        inputs.append(h)
        z = h @ layer.weights + layer.bias
        pre.append(z)
        h = activate(layer.activation, z)
    output = h @ net.outer_weights
    return h, output, ForwardCache(inputs, pre, h, batched)


def backward(net: FeedforwardNet, cache: ForwardCache, output_grad) -> GradientSet:
    """Gradients of ``sum(output_grad * output)`` w.r.t. every parameter.

    For a batched cache the gradient is summed over samples.
    """
    g = np.asarray(output_grad, dtype=float)
    if len(cache.pre) != len(net.layers):
        raise ConfigurationError("cache does not belong to this network")
    if g.shape != cache.features.shape[:-1] + (net.output_dim,):
        raise ConfigurationError(f"output_grad shape {g.shape} does not match network output")
    if not cache.batched:
        g = g[None, :]
        feats = cache.features[None, :]
        inputs = [h[None, :] for h in cache.inputs]
        pre = [z[None, :] for z in cache.pre]
    else:
        feats, inputs, pre = cache.features, cache.inputs, cache.pre
    for layer, z in zip(net.layers, pre):
        if z.shape[-1] != layer.fan_out:
            raise ConfigurationError("cache does not belong to this network")

    g_outer = feats.T @ g
    delta = g @ net.outer_weights.T  # d/d features
    gw = [None] * len(net.layers)
    gb = [None] * len(net.layers)
    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        dz = delta * activation_derivative(layer.activation, pre[i])
        gw[i] = inputs[i].T @ dz
        gb[i] = dz.sum(axis=0)
        delta = dz @ layer.weights.T
    return GradientSet(gw, gb, g_outer)


@dataclass
class AdamState:
    first_moment: list
    second_moment: list
    step_count: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def zeros_like(cls, params, **hyper) -> "AdamState":
        return cls(
            [np.zeros_like(p, dtype=float) for p in params],
            [np.zeros_like(p, dtype=float) for p in params],
            **hyper,
        )


def adam_step(state: AdamState, params, grads, batch=None):
    """One bias-corrected Adam update. Returns ``(new_params, new_state)``.

    Inputs are left untouched.
    """
    if state.learning_rate <= 0:
        raise ConfigurationError("learning_rate must be positive")
    if len(params) != len(grads) or len(params) != len(state.first_moment):
        raise ConfigurationError("parameter, gradient and moment lists differ in length")
    for i, (p, g) in enumerate(zip(params, grads)):
        if np.shape(p) != np.shape(g):
            raise ConfigurationError(f"gradient {i} shape {np.shape(g)} != parameter shape {np.shape(p)}")
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient in parameter {i}", batch=batch)

    t = state.step_count + 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    new_params, m_new, v_new = [], [], []
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        step = state.learning_rate * (m / c1) / (np.sqrt(v / c2) + state.epsilon)
        new_params.append(p - step)
        m_new.append(m)
        v_new.append(v)
    new_state = AdamState(m_new, v_new, t, state.learning_rate, b1, b2, state.epsilon)
    return new_params, new_state


def smooth_l1(pred, target, beta=1.0):
    """Smooth L1 loss and its gradient w.r.t. ``pred``.

    Rows are samples; the per-sample loss sums over components and the result
    is the mean over samples. A 1-D input is a batch of scalar samples.
    """
    if not beta > 0:
        raise ConfigurationError("beta must be positive")
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.shape != target.shape:
        raise ConfigurationError(f"pred {pred.shape} and target {target.shape} differ")
    n = pred.shape[0] if pred.ndim else 1
    d = pred - target
    ad = np.abs(d)
    quad = ad < beta
    per = np.where(quad, 0.5 * d * d / beta, ad - 0.5 * beta)
    grad = np.where(quad, d / beta, np.sign(d)) / n
    return float(per.sum() / n), grad


def net_to_dict(net: FeedforwardNet) -> dict:
    return {
        "layers": [
            {
                "weights": layer.weights.tolist(),
                "bias": layer.bias.tolist(),
                "activation": layer.activation.value,
            }
            for layer in net.layers
        ],
        "outer_weights": net.outer_weights.tolist(),
    }


def net_from_dict(doc: dict) -> FeedforwardNet:
    try:
        layers = [
            DenseLayer(
                np.array(entry["weights"], dtype=float),
                np.array(entry["bias"], dtype=float),
                ActivationKind(entry["activation"]),
            )
            for entry in doc["layers"]
        ]
        outer = np.array(doc["outer_weights"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"malformed network document: {exc}") from exc
    if outer.ndim == 1:
        outer = outer.reshape(-1, 1)
    return FeedforwardNet(layers, outer)


def net_to_json(net: FeedforwardNet, **kw) -> str:
    return json.dumps(net_to_dict(net), **kw)


def net_from_json(text: str) -> FeedforwardNet:
    return net_from_dict(json.loads(text))
