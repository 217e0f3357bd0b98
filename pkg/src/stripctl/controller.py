"""Continuation controller: a small MLP of the scalar progress variable.

``u(lam) = u_max * tanh(W_L relu(... relu(W_1 lam + b_1) ...) + b_L)`` with
the output bound enforced by construction.  Forward, exact reverse-mode
pullback, seeded Xavier initialization, and the Adam update live here; no
autodiff framework is involved.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, NonFiniteGradientError


@dataclass
class ControllerParams:
    """Flat parameter vector with layer layout metadata.

    Packing order is weights-then-bias per layer:
    ``[W1.ravel(), b1, W2.ravel(), b2, ...]`` with ``Wl`` of shape
    ``(layer_sizes[l], layer_sizes[l-1])`` (row-major).
    """

    layer_sizes: tuple
    theta: np.ndarray
    u_max: np.ndarray  # per-component output bound

    def __post_init__(self):
        if self.layer_sizes[0] != 1:
            raise InvalidInputError("controller input is the scalar continuation variable")
        expected = parameter_count(self.layer_sizes)
        if self.theta.shape != (expected,):
            raise InvalidInputError(f"theta has {self.theta.size} entries, expected {expected}")
        u_max = np.broadcast_to(np.asarray(self.u_max, float), (self.layer_sizes[-1],)).copy()
        object.__setattr__(self, "u_max", u_max)

    @property
    def output_dim(self) -> int:
        return self.layer_sizes[-1]

    def with_theta(self, theta: np.ndarray) -> "ControllerParams":
        return ControllerParams(self.layer_sizes, theta, self.u_max)


def parameter_count(layer_sizes) -> int:
    return sum(
        layer_sizes[l] * layer_sizes[l - 1] + layer_sizes[l]
        for l in range(1, len(layer_sizes))
    )


def _unpack(params: ControllerParams):
    sizes = params.layer_sizes
    theta = params.theta
    offset = 0
    layers = []
    for l in range(1, len(sizes)):
        n_out, n_in = sizes[l], sizes[l - 1]
        w = theta[offset : offset + n_out * n_in].reshape(n_out, n_in)
        offset += n_out * n_in
        b = theta[offset : offset + n_out]
        offset += n_out
        layers.append((w, b))
    return layers


def init_params(layer_sizes, u_max, seed_sequence) -> ControllerParams:
    """Xavier-uniform hidden weights, zero output layer and biases.

    The zero output layer makes a fresh controller emit ``u(lam) = 0``, so a
    reinitialized receding-horizon segment starts from "hold position" instead
    of perturbing the re-anchored state with random motion.  Gradients reach
    the output weights immediately (hidden activations are nonzero), so
    training is unaffected.  Deterministic given the ``SeedSequence``.
    """
    rng = np.random.default_rng(seed_sequence)
    chunks = []
    last = len(layer_sizes) - 1
    for l in range(1, last + 1):
        n_out, n_in = layer_sizes[l], layer_sizes[l - 1]
        if l == last:
            chunks.append(np.zeros(n_out * n_in))
        else:
            limit = np.sqrt(6.0 / (n_in + n_out))
            chunks.append(rng.uniform(-limit, limit, size=n_out * n_in))
        chunks.append(np.zeros(n_out))
    return ControllerParams(tuple(layer_sizes), np.concatenate(chunks), u_max)


def segment_seed(global_seed: int, segment_index: int) -> np.random.SeedSequence:
    """Deterministic per-segment reinitialization seed."""
    return np.random.SeedSequence(entropy=global_seed, spawn_key=(segment_index,))


def forward(params: ControllerParams, lam: float) -> np.ndarray:
    """Bounded control vector at continuation progress ``lam``."""
    layers = _unpack(params)
    h = np.array([float(lam)])
    for w, b in layers[:-1]:
        h = np.maximum(w @ h + b, 0.0)
    w, b = layers[-1]
    return params.u_max * np.tanh(w @ h + b)


def pullback(params: ControllerParams, lam: float, v: np.ndarray) -> np.ndarray:
    """Gradient of ``<v, u(lam)>`` w.r.t. theta (exact reverse mode).

    ReLU uses subgradient 0 at exactly-zero preactivations.
    """
    layers = _unpack(params)
    h = np.array([float(lam)])
    activations = [h]
    for w, b in layers[:-1]:
        h = np.maximum(w @ h + b, 0.0)
        activations.append(h)
    w, b = layers[-1]
    out_pre = w @ h + b

    grad = np.zeros_like(params.theta)
    t = np.tanh(out_pre)
    delta = np.asarray(v, float) * params.u_max * (1.0 - t * t)
    # walk layers backwards, writing grads into the flat layout
    offsets = []
    offset = 0
    for wl, bl in layers:
        offsets.append(offset)
        offset += wl.size + bl.size
    for l in range(len(layers) - 1, -1, -1):
        wl, bl = layers[l]
        a_prev = activations[l]
        o = offsets[l]
        grad[o : o + wl.size] = np.outer(delta, a_prev).ravel()
        grad[o + wl.size : o + wl.size + bl.size] = delta
        if l > 0:
            delta = (wl.T @ delta) * (activations[l] > 0.0)
    return grad


@dataclass
class AdamState:
    """Bias-corrected Adam moments over a flat parameter vector."""

    dim: int
    learning_rate: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: np.ndarray = field(default=None)  # type: ignore[assignment]
    v: np.ndarray = field(default=None)  # type: ignore[assignment]
    step_count: int = 0

    def __post_init__(self):
        if self.m is None:
            self.m = np.zeros(self.dim)
        if self.v is None:
            self.v = np.zeros(self.dim)


def adam_step(state: AdamState, params: ControllerParams, grad: np.ndarray) -> ControllerParams:
    """One bias-corrected Adam update; rejects non-finite gradients."""
    grad = np.asarray(grad, float)
    if grad.shape != params.theta.shape:
        raise InvalidInputError("gradient shape does not match parameters")
    if not np.all(np.isfinite(grad)):
        raise NonFiniteGradientError("non-finite controller gradient")
    state.step_count += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = state.m / (1.0 - state.beta1 ** state.step_count)
    v_hat = state.v / (1.0 - state.beta2 ** state.step_count)
    theta = params.theta - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
    return params.with_theta(theta)
