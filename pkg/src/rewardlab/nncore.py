"""Feed-forward network engine: init, forward, reverse-mode gradients, Adam,
and Polyak target blending.

Fixed topology only: dense layers with relu hidden activations and a tanh or
identity output. Everything is float64, and every operation is pure -- new
parameter collections are returned instead of mutating inputs, so identical
inputs give bit-identical outputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ShapeError

OUTPUT_ACTIVATIONS = ("tanh", "identity")


@dataclass
class MLPParams:
    """Weights and biases of a fully-connected network.

    weights[k] has shape (layer_sizes[k+1], layer_sizes[k]) and biases[k]
    has length layer_sizes[k+1]. Hidden layers are relu; the output layer
    applies `output_activation` ("tanh" for actors, "identity" for critics).
    """

    layer_sizes: tuple
    weights: list
    biases: list
    output_activation: str

    @property
    def n_layers(self) -> int:
        return len(self.weights)


@dataclass
class ForwardCache:
    """Per-layer tensors saved by mlp_forward for the backward pass."""

    single: bool          # input was a 1-D vector, not a batch
    inputs: list          # activation entering each layer, shape (B, fan_in)
    pre_activations: list # z = x W^T + b per layer, shape (B, fan_out)
    output: np.ndarray    # network output after the output activation


@dataclass
class Gradients:
    """d(loss)/d(parameter), same shapes as the MLPParams they refer to."""

    weights: list
    biases: list


def mlp_init(layer_sizes, output_activation, rng) -> MLPParams:
    """Create parameters with uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights
    and zero biases, drawn deterministically from `rng`.
    """
    sizes = tuple(int(s) for s in layer_sizes)
    if len(sizes) < 2:
        raise ConfigurationError(f"need at least 2 layer sizes, got {sizes!r}")
    if any(s < 1 for s in sizes):
        raise ConfigurationError(f"layer sizes must be positive, got {sizes!r}")
    if output_activation not in OUTPUT_ACTIVATIONS:
        raise ConfigurationError(
            f"output_activation must be one of {OUTPUT_ACTIVATIONS}, got {output_activation!r}"
        )
    weights = []
    biases = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        scale = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-scale, scale, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MLPParams(sizes, weights, biases, output_activation)


def mlp_forward(params: MLPParams, x) -> tuple[np.ndarray, ForwardCache]:
    """Run the network on a single input vector or a (batch, fan_in) matrix.

    Returns the output (matching the input's batch shape) and the cache
    needed by mlp_backward.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    h = x[None, :] if single else x
    if h.ndim != 2 or h.shape[1] != params.layer_sizes[0]:
        raise ShapeError(
            f"input has shape {x.shape}, expected trailing dimension {params.layer_sizes[0]}"
        )
    inputs = []
    pres = []
    last = params.n_layers - 1
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        inputs.append(h)
        z = h @ w.T + b
        pres.append(z)
        if k < last:
            h = np.maximum(z, 0.0)
        elif params.output_activation == "tanh":
            h = np.tanh(z)
        else:
            h = z
    cache = ForwardCache(single=single, inputs=inputs, pre_activations=pres, output=h)
    return (h[0] if single else h), cache


def mlp_backward(params: MLPParams, cache: ForwardCache, output_gradient):
    """Reverse-mode pass: given d(loss)/d(output), return (Gradients, d(loss)/d(input)).

    Batched caches sum parameter gradients over the batch rows, which is the
    chain rule for a loss that sums over the batch.
    """
    if len(cache.inputs) != params.n_layers:
        raise ShapeError(
            f"cache depth {len(cache.inputs)} does not match network depth {params.n_layers}"
        )
    g = np.asarray(output_gradient, dtype=np.float64)
    if cache.single:
        g = g[None, :] if g.ndim == 1 else g
    if g.shape != cache.output.shape:
        raise ShapeError(
            f"output_gradient has shape {np.shape(output_gradient)}, "
            f"expected {cache.output.shape if not cache.single else cache.output.shape[1:]}"
        )
    for k in range(params.n_layers):
        if cache.inputs[k].shape[1] != params.layer_sizes[k]:
            raise ShapeError("cache does not match these parameters")

    if params.output_activation == "tanh":
        g = g * (1.0 - cache.output**2)

    grad_w = [None] * params.n_layers
    grad_b = [None] * params.n_layers
    for k in range(params.n_layers - 1, -1, -1):
        grad_w[k] = g.T @ cache.inputs[k]
        grad_b[k] = g.sum(axis=0)
        g = g @ params.weights[k]
        if k > 0:
            g = g * (cache.pre_activations[k - 1] > 0.0)
    grad_input = g[0] if cache.single else g
    return Gradients(grad_w, grad_b), grad_input


@dataclass
class AdamState:
    """First/second moment accumulators plus the step counter and hyperparameters."""

    m_weights: list
    v_weights: list
    m_biases: list
    v_biases: list
    step: int
    learning_rate: float
    beta1: float
    beta2: float
    eps: float


def adam_init(params: MLPParams, learning_rate=3e-4, beta1=0.9, beta2=0.999, eps=1e-8) -> AdamState:
    """Fresh zeroed accumulators matching `params`."""
    return AdamState(
        m_weights=[np.zeros_like(w) for w in params.weights],
        v_weights=[np.zeros_like(w) for w in params.weights],
        m_biases=[np.zeros_like(b) for b in params.biases],
        v_biases=[np.zeros_like(b) for b in params.biases],
        step=0,
        learning_rate=learning_rate,
        beta1=beta1,
        beta2=beta2,
        eps=eps,
    )


def _adam_update(p, g, m, v, state, bc1, bc2):
    m_new = state.beta1 * m + (1.0 - state.beta1) * g
    v_new = state.beta2 * v + (1.0 - state.beta2) * g * g
    step = state.learning_rate * (m_new / bc1) / (np.sqrt(v_new / bc2) + state.eps)
    return p - step, m_new, v_new


def adam_step(params: MLPParams, grads: Gradients, state: AdamState):
    """One bias-corrected Adam update. Returns (new_params, new_state)."""
    if len(grads.weights) != params.n_layers:
        raise ShapeError("gradient depth does not match network depth")
    for gw, w in zip(grads.weights, params.weights):
        if gw.shape != w.shape:
            raise ShapeError(f"weight gradient shape {gw.shape} != parameter shape {w.shape}")
    for gb, b in zip(grads.biases, params.biases):
        if gb.shape != b.shape:
            raise ShapeError(f"bias gradient shape {gb.shape} != parameter shape {b.shape}")

    t = state.step + 1
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    new_w, new_b = [], []
    new_mw, new_vw, new_mb, new_vb = [], [], [], []
    for k in range(params.n_layers):
        w, mw, vw = _adam_update(
            params.weights[k], grads.weights[k],
            state.m_weights[k], state.v_weights[k], state, bc1, bc2,
        )
        b, mb, vb = _adam_update(
            params.biases[k], grads.biases[k],
            state.m_biases[k], state.v_biases[k], state, bc1, bc2,
        )
        new_w.append(w)
        new_b.append(b)
        new_mw.append(mw)
        new_vw.append(vw)
        new_mb.append(mb)
        new_vb.append(vb)
    new_params = MLPParams(params.layer_sizes, new_w, new_b, params.output_activation)
    new_state = AdamState(
        new_mw, new_vw, new_mb, new_vb, t,
        state.learning_rate, state.beta1, state.beta2, state.eps,
    )
    return new_params, new_state


def polyak_update(target: MLPParams, online: MLPParams, tau: float) -> MLPParams:
    """Blend target toward online: p_target' = tau * p_online + (1 - tau) * p_target."""
    if not 0.0 <= tau <= 1.0:
        raise ConfigurationError(f"tau must lie in [0, 1], got {tau}")
    if target.layer_sizes != online.layer_sizes or target.output_activation != online.output_activation:
        raise ConfigurationError("target and online architectures differ")
    weights = [tau * wo + (1.0 - tau) * wt for wt, wo in zip(target.weights, online.weights)]
    biases = [tau * bo + (1.0 - tau) * bt for bt, bo in zip(target.biases, online.biases)]
    return MLPParams(target.layer_sizes, weights, biases, target.output_activation)


def clone_params(params: MLPParams) -> MLPParams:
    """Independent copy (used to spawn target networks)."""
    return MLPParams(
        params.layer_sizes,
        [w.copy() for w in params.weights],
        [b.copy() for b in params.biases],
        params.output_activation,
    )
