"""Fully connected autoencoders in plain numpy.

Layers are affine maps with ReLU or identity activations.  Hidden layers
use ReLU; the final encoder and decoder layers are identity so embeddings
and reconstructions are unconstrained in sign.  The ReLU subgradient at
exactly 0 is taken to be 0.  Everything runs in float64.

The module also carries the Adam optimizer used for both training phases
and a central-finite-difference gradient checker that the test suite uses
as the independent oracle for every analytic gradient.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

RELU = "relu"
IDENTITY = "identity"
_ACTIVATIONS = (RELU, IDENTITY)

DEFAULT_HIDDEN_DIMS = (500, 500, 2000)


def _check_matrix(a, name, cols=None):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    if cols is not None and a.shape[1] != cols:
        raise ValueError(f"{name} has {a.shape[1]} columns, expected {cols}")
    if not np.isfinite(a).all():
        raise ValueError(f"{name} contains non-finite entries")
    return a


@dataclass
class DenseLayer:
    """Affine layer: activation(x @ weights + biases)."""

    weights: np.ndarray
    biases: np.ndarray
    activation: str = RELU

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.biases = np.asarray(self.biases, dtype=np.float64)
        if self.weights.ndim != 2:
            raise ValueError("weights must be 2-D (in_dim, out_dim)")
        if self.biases.shape != (self.weights.shape[1],):
            raise ValueError(
                f"biases shape {self.biases.shape} does not match "
                f"out_dim {self.weights.shape[1]}"
            )
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def in_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[1]


@dataclass
class AutoencoderModel:
    """Encoder/decoder stacks with matching interface dims."""

    encoder: list[DenseLayer]
    decoder: list[DenseLayer]
    input_dim: int
    embed_dim: int

    def __post_init__(self):
        for name, stack, d_in, d_out in (
            ("encoder", self.encoder, self.input_dim, self.embed_dim),
            ("decoder", self.decoder, self.embed_dim, self.input_dim),
        ):
            if not stack:
                raise ValueError(f"{name} has no layers")
            if stack[0].in_dim != d_in or stack[-1].out_dim != d_out:
                raise ValueError(f"{name} does not map {d_in} -> {d_out}")
            for prev, nxt in zip(stack, stack[1:]):
                if prev.out_dim != nxt.in_dim:
                    raise ValueError(f"{name} layer dims do not chain")


def glorot_init(shape, rng) -> np.ndarray:
    """Glorot-uniform weights in +/- sqrt(6 / (fan_in + fan_out)).

    `rng` may be a seed or a ``numpy.random.Generator``.
    """
    fan_in, fan_out = shape
    if fan_in <= 0 or fan_out <= 0:
        raise ValueError(f"dims must be positive, got {shape}")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def _make_stack(dims, rng) -> list[DenseLayer]:
    layers = []
    for i, (d_in, d_out) in enumerate(zip(dims, dims[1:])):
        act = IDENTITY if i == len(dims) - 2 else RELU
        layers.append(DenseLayer(glorot_init((d_in, d_out), rng), np.zeros(d_out), act))
    return layers


def build_autoencoder(
    input_dim: int,
    embed_dim: int = 10,
    hidden_dims=DEFAULT_HIDDEN_DIMS,
    seed: int = 0,
) -> AutoencoderModel:
    """Build a ReLU MLP autoencoder with a symmetric decoder.

    Default widths are input-500-500-2000-embed; biases start at zero.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    hidden = list(hidden_dims)
    encoder = _make_stack([input_dim] + hidden + [embed_dim], rng)
    decoder = _make_stack([embed_dim] + hidden[::-1] + [input_dim], rng)
    return AutoencoderModel(encoder, decoder, input_dim, embed_dim)


# ---------------------------------------------------------------------------
# forward / backward
# ---------------------------------------------------------------------------


def _forward_stack(layers, x):
    caches = []
    out = x
    for layer in layers:
        pre = out @ layer.weights + layer.biases
        caches.append((out, pre))
        out = np.maximum(pre, 0.0) if layer.activation == RELU else pre
    return out, caches


def _backward_stack(layers, caches, d_out):
    """Reverse-mode pass; returns per-layer (dW, db) and the input gradient."""
    grads = [None] * len(layers)
    grad = d_out
    for i in range(len(layers) - 1, -1, -1):
        layer = layers[i]
        x_in, pre = caches[i]
        d_pre = grad * (pre > 0.0) if layer.activation == RELU else grad
        grads[i] = (x_in.T @ d_pre, d_pre.sum(axis=0))
        grad = d_pre @ layer.weights.T
    return grads, grad


def encode(model: AutoencoderModel, batch) -> np.ndarray:
    """Embed a batch of rows; batch must have input_dim columns."""
    batch = _check_matrix(batch, "batch", cols=model.input_dim)
    return _forward_stack(model.encoder, batch)[0]


def decode(model: AutoencoderModel, z) -> np.ndarray:
    """Reconstruct a batch of embeddings; z must have embed_dim columns."""
    z = _check_matrix(z, "z", cols=model.embed_dim)
    return _forward_stack(model.decoder, z)[0]


@dataclass
class ForwardState:
    """Cached activations from a full encode+decode pass."""

    z: np.ndarray
    x_hat: np.ndarray
    enc_caches: list = field(repr=False, default_factory=list)
    dec_caches: list = field(repr=False, default_factory=list)


def forward_autoencoder(model: AutoencoderModel, batch) -> ForwardState:
    batch = _check_matrix(batch, "batch", cols=model.input_dim)
    z, enc_caches = _forward_stack(model.encoder, batch)
    x_hat, dec_caches = _forward_stack(model.decoder, z)
    return ForwardState(z, x_hat, enc_caches, dec_caches)


def reconstruction_loss(x, x_hat) -> float:
    """Sum over examples of the squared Euclidean reconstruction error."""
    x = _check_matrix(x, "x")
    x_hat = _check_matrix(x_hat, "x_hat")
    if x.shape != x_hat.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {x_hat.shape}")
    diff = x - x_hat
    return float(np.sum(diff * diff))


def mean_reconstruction_loss(x, x_hat) -> float:
    """Reconstruction loss normalized by batch size, for logging."""
    return reconstruction_loss(x, x_hat) / np.asarray(x).shape[0]


def backward_autoencoder(model, state: ForwardState, d_xhat, d_z_extra=None):
    """Backprop from output (and optionally embedding) gradients.

    Returns a flat gradient list aligned with `model_parameters`:
    encoder W0, b0, ..., decoder W0, b0, ...
    """
    dec_grads, d_z = _backward_stack(model.decoder, state.dec_caches, d_xhat)
    if d_z_extra is not None:
        d_z = d_z + d_z_extra
    enc_grads, _ = _backward_stack(model.encoder, state.enc_caches, d_z)
    flat = []
    for dw, db in enc_grads + dec_grads:
        flat.extend((dw, db))
    return flat


def backward_reconstruction(model: AutoencoderModel, batch):
    """Gradients of the summed reconstruction loss for every weight and bias."""
    state = forward_autoencoder(model, batch)
    d_xhat = 2.0 * (state.x_hat - np.asarray(batch, dtype=np.float64))
    return backward_autoencoder(model, state, d_xhat)


def model_parameters(model: AutoencoderModel) -> list[np.ndarray]:
    """Live views of all parameters, in the gradient order used above."""
    params = []
    for layer in model.encoder + model.decoder:
        params.extend((layer.weights, layer.biases))
    return params


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------


@dataclass
class AdamState:
    """Adam accumulators for a fixed parameter list."""

    step: int
    first_moment: list[np.ndarray]
    second_moment: list[np.ndarray]
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


def adam_init(params, learning_rate=0.001, beta1=0.9, beta2=0.999, epsilon=1e-8):
    return AdamState(
        step=0,
        first_moment=[np.zeros_like(p) for p in params],
        second_moment=[np.zeros_like(p) for p in params],
        learning_rate=learning_rate,
        beta1=beta1,
        beta2=beta2,
        epsilon=epsilon,
    )


def adam_step(state: AdamState, params, grads):
    """One bias-corrected Adam update, applied to params in place."""
    if len(params) != len(state.first_moment) or len(grads) != len(params):
        raise ValueError("params/grads do not match optimizer state")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1**state.step
    corr2 = 1.0 - b2**state.step
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        g = np.asarray(g, dtype=np.float64)
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {p.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.learning_rate * (m / corr1) / (np.sqrt(v / corr2) + state.epsilon)
    return params


# ---------------------------------------------------------------------------
# finite-difference gradient checking
# ---------------------------------------------------------------------------


def numerical_gradient(loss_fn, arrays, h=1e-6):
    """Central finite differences of `loss_fn()` w.r.t. each array entry.

    `loss_fn` must read the (live) arrays; each entry is perturbed in
    place by +/- h and restored.
    """
    grads = []
    for a in arrays:
        g = np.zeros_like(a)
        flat = a.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = loss_fn()
            flat[i] = orig - h
            down = loss_fn()
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * h)
        grads.append(g)
    return grads


def max_relative_error(analytic, numeric, floor=1e-3):
    """Worst-case elementwise relative error between two gradient lists.

    The denominator is floored so that entries whose true gradient is
    smaller than `floor` are compared absolutely: central differences at
    h=1e-6 carry ~1e-10 of roundoff, which would otherwise dominate.
    """
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.abs(a) + np.abs(n), floor)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst
