"""Encoder and projection-head MLPs.

The encoder's final output is the embedding layer (h); the projection head's
final output is the projection layer (z). Both are plain MLPs with ReLU
between layers and a linear last layer.
"""

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor, _as_tensor
from .errors import ConfigError, ShapeError

DEFAULT_ENCODER_WIDTHS = (16, 64, 64, 32)
DEFAULT_PROJECTION_WIDTHS = (32, 32, 16)


@dataclass
class MLPParams:
    """Weights and biases of one MLP; ReLU between layers, linear output."""

    weights: list = field(default_factory=list)
    biases: list = field(default_factory=list)

    @property
    def widths(self):
        ws = [int(w.shape[0]) for w in self.weights]
        ws.append(int(self.weights[-1].shape[1]))
        return ws

    def tensors(self):
        return list(self.weights) + list(self.biases)

    def arrays(self):
        """Named parameter arrays, in a stable order."""
        out = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"w{i}"] = w.data
            out[f"b{i}"] = b.data
        return out


# Aliases used throughout: the encoder and the projection head share the
# same parameter structure.
EncoderParams = MLPParams
ProjectionParams = MLPParams


@dataclass
class EncodedBatch:
    """Paired augmented inputs with their embedding and projection outputs.

    Rows 2k-1 and 2k of every array are two views of the same source sample.
    """

    inputs: np.ndarray
    embeddings: Tensor
    projections: Tensor


def _init_mlp(rng, widths):
    if not widths or any(w <= 0 for w in widths):
        raise ConfigError(f"layer widths must be non-empty and positive: {widths}")
    params = MLPParams()
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        params.weights.append(
            Tensor(rng.uniform(-bound, bound, (fan_in, fan_out)), requires_grad=True)
        )
        params.biases.append(
            Tensor(rng.uniform(-bound, bound, fan_out), requires_grad=True)
        )
    return params


def init_params(seed, encoder_widths=DEFAULT_ENCODER_WIDTHS,
                projection_widths=DEFAULT_PROJECTION_WIDTHS):
    """Deterministically initialize encoder and projection parameters.

    Weights are uniform on [-1/sqrt(fan_in), 1/sqrt(fan_in)].
    """
    if len(encoder_widths) < 2 or len(projection_widths) < 2:
        raise ConfigError("encoder and projection need at least two widths")
    if encoder_widths[-1] != projection_widths[0]:
        raise ConfigError(
            f"projection input width {projection_widths[0]} must equal "
            f"embedding width {encoder_widths[-1]}"
        )
    if projection_widths[-1] > encoder_widths[-1]:
        raise ConfigError("projection output must not exceed embedding width")
    rng = np.random.default_rng(seed)
    return _init_mlp(rng, list(encoder_widths)), _init_mlp(rng, list(projection_widths))


def mlp_forward(params, x):
    """Run the MLP on a Tensor (or array) batch, tracked on the tape."""
    h = _as_tensor(x)
    if h.shape[1] != params.weights[0].shape[0]:
        raise ShapeError(
            f"input width {h.shape[1]} does not match "
            f"first layer fan-in {params.weights[0].shape[0]}"
        )
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w + b
        if i != last:
            h = h.relu()
    return h


def mlp_forward_np(params, x):
    """Untracked numpy forward pass (evaluation / clustering refits)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[1] != params.weights[0].data.shape[0]:
        raise ShapeError(
            f"input width {x.shape[1]} does not match "
            f"first layer fan-in {params.weights[0].data.shape[0]}"
        )
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        x = x @ w.data + b.data
        if i != last:
            x = np.maximum(x, 0.0)
    return x


def encode(params, batch):
    """Embedding-layer features h for a batch of inputs."""
    return mlp_forward(params, batch)


def project(params, embeddings):
    """Projection-layer features z from embeddings."""
    return mlp_forward(params, embeddings)


def encode_batch(encoder, projection, inputs):
    """Full forward pass producing a consistent EncodedBatch."""
    h = encode(encoder, inputs)
    z = project(projection, h)
    return EncodedBatch(inputs=np.asarray(inputs, dtype=np.float64),
                        embeddings=h, projections=z)
