"""Graph convolution stack with a learnable adjacency per layer.

Every layer computes activation(adjacency @ H @ weight + bias) on the node
feature matrix H; both the adjacency and the weight are trained, with no
symmetry or normalization constraint.  Hidden layers use tanh, the last
layer is linear, and the stack output is closed by adding the last observed
value of each node to every predicted frame, so an all-zero network predicts
a frozen pose.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError
from .tensor import Tape, Tensor, add_col, add_row, matmul, tanh

__all__ = ["GcnLayerParams", "GcnConfig", "gc_layer", "gcn_forward", "init_gcn"]


@dataclass
class GcnLayerParams:
    """Learnable values of one layer: adjacency (N, N), weight (F_in, F_out),
    bias (F_out,)."""

    adjacency: Tensor
    weight: Tensor
    bias: Tensor


@dataclass(frozen=True)
class GcnConfig:
    """Stack layout.

    The hidden width equals the encoder embedding width; the first layer
    consumes that width and the last layer maps onto ``output_features``
    predicted frames per node.
    """

    node_count: int
    hidden_features: int = 360
    output_features: int = 10
    num_layers: int = 12

    def __post_init__(self):
        if min(self.node_count, self.hidden_features, self.output_features) < 1:
            raise ConfigError(f"all extents must be positive: {self}")
        if self.num_layers < 1:
            raise ConfigError(f"need at least one layer, got {self.num_layers}")

    def layer_dims(self) -> list[tuple[int, int]]:
        dims = [(self.hidden_features, self.hidden_features)] * (self.num_layers - 1)
        dims.append((self.hidden_features, self.output_features))
        return dims


def gc_layer(
    hidden: Tensor,
    layer: GcnLayerParams,
    activation: str = "tanh",
    tape: Tape | None = None,
) -> Tensor:
    """One propagation step: activation(adjacency @ hidden @ weight + bias)."""
    if activation not in ("tanh", "none"):
        raise ConfigError(f"activation must be 'tanh' or 'none', got {activation!r}")
    mixed = matmul(layer.adjacency, hidden, tape)
    projected = matmul(mixed, layer.weight, tape)
    out = add_row(projected, layer.bias, tape)
    if activation == "tanh":
        out = tanh(out, tape)
    return out


def gcn_forward(
    embeddings: Tensor,
    last_pose: Tensor,
    config: GcnConfig,
    params: list[GcnLayerParams],
    tape: Tape | None = None,
) -> Tensor:
    """Run the stack and add the last observed pose to every output frame.

    ``embeddings`` is (node_count, hidden_features), one encoder embedding
    per joint-coordinate node; ``last_pose`` is (node_count,), the most
    recent observed value per node.  Output is (node_count, output_features)
    with out[n][t] = stack(embeddings)[n][t] + last_pose[n].
    """
    if embeddings.ndim != 2 or embeddings.shape[0] != config.node_count:
        raise ShapeError(
            f"embeddings shape {embeddings.shape} does not match "
            f"{config.node_count} nodes"
        )
    if last_pose.shape != (config.node_count,):
        raise ShapeError(
            f"last pose shape {last_pose.shape} does not match "
            f"{config.node_count} nodes"
        )
    if len(params) != config.num_layers:
        raise ConfigError(
            f"got {len(params)} layer params for {config.num_layers} layers"
        )
    hidden = embeddings
    last = config.num_layers - 1
    for p, layer in enumerate(params):
        hidden = gc_layer(hidden, layer, "none" if p == last else "tanh", tape)
    return add_col(hidden, last_pose, tape)


def init_gcn(config: GcnConfig, seed) -> list[GcnLayerParams]:
    """Adjacency uniform in [-0.05, 0.05], weights scaled-uniform by fan-in,
    zero biases.  Deterministic for a given seed or generator."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    layers = []
    for fan_in, fan_out in config.layer_dims():
        bound = 1.0 / math.sqrt(fan_in)
        layers.append(
            GcnLayerParams(
                adjacency=Tensor(
                    rng.uniform(-0.05, 0.05, (config.node_count, config.node_count))
                ),
                weight=Tensor(rng.uniform(-bound, bound, (fan_in, fan_out))),
                bias=Tensor.zeros(fan_out),
            )
        )
    return layers
