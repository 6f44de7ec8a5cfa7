"""The end-to-end forecaster and its parameter/checkpoint plumbing.

A pose window of shape (t_past, K, 3) is split into K*3 joint-coordinate
trajectories, each encoded by its own inception residual block.  The stacked
embeddings form the node features of the graph stack, whose output (plus the
last observed pose) is rearranged back into (t_future, K, 3).

Parameters live in a flat insertion-ordered name -> Tensor map so the
optimizer, the gradient checks, and the checkpoint format all see one
canonical ordering.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import CheckpointError, ConfigError, ShapeError
from .gcn import GcnConfig, GcnLayerParams, gcn_forward
from .irb import BranchSpec, IrbConfig, IrbParams, default_config, irb_forward
from .tensor import Tape, Tensor, concat, reshape, transpose

__all__ = [
    "ModelConfig",
    "ModelParams",
    "init_model",
    "zeros_model",
    "model_forward",
    "save_checkpoint",
    "load_checkpoint",
    "save_model",
    "load_model",
]

CHECKPOINT_MAGIC = "irbmotion-params v1"


@dataclass(frozen=True)
class ModelConfig:
    """Architecture description: one encoder block per joint coordinate and
    the graph stack consuming their embeddings."""

    joint_count: int
    irb: IrbConfig
    gcn: GcnConfig

    def __post_init__(self):
        if self.joint_count < 1:
            raise ConfigError(f"joint_count must be positive, got {self.joint_count}")
        if self.gcn.node_count != 3 * self.joint_count:
            raise ConfigError(
                f"graph has {self.gcn.node_count} nodes but {self.joint_count} "
                f"joints need {3 * self.joint_count}"
            )
        if self.gcn.hidden_features != self.irb.total_features:
            raise ConfigError(
                f"graph hidden width {self.gcn.hidden_features} does not match "
                f"encoder embedding width {self.irb.total_features}"
            )

    @property
    def node_count(self) -> int:
        return self.gcn.node_count

    @property
    def t_past(self) -> int:
        return self.irb.input_frames

    @property
    def t_future(self) -> int:
        return self.gcn.output_features


def make_model_config(
    joint_count: int,
    t_future: int = 10,
    irb: IrbConfig | None = None,
    num_layers: int = 12,
) -> ModelConfig:
    irb = default_config() if irb is None else irb
    gcn = GcnConfig(
        node_count=3 * joint_count,
        hidden_features=irb.total_features,
        output_features=t_future,
        num_layers=num_layers,
    )
    return ModelConfig(joint_count=joint_count, irb=irb, gcn=gcn)


class ModelParams:
    """All learnable tensors in a fixed, named order."""

    def __init__(self, config: ModelConfig, tensors: dict[str, Tensor]):
        expected = list(_shape_schema(config))
        if list(tensors) != [name for name, _ in expected]:
            raise ConfigError("parameter names do not match the model schema")
        for name, shape in expected:
            if tensors[name].shape != shape:
                raise ConfigError(
                    f"parameter {name} has shape {tensors[name].shape}, "
                    f"schema wants {shape}"
                )
        self.config = config
        self.tensors = tensors

    def replace(self, tensors: dict[str, Tensor]) -> "ModelParams":
        return ModelParams(self.config, tensors)

    def irb_params(self, node: int) -> IrbParams:
        t = self.tensors
        prefix = f"irb{node:03d}"
        return IrbParams(
            branch_kernels=[
                t[f"{prefix}.branch{i}.kernels"]
                for i in range(len(self.config.irb.branches))
            ],
            branch_bias=[
                t[f"{prefix}.branch{i}.bias"]
                for i in range(len(self.config.irb.branches))
            ],
            residual_kernels=t[f"{prefix}.residual.kernels"],
            residual_bias=t[f"{prefix}.residual.bias"],
        )

    def gcn_params(self) -> list[GcnLayerParams]:
        t = self.tensors
        return [
            GcnLayerParams(
                adjacency=t[f"gcn{p:02d}.adjacency"],
                weight=t[f"gcn{p:02d}.weight"],
                bias=t[f"gcn{p:02d}.bias"],
            )
            for p in range(self.config.gcn.num_layers)
        ]


def _shape_schema(config: ModelConfig):
    """Yield (name, shape) for every parameter, in canonical order."""
    for node in range(config.node_count):
        prefix = f"irb{node:03d}"
        for i, branch in enumerate(config.irb.branches):
            yield f"{prefix}.branch{i}.kernels", (branch.num_kernels, branch.kernel_size)
            yield f"{prefix}.branch{i}.bias", (branch.num_kernels,)
        yield f"{prefix}.residual.kernels", (config.irb.residual_filters, 1)
        yield f"{prefix}.residual.bias", (config.irb.residual_filters,)
    for p, (fan_in, fan_out) in enumerate(config.gcn.layer_dims()):
        yield f"gcn{p:02d}.adjacency", (config.node_count, config.node_count)
        yield f"gcn{p:02d}.weight", (fan_in, fan_out)
        yield f"gcn{p:02d}.bias", (fan_out,)


def init_model(config: ModelConfig, seed) -> ModelParams:
    """Seeded scaled-uniform init for every block, biases zero."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    tensors: dict[str, Tensor] = {}
    for name, shape in _shape_schema(config):
        if name.endswith(".bias"):
            tensors[name] = Tensor.zeros(shape)
        elif name.endswith(".adjacency"):
            tensors[name] = Tensor(rng.uniform(-0.05, 0.05, shape))
        else:
            # kernels and weights: uniform with bound 1/sqrt(fan_in)
            fan_in = shape[1] if name.endswith(".kernels") else shape[0]
            bound = 1.0 / math.sqrt(fan_in)
            tensors[name] = Tensor(rng.uniform(-bound, bound, shape))
    return ModelParams(config, tensors)


def zeros_model(config: ModelConfig) -> ModelParams:
    tensors = {name: Tensor.zeros(shape) for name, shape in _shape_schema(config)}
    return ModelParams(config, tensors)


def model_forward(
    past: np.ndarray | Tensor,
    params: ModelParams,
    tape: Tape | None = None,
) -> Tensor:
    """Predict (t_future, K, 3) positions from a (t_past, K, 3) window."""
    config = params.config
    frames = past.array if isinstance(past, Tensor) else np.asarray(past, dtype=np.float64)
    if frames.shape != (config.t_past, config.joint_count, 3):
        raise ShapeError(
            f"past window shape {frames.shape} does not match "
            f"({config.t_past}, {config.joint_count}, 3)"
        )

    # Node n = joint * 3 + coordinate, matching the row-major last-pose layout.
    flat = frames.reshape(config.t_past, config.node_count)
    embeddings = []
    for node in range(config.node_count):
        traj = Tensor(flat[:, node])
        embeddings.append(irb_forward(traj, config.irb, params.irb_params(node), tape))
    stacked = reshape(
        concat(embeddings, tape),
        (config.node_count, config.irb.total_features),
        tape,
    )
    last_pose = Tensor(flat[-1])
    out_nodes = gcn_forward(stacked, last_pose, config.gcn, params.gcn_params(), tape)
    return reshape(
        transpose(out_nodes, tape),
        (config.t_future, config.joint_count, 3),
        tape,
    )


# ---------------------------------------------------------------------------
# checkpoint format: plain-text header of name/shape pairs, then the tensor
# values as little-endian float64, concatenated in header order.


def save_checkpoint(path, params: ModelParams):
    with open(path, "wb") as fh:
        lines = [CHECKPOINT_MAGIC, f"tensors {len(params.tensors)}"]
        for name, tensor in params.tensors.items():
            lines.append(name + " " + " ".join(str(e) for e in tensor.shape))
        lines.append("data")
        fh.write(("\n".join(lines) + "\n").encode("ascii"))
        for tensor in params.tensors.values():
            fh.write(tensor.array.astype("<f8").tobytes())


def load_checkpoint(path, config: ModelConfig) -> ModelParams:
    with open(path, "rb") as fh:
        header = []
        while True:
            line = fh.readline()
            if not line:
                raise CheckpointError(f"{path}: truncated header")
            text = line.decode("ascii").rstrip("\n")
            if text == "data":
                break
            header.append(text)
        if not header or header[0] != CHECKPOINT_MAGIC:
            raise CheckpointError(f"{path}: not a parameter checkpoint")
        try:
            count = int(header[1].split()[1])
        except (IndexError, ValueError) as exc:
            raise CheckpointError(f"{path}: malformed tensor count") from exc
        if count != len(header) - 2:
            raise CheckpointError(
                f"{path}: header announces {count} tensors, lists {len(header) - 2}"
            )
        tensors: dict[str, Tensor] = {}
        for entry in header[2:]:
            fields = entry.split()
            name, shape = fields[0], tuple(int(e) for e in fields[1:])
            size = int(np.prod(shape))
            raw = fh.read(size * 8)
            if len(raw) != size * 8:
                raise CheckpointError(f"{path}: truncated data for {name}")
            tensors[name] = Tensor(np.frombuffer(raw, dtype="<f8").reshape(shape))
        if fh.read(1):
            raise CheckpointError(f"{path}: trailing bytes after tensor data")
    try:
        return ModelParams(config, tensors)
    except ConfigError as exc:
        raise CheckpointError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# architecture sidecar: the checkpoint stores tensors only, so the layout
# travels in a small JSON file next to it.


def config_to_dict(config: ModelConfig) -> dict:
    return {
        "joint_count": config.joint_count,
        "irb": {
            "input_frames": config.irb.input_frames,
            "branches": [
                [b.input_len, b.num_kernels, b.kernel_size]
                for b in config.irb.branches
            ],
            "passthrough_len": config.irb.passthrough_len,
            "residual_filters": config.irb.residual_filters,
        },
        "gcn": {
            "node_count": config.gcn.node_count,
            "hidden_features": config.gcn.hidden_features,
            "output_features": config.gcn.output_features,
            "num_layers": config.gcn.num_layers,
        },
    }


def config_from_dict(payload: dict) -> ModelConfig:
    try:
        irb = IrbConfig(
            input_frames=payload["irb"]["input_frames"],
            branches=tuple(BranchSpec(*b) for b in payload["irb"]["branches"]),
            passthrough_len=payload["irb"]["passthrough_len"],
            residual_filters=payload["irb"]["residual_filters"],
        )
        gcn = GcnConfig(**payload["gcn"])
        return ModelConfig(joint_count=payload["joint_count"], irb=irb, gcn=gcn)
    except (KeyError, TypeError) as exc:
        raise CheckpointError(f"malformed model config: {exc}") from exc


def _sidecar(path) -> str:
    return str(path) + ".json"


def save_model(path, params: ModelParams):
    """Write the checkpoint plus its architecture sidecar (<path>.json)."""
    save_checkpoint(path, params)
    with open(_sidecar(path), "w", encoding="utf-8") as fh:
        json.dump(config_to_dict(params.config), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path) -> ModelParams:
    try:
        with open(_sidecar(path), "r", encoding="utf-8") as fh:
            config = config_from_dict(json.load(fh))
    except FileNotFoundError as exc:
        raise CheckpointError(
            f"missing architecture sidecar {_sidecar(path)}"
        ) from exc
    return load_checkpoint(path, config)
