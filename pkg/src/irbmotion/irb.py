"""Inception-style temporal encoder with a kernel-size-1 residual projection.

One encoder block turns a single joint-coordinate trajectory of length
``input_frames`` into a fixed-length embedding: parallel valid 1-D
convolutions over the most recent 5 and 10 frames, their flattened outputs
concatenated together with a raw passthrough of the last 10 frames, plus a
residual path that projects the whole trajectory through kernel-size-1
filters onto the same length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ShapeError
from .tensor import Tape, Tensor, add, concat, conv1d_valid, reshape, slice_1d

__all__ = [
    "BranchSpec",
    "IrbConfig",
    "IrbParams",
    "default_config",
    "sweep_configs",
    "init_irb",
    "irb_forward",
    "SWEEP_FEATURE_TOTALS",
]

# Default inception branch layout: (input_len, num_kernels, kernel_size).
# Feature counts 68 + 48 + 112 + 78 + 44 plus the 10-frame passthrough = 360.
DEFAULT_BRANCHES = ((5, 17, 2), (5, 16, 3), (10, 14, 3), (10, 13, 5), (10, 11, 7))

DEFAULT_PASSTHROUGH = 10

# Embedding widths covered by the stock parametric sweep.
SWEEP_FEATURE_TOTALS = (223, 300, 360, 420, 460)


@dataclass(frozen=True)
class BranchSpec:
    """One convolution branch: how many frames it reads and with what filters."""

    input_len: int
    num_kernels: int
    kernel_size: int

    def __post_init__(self):
        if self.input_len < 1 or self.num_kernels < 1 or self.kernel_size < 1:
            raise ConfigError(f"branch fields must be positive: {self}")
        if self.kernel_size > self.input_len:
            raise ConfigError(
                f"kernel size {self.kernel_size} exceeds branch input length "
                f"{self.input_len}"
            )

    @property
    def out_len(self) -> int:
        return self.input_len - self.kernel_size + 1

    @property
    def out_features(self) -> int:
        return self.num_kernels * self.out_len


@dataclass(frozen=True)
class IrbConfig:
    """Full block layout: branches, passthrough, and residual projection.

    ``residual_filters`` must equal ceil(total_features / input_frames); the
    flattened projection output is truncated to ``total_features`` when the
    total is not divisible by the trajectory length.
    """

    input_frames: int
    branches: tuple[BranchSpec, ...] = field(default=())
    passthrough_len: int = DEFAULT_PASSTHROUGH
    residual_filters: int = 0

    def __post_init__(self):
        if self.input_frames < 1:
            raise ConfigError(f"input_frames must be positive, got {self.input_frames}")
        if not self.branches:
            raise ConfigError("at least one convolution branch is required")
        object.__setattr__(self, "branches", tuple(self.branches))
        for i, branch in enumerate(self.branches):
            if branch.input_len > self.input_frames:
                raise ConfigError(
                    f"branch {i} reads {branch.input_len} frames but the "
                    f"trajectory has only {self.input_frames}"
                )
        if not 0 <= self.passthrough_len <= self.input_frames:
            raise ConfigError(
                f"passthrough length {self.passthrough_len} out of range for "
                f"{self.input_frames} frames"
            )
        needed = math.ceil(self.total_features / self.input_frames)
        if self.residual_filters != needed:
            raise ConfigError(
                f"residual_filters must be {needed} to cover {self.total_features} "
                f"features from {self.input_frames} frames, got {self.residual_filters}"
            )

    @property
    def total_features(self) -> int:
        return sum(b.out_features for b in self.branches) + self.passthrough_len


def _make_config(branches, passthrough_len, input_frames) -> IrbConfig:
    specs = tuple(BranchSpec(*b) for b in branches)
    total = sum(s.out_features for s in specs) + passthrough_len
    return IrbConfig(
        input_frames=input_frames,
        branches=specs,
        passthrough_len=passthrough_len,
        residual_filters=math.ceil(total / input_frames),
    )


def default_config(input_frames: int = 10) -> IrbConfig:
    """The stock 360-feature block (5 branches plus a 10-frame passthrough)."""
    if input_frames < 10:
        raise ConfigError(
            f"default branches read up to 10 frames; got input_frames={input_frames}"
        )
    return _make_config(DEFAULT_BRANCHES, DEFAULT_PASSTHROUGH, input_frames)


def _solve_kernel_counts(target: int) -> tuple[int, ...]:
    """Kernel counts hitting an exact branch-feature total.

    Branch output lengths are fixed by the default kernel sizes, so the
    branch features are 4a + 3b + 8c + 6d + 4e.  Start from the default
    counts scaled proportionally and search small adjustments for an exact
    hit, preferring the smallest total adjustment (deterministic tie-break).
    """
    weights = [s.out_len for s in (BranchSpec(*b) for b in DEFAULT_BRANCHES)]
    defaults = [b[1] for b in DEFAULT_BRANCHES]
    default_sum = sum(w * n for w, n in zip(weights, defaults))
    base = [max(1, round(n * target / default_sum)) for n in defaults]
    shortfall = target - sum(w * n for w, n in zip(weights, base))

    best = None
    span = range(-4, 5)
    for d0 in span:
        for d1 in span:
            for d2 in span:
                for d3 in span:
                    rest = shortfall - (
                        weights[0] * d0 + weights[1] * d1
                        + weights[2] * d2 + weights[3] * d3
                    )
                    if rest % weights[4] != 0:
                        continue
                    d4 = rest // weights[4]
                    if abs(d4) > 8:
                        continue
                    counts = (
                        base[0] + d0, base[1] + d1, base[2] + d2,
                        base[3] + d3, base[4] + d4,
                    )
                    if min(counts) < 1:
                        continue
                    cost = (abs(d0) + abs(d1) + abs(d2) + abs(d3) + abs(d4), counts)
                    if best is None or cost < best:
                        best = cost
    if best is None:
        raise ConfigError(f"no kernel-count assignment reaches {target} features")
    return best[1]


def sweep_configs(input_frames: int = 10) -> list[IrbConfig]:
    """Block presets for the feature-count sweep (223/300/360/420/460).

    Kernel sizes, branch input lengths, and the passthrough stay fixed; only
    the kernel counts vary.  Presets are computed, then validated against the
    declared totals by construction.
    """
    configs = []
    for total in SWEEP_FEATURE_TOTALS:
        if total == 360:
            cfg = default_config(input_frames)
        else:
            counts = _solve_kernel_counts(total - DEFAULT_PASSTHROUGH)
            branches = [
                (b[0], n, b[2]) for b, n in zip(DEFAULT_BRANCHES, counts)
            ]
            cfg = _make_config(branches, DEFAULT_PASSTHROUGH, input_frames)
        if cfg.total_features != total:
            raise ConfigError(
                f"sweep preset realizes {cfg.total_features} features, wanted {total}"
            )
        configs.append(cfg)
    return configs


@dataclass
class IrbParams:
    """Learnable values of one encoder block."""

    branch_kernels: list[Tensor]
    branch_bias: list[Tensor]
    residual_kernels: Tensor
    residual_bias: Tensor


def init_irb(config: IrbConfig, rng: np.random.Generator) -> IrbParams:
    """Scaled-uniform kernels (bound 1/sqrt(kernel_size)) and zero biases."""
    kernels, biases = [], []
    for branch in config.branches:
        bound = 1.0 / math.sqrt(branch.kernel_size)
        kernels.append(
            Tensor(rng.uniform(-bound, bound, (branch.num_kernels, branch.kernel_size)))
        )
        biases.append(Tensor.zeros(branch.num_kernels))
    residual = Tensor(rng.uniform(-1.0, 1.0, (config.residual_filters, 1)))
    return IrbParams(
        branch_kernels=kernels,
        branch_bias=biases,
        residual_kernels=residual,
        residual_bias=Tensor.zeros(config.residual_filters),
    )


def zeros_irb(config: IrbConfig) -> IrbParams:
    return IrbParams(
        branch_kernels=[
            Tensor.zeros((b.num_kernels, b.kernel_size)) for b in config.branches
        ],
        branch_bias=[Tensor.zeros(b.num_kernels) for b in config.branches],
        residual_kernels=Tensor.zeros((config.residual_filters, 1)),
        residual_bias=Tensor.zeros(config.residual_filters),
    )


def _check_params(config: IrbConfig, params: IrbParams):
    if len(params.branch_kernels) != len(config.branches):
        raise ConfigError(
            f"params carry {len(params.branch_kernels)} branches, "
            f"config has {len(config.branches)}"
        )
    for i, branch in enumerate(config.branches):
        want = (branch.num_kernels, branch.kernel_size)
        if params.branch_kernels[i].shape != want:
            raise ConfigError(
                f"branch {i}: kernel shape {params.branch_kernels[i].shape} "
                f"does not match spec {want}"
            )
        if params.branch_bias[i].shape != (branch.num_kernels,):
            raise ConfigError(
                f"branch {i}: bias shape {params.branch_bias[i].shape} "
                f"does not match {branch.num_kernels} kernels"
            )
    if params.residual_kernels.shape != (config.residual_filters, 1):
        raise ConfigError(
            f"residual kernel shape {params.residual_kernels.shape} does not "
            f"match {config.residual_filters} size-1 filters"
        )


def irb_forward(
    traj: Tensor, config: IrbConfig, params: IrbParams, tape: Tape | None = None
) -> Tensor:
    """Encode one coordinate trajectory into a ``total_features`` embedding.

    Each branch reads the most recent ``input_len`` frames.  Branch outputs
    are flattened filter-major (all positions of filter 0, then filter 1, ...)
    and concatenated in branch order, followed by the raw passthrough frames.
    The residual projection of the whole trajectory is added on top.
    """
    if traj.ndim != 1 or traj.shape[0] != config.input_frames:
        raise ShapeError(
            f"trajectory shape {traj.shape} does not match "
            f"({config.input_frames},)"
        )
    _check_params(config, params)
    frames = config.input_frames

    parts = []
    for i, branch in enumerate(config.branches):
        window = slice_1d(traj, frames - branch.input_len, frames, tape)
        try:
            conv = conv1d_valid(
                window, params.branch_kernels[i], params.branch_bias[i], tape
            )
        except ShapeError as exc:
            raise ConfigError(f"branch {i}: {exc}") from exc
        parts.append(reshape(conv, (branch.out_features,), tape))
    if config.passthrough_len > 0:
        parts.append(slice_1d(traj, frames - config.passthrough_len, frames, tape))
    trunk = concat(parts, tape)

    residual = conv1d_valid(traj, params.residual_kernels, params.residual_bias, tape)
    residual = reshape(residual, (config.residual_filters * frames,), tape)
    if residual.shape[0] > config.total_features:
        residual = slice_1d(residual, 0, config.total_features, tape)
    return add(trunk, residual, tape)
