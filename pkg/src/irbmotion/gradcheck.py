"""Finite-difference verification of every backward rule and the full model.

Each primitive op gets a small random case whose tape gradients are compared
against central differences; the composed check runs the whole forecaster
(encoders, graph stack, global residual, loss) on a tiny configuration and
differentiates with respect to every parameter.
"""

from __future__ import annotations

import numpy as np

from .irb import BranchSpec, IrbConfig
from .model import ModelConfig, init_model, make_model_config, model_forward
from .tensor import (
    Tensor,
    add,
    add_col,
    add_row,
    check_gradients,
    concat,
    conv1d_valid,
    matmul,
    mul,
    reshape,
    scale,
    slice_1d,
    sqrt,
    sub,
    sum_all,
    tanh,
    transpose,
)
from .training import TrainConfig, mpjpe_loss

__all__ = [
    "GRADCHECK_TOLERANCE",
    "tiny_model_config",
    "check_primitive_ops",
    "check_composed_model",
    "run_suite",
]

GRADCHECK_TOLERANCE = 1e-4


def _rand(rng, *shape) -> Tensor:
    return Tensor(rng.uniform(-1.0, 1.0, shape))


def _weighted_sum(t, w, tape):
    # Random weighting so the scalar loss exercises every element of t.
    return sum_all(mul(t, w, tape), tape)


def check_primitive_ops(seed: int = 0) -> dict[str, float]:
    """Worst finite-difference relative error per primitive op."""
    rng = np.random.default_rng(seed)
    errors: dict[str, float] = {}

    w_conv = _rand(rng, 3, 6)
    errors["conv1d_valid"] = check_gradients(
        lambda leaves, tape: _weighted_sum(
            conv1d_valid(leaves[0], leaves[1], leaves[2], tape), w_conv, tape
        ),
        [_rand(rng, 9), _rand(rng, 3, 4), _rand(rng, 3)],
    )

    w_mm = _rand(rng, 4, 5)
    errors["matmul"] = check_gradients(
        lambda leaves, tape: _weighted_sum(
            matmul(leaves[0], leaves[1], tape), w_mm, tape
        ),
        [_rand(rng, 4, 3), _rand(rng, 3, 5)],
    )

    w_cat = _rand(rng, 9)
    errors["concat"] = check_gradients(
        lambda leaves, tape: _weighted_sum(concat(leaves, tape), w_cat, tape),
        [_rand(rng, 2), _rand(rng, 4), _rand(rng, 3)],
    )

    w_slice = _rand(rng, 4)
    errors["slice_1d"] = check_gradients(
        lambda leaves, tape: _weighted_sum(
            slice_1d(leaves[0], 2, 6, tape), w_slice, tape
        ),
        [_rand(rng, 8)],
    )

    w_resh = _rand(rng, 2, 6)
    errors["reshape"] = check_gradients(
        lambda leaves, tape: _weighted_sum(
            reshape(leaves[0], (2, 6), tape), w_resh, tape
        ),
        [_rand(rng, 3, 4)],
    )

    w_tr = _rand(rng, 4, 3)
    errors["transpose"] = check_gradients(
        lambda leaves, tape: _weighted_sum(transpose(leaves[0], tape), w_tr, tape),
        [_rand(rng, 3, 4)],
    )

    w_bin = _rand(rng, 3, 4)
    for name, op in (("add", add), ("sub", sub), ("mul", mul)):
        errors[name] = check_gradients(
            lambda leaves, tape, op=op: _weighted_sum(
                op(leaves[0], leaves[1], tape), w_bin, tape
            ),
            [_rand(rng, 3, 4), _rand(rng, 3, 4)],
        )

    errors["scale"] = check_gradients(
        lambda leaves, tape: _weighted_sum(
            scale(leaves[0], -1.7, tape), w_bin, tape
        ),
        [_rand(rng, 3, 4)],
    )

    errors["add_row"] = check_gradients(
        lambda leaves, tape: _weighted_sum(
            add_row(leaves[0], leaves[1], tape), w_bin, tape
        ),
        [_rand(rng, 3, 4), _rand(rng, 4)],
    )

    errors["add_col"] = check_gradients(
        lambda leaves, tape: _weighted_sum(
            add_col(leaves[0], leaves[1], tape), w_bin, tape
        ),
        [_rand(rng, 3, 4), _rand(rng, 3)],
    )

    errors["tanh"] = check_gradients(
        lambda leaves, tape: _weighted_sum(tanh(leaves[0], tape), w_bin, tape),
        [_rand(rng, 3, 4)],
    )

    # keep sqrt inputs away from zero, where its derivative is unbounded
    errors["sqrt"] = check_gradients(
        lambda leaves, tape: _weighted_sum(sqrt(leaves[0], tape), w_bin, tape),
        [Tensor(rng.uniform(0.5, 2.0, (3, 4)))],
    )

    errors["sum_all"] = check_gradients(
        lambda leaves, tape: scale(sum_all(leaves[0], tape), 0.5, tape),
        [_rand(rng, 3, 4)],
    )

    return errors


def tiny_model_config() -> ModelConfig:
    """Smallest faithful forecaster: 2 joints, 10 past and 2 future frames,
    2 graph layers, and a narrow encoder whose residual projection needs
    truncation (34 features from 4 size-1 filters over 10 frames)."""
    irb = IrbConfig(
        input_frames=10,
        branches=(BranchSpec(5, 2, 2), BranchSpec(10, 2, 3)),
        passthrough_len=10,
        residual_filters=4,
    )
    return make_model_config(joint_count=2, t_future=2, irb=irb, num_layers=2)


def tiny_train_config(**overrides) -> TrainConfig:
    defaults = dict(t_past=10, t_future=2, epochs=2, batch_size=4, seed=1)
    defaults.update(overrides)
    return TrainConfig(**defaults)


def check_composed_model(
    config: ModelConfig | None = None,
    seed: int = 0,
    max_elements: int | None = None,
) -> float:
    """Finite-difference check of the full forward + loss through every
    parameter.  ``max_elements`` caps how many parameter elements are
    perturbed (seeded subsample) for larger configurations."""
    if config is None:
        config = tiny_model_config()
    rng = np.random.default_rng(seed)
    past = rng.uniform(-1.0, 1.0, (config.t_past, config.joint_count, 3))
    future = rng.uniform(-1.0, 1.0, (config.t_future, config.joint_count, 3))
    params = init_model(config, rng)
    names = list(params.tensors)

    def build(leaves, tape):
        trial = params.replace(dict(zip(names, leaves)))
        pred = model_forward(past, trial, tape)
        return mpjpe_loss(pred, Tensor(future), tape)

    leaves = [params.tensors[name] for name in names]
    if max_elements is None:
        return check_gradients(build, leaves)

    # Spot-check: finite-difference a random subset of scalar parameter
    # elements (gathered into one probe vector) against the corresponding
    # components of the full tape gradient.
    from .tensor import Tape, backward, finite_diff_gradient, gradient_rel_error

    sizes = np.array([leaf.size for leaf in leaves])
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    picks = rng.choice(offsets[-1], size=min(max_elements, offsets[-1]), replace=False)
    picks.sort()
    base_flat = np.concatenate([leaf.data for leaf in leaves])

    def probe_build(leaves_, tape):
        flat = base_flat.copy()
        flat[picks] = leaves_[0].array
        tensors = {
            name: Tensor(flat[start : start + leaf.size].reshape(leaf.shape))
            for name, leaf, start in zip(names, leaves, offsets[:-1])
        }
        pred = model_forward(past, params.replace(tensors), tape)
        return mpjpe_loss(pred, Tensor(future), tape)

    tape = Tape()
    loss = build(leaves, tape)
    store = backward(loss, tape, leaves)
    ad_flat = np.concatenate([store.get(leaf).data for leaf in leaves])[picks]
    probe = Tensor(base_flat[picks])
    fd = finite_diff_gradient(lambda vals: probe_build(vals, None).item(), [probe])
    return gradient_rel_error(Tensor(ad_flat), fd.get(probe))


def run_suite(scale: str = "tiny", seed: int = 0) -> dict[str, float]:
    """Primitive checks plus the composed-model check; returns op -> error."""
    errors = check_primitive_ops(seed)
    errors["composed_model"] = check_composed_model(seed=seed)
    if scale == "default":
        # Spot-check the stock 360-feature encoder composed with a shallow
        # stack; a seeded sample of parameter elements keeps the runtime flat.
        stock = make_model_config(joint_count=2, t_future=2, num_layers=2)
        errors["composed_model_stock_encoder"] = check_composed_model(
            config=stock, seed=seed, max_elements=200
        )
    elif scale != "tiny":
        raise ValueError(f"unknown scale {scale!r}, want 'tiny' or 'default'")
    return errors
