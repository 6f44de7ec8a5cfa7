"""End-to-end optimization: position-error loss, Adam, evaluation, sweep.

The loss and the reported metric are both mean per joint position error
(MPJPE): the Euclidean distance between predicted and true joint positions,
averaged over frames and joints, in millimeters.  Gradients flow through the
graph stack and every encoder block jointly.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .data import SamplePair
from .errors import ConfigError, ShapeError, TrainingDiverged
from .model import ModelConfig, ModelParams, init_model, model_forward
from .tensor import (
    GradientStore,
    Tape,
    Tensor,
    add,
    backward,
    matmul,
    mul,
    reshape,
    scale,
    sqrt,
    sub,
    sum_all,
)

__all__ = [
    "TrainConfig",
    "AdamState",
    "TrainHistory",
    "EpochStats",
    "mpjpe",
    "mpjpe_loss",
    "lr_schedule",
    "adam_step",
    "train",
    "evaluate",
    "zero_velocity_predictions",
    "horizon_frame_index",
    "sweep",
    "SweepRow",
]


@dataclass(frozen=True)
class TrainConfig:
    """Optimization settings; the defaults are the stock recipe."""

    learning_rate: float = 0.0005
    decay_factor: float = 0.96
    decay_every: int = 2
    batch_size: int = 16
    epochs: int = 50
    t_past: int = 10
    t_future: int = 10
    seed: int = 0
    # Average the loss over the observed window as well; those frames
    # contribute zero error (the model emits only future frames), so this
    # only rescales the loss by t_future / (t_past + t_future).
    loss_on_observed: bool = False
    # Use squared distances instead of distances in the loss and metric.
    squared_error: bool = False

    def __post_init__(self):
        if min(self.learning_rate, self.decay_factor) <= 0 or self.decay_factor > 1:
            raise ConfigError(
                f"learning_rate must be positive and decay_factor in (0, 1]: {self}"
            )
        if min(self.decay_every, self.batch_size, self.epochs, self.t_past, self.t_future) < 1:
            raise ConfigError(f"all counts must be positive: {self}")


def lr_schedule(epoch: int, config: TrainConfig) -> float:
    """Stepwise-decayed learning rate for a 0-based epoch index."""
    if epoch < 0:
        raise ConfigError(f"epoch must be >= 0, got {epoch}")
    return config.learning_rate * config.decay_factor ** (epoch // config.decay_every)


# ---------------------------------------------------------------------------
# loss / metric


def _check_pair_shapes(pred_shape, gt_shape):
    if pred_shape != gt_shape:
        raise ShapeError(f"prediction {pred_shape} and truth {gt_shape} differ")
    if len(pred_shape) != 3 or pred_shape[2] != 3:
        raise ShapeError(f"expected (frames, joints, 3) tensors, got {pred_shape}")


def mpjpe(pred, gt, squared: bool = False) -> float:
    """Mean per joint position error in millimeters.

    Mean over frames and joints of the Euclidean distance between predicted
    and true joint positions; ``squared`` averages squared distances instead.
    """
    pred = pred.array if isinstance(pred, Tensor) else np.asarray(pred, dtype=np.float64)
    gt = gt.array if isinstance(gt, Tensor) else np.asarray(gt, dtype=np.float64)
    _check_pair_shapes(pred.shape, gt.shape)
    sq = ((pred - gt) ** 2).sum(axis=2)
    return float(np.mean(sq if squared else np.sqrt(sq)))


def mpjpe_loss(
    pred: Tensor, gt: Tensor, tape: Tape | None, squared: bool = False
) -> Tensor:
    """Differentiable MPJPE built from taped primitives; 1-element output."""
    _check_pair_shapes(pred.shape, gt.shape)
    frames, joints, _ = pred.shape
    diff = reshape(sub(pred, gt, tape), (frames * joints, 3), tape)
    sq_dist = matmul(mul(diff, diff, tape), Tensor.ones((3, 1)), tape)
    per_joint = sq_dist if squared else sqrt(sq_dist, tape)
    return scale(sum_all(per_joint, tape), 1.0 / (frames * joints), tape)


# ---------------------------------------------------------------------------
# Adam


@dataclass
class AdamState:
    """First/second moment accumulators, aligned with the parameter names."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @staticmethod
    def for_params(params: dict[str, Tensor]) -> "AdamState":
        return AdamState(
            m={name: np.zeros(t.shape) for name, t in params.items()},
            v={name: np.zeros(t.shape) for name, t in params.items()},
        )


def adam_step(
    params: dict[str, Tensor],
    grads: GradientStore | dict[str, Tensor],
    state: AdamState,
    lr: float,
) -> tuple[dict[str, Tensor], AdamState]:
    """One bias-corrected Adam update; returns new params, mutated state."""
    if isinstance(grads, dict) and set(grads) != set(params):
        raise ConfigError("gradient names do not match parameter names")
    state.step += 1
    correct1 = 1.0 - state.beta1 ** state.step
    correct2 = 1.0 - state.beta2 ** state.step
    out: dict[str, Tensor] = {}
    for name, tensor in params.items():
        g = grads[name].array if isinstance(grads, dict) else grads.get(tensor).array
        m = state.m[name] = state.beta1 * state.m[name] + (1.0 - state.beta1) * g
        v = state.v[name] = state.beta2 * state.v[name] + (1.0 - state.beta2) * g * g
        update = (m / correct1) / (np.sqrt(v / correct2) + state.eps)
        out[name] = Tensor(tensor.array - lr * update)
    return out, state


# ---------------------------------------------------------------------------
# training loop


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float
    learning_rate: float
    seconds: float


@dataclass
class TrainHistory:
    epochs: list[EpochStats] = field(default_factory=list)

    def last(self, n: int) -> list[EpochStats]:
        return self.epochs[-n:]


def _dataset_mpjpe(params: ModelParams, samples: list[SamplePair], squared: bool) -> float:
    total = 0.0
    for sample in samples:
        pred = model_forward(sample.past, params)
        total += mpjpe(pred, sample.future, squared=squared)
    return total / len(samples)


def _check_samples(samples, config: TrainConfig, model_config: ModelConfig, name: str):
    for sample in samples:
        if sample.past.shape != (config.t_past, model_config.joint_count, 3):
            raise ConfigError(
                f"{name}: past window shape {sample.past.shape} does not match "
                f"({config.t_past}, {model_config.joint_count}, 3)"
            )
        if sample.future.shape[0] != config.t_future:
            raise ConfigError(
                f"{name}: future window has {sample.future.shape[0]} frames, "
                f"expected {config.t_future}"
            )


def train(
    model_config: ModelConfig,
    train_set: list[SamplePair],
    val_set: list[SamplePair] | None,
    config: TrainConfig,
) -> tuple[TrainHistory, ModelParams]:
    """Optimize the model end to end; returns history and the best-validation
    parameters (final parameters when there is no validation set).

    Mini-batches are reshuffled every epoch from a seeded stream, so a rerun
    with identical inputs reproduces the history and checkpoint bit for bit.
    Raises :class:`TrainingDiverged` as soon as a batch loss is non-finite.
    """
    if not train_set:
        raise ConfigError("training set is empty")
    if model_config.t_past != config.t_past or model_config.t_future != config.t_future:
        raise ConfigError(
            f"model windows ({model_config.t_past}, {model_config.t_future}) do not "
            f"match training windows ({config.t_past}, {config.t_future})"
        )
    _check_samples(train_set, config, model_config, "train set")
    if val_set:
        _check_samples(val_set, config, model_config, "validation set")

    rng = np.random.default_rng(config.seed)
    params = init_model(model_config, rng)
    state = AdamState.for_params(params.tensors)
    loss_factor = (
        config.t_future / (config.t_past + config.t_future)
        if config.loss_on_observed
        else 1.0
    )

    history = TrainHistory()
    best_params = params
    best_val = math.inf
    n = len(train_set)
    for epoch in range(config.epochs):
        started = time.perf_counter()
        lr = lr_schedule(epoch, config)
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            batch = [train_set[i] for i in order[start : start + config.batch_size]]
            tape = Tape()
            total = None
            for sample in batch:
                pred = model_forward(sample.past, params, tape)
                loss = mpjpe_loss(
                    pred, Tensor(sample.future), tape, squared=config.squared_error
                )
                total = loss if total is None else add(total, loss, tape)
            batch_loss = scale(total, loss_factor / len(batch), tape)
            value = batch_loss.item()
            if not math.isfinite(value):
                raise TrainingDiverged(
                    f"non-finite loss {value} at epoch {epoch}, "
                    f"batch starting at sample {start} (lr={lr})"
                )
            epoch_loss += value * len(batch)
            grads = backward(batch_loss, tape, list(params.tensors.values()))
            tensors, state = adam_step(params.tensors, grads, state, lr)
            params = params.replace(tensors)
        train_loss = epoch_loss / n
        val_loss = (
            _dataset_mpjpe(params, val_set, config.squared_error) * loss_factor
            if val_set
            else math.nan
        )
        history.epochs.append(
            EpochStats(
                epoch=epoch,
                train_loss=train_loss,
                val_loss=val_loss,
                learning_rate=lr,
                seconds=time.perf_counter() - started,
            )
        )
        if val_set and val_loss < best_val:
            best_val = val_loss
            best_params = params
    if not val_set:
        best_params = params
    return history, best_params


# ---------------------------------------------------------------------------
# evaluation


def horizon_frame_index(horizon_ms: float, frame_rate: float = 25.0) -> int:
    """1-based predicted-frame index for a horizon in milliseconds."""
    ms_per_frame = 1000.0 / frame_rate
    index = horizon_ms / ms_per_frame
    if abs(index - round(index)) > 1e-9 or round(index) < 1:
        raise ConfigError(
            f"horizon {horizon_ms} ms is not a whole number of frames at "
            f"{frame_rate} frames/second ({ms_per_frame:g} ms/frame)"
        )
    return int(round(index))


def zero_velocity_predictions(sample: SamplePair, t_future: int) -> np.ndarray:
    """Baseline predictor: repeat the last observed frame."""
    return np.repeat(sample.past[-1][None, :, :], t_future, axis=0)


def evaluate(
    params: ModelParams,
    test_set: list[SamplePair],
    horizons_ms: list[float],
    frame_rate: float = 25.0,
) -> dict[float, float]:
    """Per-horizon MPJPE at the single frame each horizon maps to.

    Joint-position errors at that frame are averaged over joints and test
    samples.  Horizons beyond the model's output window are rejected.
    """
    if not test_set:
        raise ConfigError("evaluation set is empty")
    t_future = params.config.t_future
    indices = {}
    for horizon in horizons_ms:
        idx = horizon_frame_index(horizon, frame_rate)
        if idx > t_future:
            raise ConfigError(
                f"horizon {horizon} ms needs frame {idx} but the model "
                f"predicts only {t_future} frames"
            )
        indices[horizon] = idx - 1
    sums = {h: 0.0 for h in horizons_ms}
    for sample in test_set:
        pred = model_forward(sample.past, params).array
        dist = np.sqrt(((pred - sample.future) ** 2).sum(axis=2))
        for horizon, idx in indices.items():
            sums[horizon] += float(dist[idx].mean())
    return {h: s / len(test_set) for h, s in sums.items()}


# ---------------------------------------------------------------------------
# feature-count sweep


@dataclass(frozen=True)
class SweepRow:
    total_features: int
    avg_train_loss: float
    avg_val_loss: float
    ref_train_loss: float | None
    ref_val_loss: float | None
    failure: str | None = None


def _sweep_entry(payload) -> SweepRow:
    from .reference import sweep_reference

    total, model_config, train_set, val_set, config, tail_epochs = payload
    ref = sweep_reference(total)
    try:
        history, _ = train(model_config, train_set, val_set, config)
        tail = history.last(tail_epochs)
        return SweepRow(
            total_features=total,
            avg_train_loss=sum(e.train_loss for e in tail) / len(tail),
            avg_val_loss=sum(e.val_loss for e in tail) / len(tail),
            ref_train_loss=ref[0] if ref else None,
            ref_val_loss=ref[1] if ref else None,
        )
    except (ConfigError, TrainingDiverged) as exc:
        return SweepRow(
            total_features=total,
            avg_train_loss=math.nan,
            avg_val_loss=math.nan,
            ref_train_loss=ref[0] if ref else None,
            ref_val_loss=ref[1] if ref else None,
            failure=str(exc),
        )


def sweep(
    configs: "list[tuple[int, ModelConfig]]",
    train_set: list[SamplePair],
    val_set: list[SamplePair],
    config: TrainConfig,
    tail_epochs: int = 5,
    jobs: int = 1,
    on_row=None,
) -> list[SweepRow]:
    """Train one model per embedding-width preset and report losses averaged
    over the last ``tail_epochs`` epochs, annotated with the published
    reference numbers where available (annotation only, never asserted).

    Entries are independent runs; ``jobs`` > 1 executes them in worker
    processes.  A failed entry becomes a row with a ``failure`` marker.
    ``on_row`` is called with each finished row, in preset order.
    """
    payloads = [
        (total, model_config, train_set, val_set, config, tail_epochs)
        for total, model_config in configs
    ]
    if jobs > 1 and len(payloads) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=min(jobs, len(payloads))) as pool:
            iterator = pool.map(_sweep_entry, payloads)
            rows = []
            for row in iterator:
                rows.append(row)
                if on_row:
                    on_row(row)
            return rows
    rows = []
    for payload in payloads:
        row = _sweep_entry(payload)
        rows.append(row)
        if on_row:
            on_row(row)
    return rows
