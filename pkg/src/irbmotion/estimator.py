"""Estimator-style front end so the forecaster composes with common tooling.

`MotionPredictor` follows the fit/predict convention: constructor arguments
are hyperparameters stored verbatim, ``fit`` learns from pose sequences,
``predict`` maps an observed window to future frames, and
``get_params``/``set_params`` expose the hyperparameters for grid search and
cloning without requiring scikit-learn at runtime.
"""

from __future__ import annotations

import inspect

import numpy as np

from .data import PoseSequence, window
from .errors import ConfigError, DataFormatError
from .irb import default_config, sweep_configs
from .model import load_model, make_model_config, model_forward, save_model
from .training import TrainConfig, evaluate, mpjpe, train
from .validation import check_pose_frames, check_positive_int, check_sequences

__all__ = ["MotionPredictor"]


def _resolve_irb(irb_features: int, input_frames: int):
    if irb_features == 360:
        return default_config(input_frames)
    for config in sweep_configs(input_frames):
        if config.total_features == irb_features:
            return config
    raise ConfigError(
        f"no encoder preset with {irb_features} features; available presets "
        f"are 223/300/360/420/460"
    )


class MotionPredictor:
    """Forecast future skeleton frames from an observed window.

    Parameters mirror the stock training recipe: a 360-feature temporal
    encoder per joint coordinate, a 12-layer graph stack, 10 observed and 10
    predicted frames, Adam at 0.0005 with 0.96 decay every 2 epochs, batch
    size 16, 50 epochs.

    Fitted attributes (set by :meth:`fit`): ``params_`` (learned tensors),
    ``model_config_``, ``history_``, ``n_joints_``.
    """

    def __init__(
        self,
        irb_features: int = 360,
        gcn_layers: int = 12,
        t_past: int = 10,
        t_future: int = 10,
        learning_rate: float = 0.0005,
        decay_factor: float = 0.96,
        decay_every: int = 2,
        batch_size: int = 16,
        epochs: int = 50,
        stride: int = 1,
        seed: int = 0,
        loss_on_observed: bool = False,
        squared_error: bool = False,
    ):
        self.irb_features = irb_features
        self.gcn_layers = gcn_layers
        self.t_past = t_past
        self.t_future = t_future
        self.learning_rate = learning_rate
        self.decay_factor = decay_factor
        self.decay_every = decay_every
        self.batch_size = batch_size
        self.epochs = epochs
        self.stride = stride
        self.seed = seed
        self.loss_on_observed = loss_on_observed
        self.squared_error = squared_error

    # -- hyperparameter plumbing (scikit-learn calling convention) --

    @classmethod
    def _param_names(cls) -> list[str]:
        signature = inspect.signature(cls.__init__)
        return [name for name in signature.parameters if name != "self"]

    def get_params(self, deep: bool = True) -> dict:
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params) -> "MotionPredictor":
        valid = set(self._param_names())
        for name, value in params.items():
            if name not in valid:
                raise ConfigError(
                    f"invalid parameter {name!r} for MotionPredictor"
                )
            setattr(self, name, value)
        return self

    # -- training and inference --

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            decay_factor=self.decay_factor,
            decay_every=self.decay_every,
            batch_size=check_positive_int(self.batch_size, "batch_size"),
            epochs=check_positive_int(self.epochs, "epochs"),
            t_past=check_positive_int(self.t_past, "t_past"),
            t_future=check_positive_int(self.t_future, "t_future"),
            seed=self.seed,
            loss_on_observed=self.loss_on_observed,
            squared_error=self.squared_error,
        )

    def _windows(self, sequences: list[PoseSequence]):
        samples = []
        for seq in sequences:
            samples.extend(window(seq, self.t_past, self.t_future, self.stride))
        if not samples:
            raise DataFormatError(
                f"no sequence is long enough for {self.t_past}+{self.t_future} windows"
            )
        return samples

    def fit(self, sequences, val_sequences=None) -> "MotionPredictor":
        """Learn from pose sequences (PoseSequence objects or (T, K, 3) arrays).

        When ``val_sequences`` is given, the best-validation parameters are
        kept; otherwise the final parameters are.
        """
        sequences = check_sequences(sequences)
        joints = sequences[0].joint_count
        train_samples = self._windows(sequences)
        val_samples = None
        if val_sequences is not None:
            val_sequences = check_sequences(val_sequences, "val_sequences")
            if val_sequences[0].joint_count != joints:
                raise DataFormatError(
                    "validation sequences use a different skeleton"
                )
            val_samples = self._windows(val_sequences)

        model_config = make_model_config(
            joint_count=joints,
            t_future=self.t_future,
            irb=_resolve_irb(self.irb_features, self.t_past),
            num_layers=check_positive_int(self.gcn_layers, "gcn_layers"),
        )
        history, params = train(
            model_config, train_samples, val_samples, self._train_config()
        )
        self.model_config_ = model_config
        self.params_ = params
        self.history_ = history
        self.n_joints_ = joints
        return self

    def _check_fitted(self):
        if not hasattr(self, "params_"):
            raise ConfigError("this MotionPredictor is not fitted yet; call fit first")

    def predict(self, past) -> np.ndarray:
        """Predict (t_future, K, 3) positions from the most recent t_past
        frames of ``past`` (a PoseSequence or (T, K, 3) array, T >= t_past)."""
        self._check_fitted()
        frames = past.frames if isinstance(past, PoseSequence) else check_pose_frames(past, "past")
        if frames.shape[0] < self.t_past:
            raise DataFormatError(
                f"need at least {self.t_past} observed frames, got {frames.shape[0]}"
            )
        if frames.shape[1] != self.n_joints_:
            raise DataFormatError(
                f"got {frames.shape[1]} joints, the model was fitted on "
                f"{self.n_joints_}"
            )
        pred = model_forward(frames[-self.t_past :], self.params_)
        return pred.array.copy()

    def score(self, sequences) -> float:
        """Negative MPJPE over all windows (greater is better)."""
        self._check_fitted()
        samples = self._windows(check_sequences(sequences))
        total = 0.0
        for sample in samples:
            total += mpjpe(model_forward(sample.past, self.params_), sample.future)
        return -total / len(samples)

    def evaluate_horizons(self, sequences, horizons_ms) -> dict[float, float]:
        """Per-horizon MPJPE table over all windows of the sequences."""
        self._check_fitted()
        sequences = check_sequences(sequences)
        return evaluate(
            self.params_,
            self._windows(sequences),
            list(horizons_ms),
            frame_rate=sequences[0].frame_rate,
        )

    def save(self, path):
        """Write the fitted parameters and architecture next to each other."""
        self._check_fitted()
        save_model(path, self.params_)

    @classmethod
    def load(cls, path) -> "MotionPredictor":
        """Rebuild a fitted predictor from :meth:`save` output."""
        params = load_model(path)
        config = params.config
        predictor = cls(
            irb_features=config.irb.total_features,
            gcn_layers=config.gcn.num_layers,
            t_past=config.t_past,
            t_future=config.t_future,
        )
        predictor.model_config_ = config
        predictor.params_ = params
        predictor.history_ = None
        predictor.n_joints_ = config.joint_count
        return predictor
