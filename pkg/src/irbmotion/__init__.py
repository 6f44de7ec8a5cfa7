"""Skeleton motion forecasting with inception-style temporal encoders and a
learnable-adjacency graph stack, built on a small self-contained autodiff
core.
"""

from .data import PoseSequence, SamplePair, center_root, load_pose_csv, synth_motion, window, write_pose_csv
from .errors import (
    CheckpointError,
    ConfigError,
    DataFormatError,
    ShapeError,
    TrainingDiverged,
)
from .estimator import MotionPredictor
from .gcn import GcnConfig, GcnLayerParams, gc_layer, gcn_forward, init_gcn
from .irb import (
    BranchSpec,
    IrbConfig,
    IrbParams,
    default_config,
    init_irb,
    irb_forward,
    sweep_configs,
)
from .model import (
    ModelConfig,
    ModelParams,
    init_model,
    load_model,
    make_model_config,
    model_forward,
    save_model,
    zeros_model,
)
from .tensor import GradientStore, Tape, Tensor, backward, finite_diff_gradient
from .training import (
    AdamState,
    TrainConfig,
    TrainHistory,
    adam_step,
    evaluate,
    lr_schedule,
    mpjpe,
    mpjpe_loss,
    sweep,
    train,
    zero_velocity_predictions,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "Tensor",
    "Tape",
    "GradientStore",
    "backward",
    "finite_diff_gradient",
    "BranchSpec",
    "IrbConfig",
    "IrbParams",
    "default_config",
    "sweep_configs",
    "init_irb",
    "irb_forward",
    "GcnConfig",
    "GcnLayerParams",
    "gc_layer",
    "gcn_forward",
    "init_gcn",
    "ModelConfig",
    "ModelParams",
    "make_model_config",
    "init_model",
    "zeros_model",
    "model_forward",
    "save_model",
    "load_model",
    "PoseSequence",
    "SamplePair",
    "load_pose_csv",
    "write_pose_csv",
    "window",
    "center_root",
    "synth_motion",
    "TrainConfig",
    "TrainHistory",
    "AdamState",
    "mpjpe",
    "mpjpe_loss",
    "lr_schedule",
    "adam_step",
    "train",
    "evaluate",
    "sweep",
    "zero_velocity_predictions",
    "MotionPredictor",
    "ShapeError",
    "ConfigError",
    "DataFormatError",
    "CheckpointError",
    "TrainingDiverged",
]
