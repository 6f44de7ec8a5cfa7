"""Input validation helpers shared by the data layer and the estimator."""

from __future__ import annotations

import numpy as np

from .errors import DataFormatError

__all__ = ["check_pose_frames", "check_sequences", "check_positive_int"]


def check_pose_frames(obj, name: str = "frames") -> np.ndarray:
    """Coerce to a read-only float64 array of shape (T, K, 3), all finite."""
    frames = np.asarray(obj, dtype=np.float64)
    if frames.ndim != 3 or frames.shape[2] != 3:
        raise DataFormatError(
            f"{name} must have shape (frames, joints, 3), got {frames.shape}"
        )
    if frames.shape[0] < 1 or frames.shape[1] < 1:
        raise DataFormatError(f"{name} must be non-empty, got shape {frames.shape}")
    if not np.isfinite(frames).all():
        raise DataFormatError(f"{name} contains non-finite values")
    frames = frames.view()
    frames.flags.writeable = False
    return frames


def check_sequences(sequences, name: str = "sequences") -> list:
    """Validate a non-empty collection of pose sequences sharing one skeleton.

    Accepts PoseSequence objects or raw (T, K, 3) arrays; returns a list of
    PoseSequence.
    """
    from .data import PoseSequence

    items = list(sequences)
    if not items:
        raise DataFormatError(f"{name} must not be empty")
    out = []
    for i, item in enumerate(items):
        if not isinstance(item, PoseSequence):
            item = PoseSequence(frames=check_pose_frames(item, f"{name}[{i}]"))
        out.append(item)
    joints = out[0].joint_count
    for i, seq in enumerate(out):
        if seq.joint_count != joints:
            raise DataFormatError(
                f"{name}[{i}] has {seq.joint_count} joints, expected {joints}"
            )
    return out


def check_positive_int(value, name: str) -> int:
    if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value < 1:
        raise DataFormatError(f"{name} must be a positive integer, got {value!r}")
    return int(value)
