"""Pose sequences: CSV ingestion, windowing, centering, synthetic motion.

The on-disk format is one CSV per sequence: header
``frame,j0_x,j0_y,j0_z,j1_x,...`` (joint count inferred from the column
count), one row per frame, positions as decimal reals in millimeters.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DataFormatError
from .validation import check_pose_frames

__all__ = [
    "PoseSequence",
    "SamplePair",
    "load_pose_csv",
    "write_pose_csv",
    "window",
    "center_root",
    "synth_motion",
    "SYNTH_KINDS",
    "GAIT_PERIOD",
]

SYNTH_KINDS = ("gait", "one_limb", "still_plus_noise")

# Period of the synthetic oscillations, in frames (one cycle per second at
# the default 25 frames/second).
GAIT_PERIOD = 25


@dataclass(frozen=True)
class PoseSequence:
    """A time-indexed series of skeleton frames, (T, K, 3) in millimeters."""

    frames: np.ndarray
    frame_rate: float = 25.0

    def __post_init__(self):
        frames = check_pose_frames(self.frames, "frames")
        object.__setattr__(self, "frames", frames)
        if self.frame_rate <= 0:
            raise DataFormatError(f"frame rate must be positive, got {self.frame_rate}")

    @property
    def joint_count(self) -> int:
        return self.frames.shape[1]

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def ms_per_frame(self) -> float:
        return 1000.0 / self.frame_rate


@dataclass(frozen=True)
class SamplePair:
    """One training sample: an observed window and the frames right after it."""

    past: np.ndarray
    future: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "past", check_pose_frames(self.past, "past"))
        object.__setattr__(self, "future", check_pose_frames(self.future, "future"))
        if self.past.shape[1:] != self.future.shape[1:]:
            raise DataFormatError(
                f"past {self.past.shape} and future {self.future.shape} "
                f"disagree on joints"
            )


def _header_columns(joint_count: int) -> list[str]:
    cols = ["frame"]
    for j in range(joint_count):
        cols += [f"j{j}_x", f"j{j}_y", f"j{j}_z"]
    return cols


def load_pose_csv(path, frame_rate: float = 25.0) -> PoseSequence:
    """Read a pose CSV; joint count comes from the header."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}:1: empty file") from None
        if len(header) < 4 or (len(header) - 1) % 3 != 0:
            raise DataFormatError(
                f"{path}:1: header must be 'frame' plus 3 columns per joint, "
                f"got {len(header)} columns"
            )
        joint_count = (len(header) - 1) // 3
        if header != _header_columns(joint_count):
            raise DataFormatError(
                f"{path}:1: unexpected header {','.join(header)!r}"
            )
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataFormatError(
                    f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}"
                )
            try:
                rows.append([float(cell) for cell in row[1:]])
            except ValueError as exc:
                raise DataFormatError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise DataFormatError(f"{path}: no frames")
    frames = np.array(rows, dtype=np.float64).reshape(len(rows), joint_count, 3)
    return PoseSequence(frames=frames, frame_rate=frame_rate)


def write_pose_csv(path, seq: PoseSequence):
    """Write the CSV form; float cells use shortest round-trip formatting."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_header_columns(seq.joint_count))
        flat = seq.frames.reshape(seq.num_frames, -1)
        for t in range(seq.num_frames):
            writer.writerow([t] + [repr(float(v)) for v in flat[t]])


def window(seq: PoseSequence, t_past: int, t_future: int, stride: int = 1) -> list[SamplePair]:
    """Slice a sequence into contiguous (past, future) pairs.

    Yields floor((T - t_past - t_future) / stride) + 1 pairs; a sequence too
    short for even one pair produces an empty list and a warning.
    """
    if min(t_past, t_future, stride) < 1:
        raise DataFormatError(
            f"t_past, t_future, stride must be positive, got "
            f"{t_past}, {t_future}, {stride}"
        )
    total = t_past + t_future
    if seq.num_frames < total:
        warnings.warn(
            f"sequence of {seq.num_frames} frames is too short for "
            f"{t_past}+{t_future} windows",
            stacklevel=2,
        )
        return []
    pairs = []
    for start in range(0, seq.num_frames - total + 1, stride):
        pairs.append(
            SamplePair(
                past=seq.frames[start : start + t_past],
                future=seq.frames[start + t_past : start + total],
            )
        )
    return pairs


def center_root(seq: PoseSequence, root_joint: int = 0) -> PoseSequence:
    """Remove global translation by pinning one joint to the origin per frame."""
    if not 0 <= root_joint < seq.joint_count:
        raise DataFormatError(
            f"root joint {root_joint} out of range for {seq.joint_count} joints"
        )
    centered = seq.frames - seq.frames[:, root_joint : root_joint + 1, :]
    return PoseSequence(frames=centered, frame_rate=seq.frame_rate)


def _base_pose(joint_count: int) -> np.ndarray:
    """Fixed desk-scale skeleton shared by all synthetic sequences.

    Joint 0 is the root at the origin; the rest fan out on a deterministic
    spiral a few centimeters across, so sequences from different seeds share
    one skeleton and differ only in how it moves.
    """
    pose = np.zeros((joint_count, 3))
    for j in range(1, joint_count):
        angle = 2.399963229728653 * j  # golden angle, no two joints collinear
        radius = 20.0 + 8.0 * j
        pose[j] = [
            radius * np.cos(angle),
            12.0 * ((j % 3) - 1),
            radius * np.sin(angle),
        ]
    return pose


def _cycle(t: np.ndarray, period: int, phase: float) -> np.ndarray:
    # Evaluate the angle on t mod period so frames one period apart are
    # bit-identical.
    return np.sin(2.0 * np.pi * (t % period) / period + phase)


def synth_motion(
    kind: str,
    joint_count: int,
    num_frames: int,
    seed: int,
    frame_rate: float = 25.0,
) -> PoseSequence:
    """Deterministic synthetic skeleton motion for desk-scale experiments.

    gait: phase-offset sinusoids on every non-root joint plus a small root
    bob, covering the whole-body-moving regime.  one_limb: a single joint
    oscillates and the rest hold still.  still_plus_noise: a static pose
    with bounded noise (at most 5 mm per coordinate).
    """
    if kind not in SYNTH_KINDS:
        raise DataFormatError(f"unknown motion kind {kind!r}, want one of {SYNTH_KINDS}")
    if joint_count < 4:
        raise DataFormatError(f"need at least 4 joints, got {joint_count}")
    if num_frames < 1:
        raise DataFormatError(f"need at least 1 frame, got {num_frames}")

    rng = np.random.default_rng(seed)
    t = np.arange(num_frames)
    frames = np.repeat(_base_pose(joint_count)[None, :, :], num_frames, axis=0)

    if kind == "gait":
        for j in range(1, joint_count):
            amp = rng.uniform(15.0, 40.0)
            phase = np.pi * j + rng.uniform(-0.4, 0.4)
            swing = _cycle(t, GAIT_PERIOD, phase)
            frames[:, j, 0] += amp * swing
            frames[:, j, 2] += 0.6 * amp * _cycle(t, GAIT_PERIOD, phase + 0.5 * np.pi)
        # double-frequency vertical bob of the root
        frames[:, 0, 1] += 6.0 * _cycle(2 * t, GAIT_PERIOD, rng.uniform(0, 2 * np.pi))
    elif kind == "one_limb":
        mover = joint_count - 1
        phase = rng.uniform(0, 2 * np.pi)
        for axis, amp_range in enumerate(((25.0, 45.0), (8.0, 16.0), (15.0, 30.0))):
            amp = rng.uniform(*amp_range)
            frames[:, mover, axis] += amp * _cycle(t, GAIT_PERIOD, phase + 0.4 * axis)
    else:  # still_plus_noise
        frames += rng.uniform(-5.0, 5.0, size=frames.shape)

    return PoseSequence(frames=frames, frame_rate=frame_rate)
