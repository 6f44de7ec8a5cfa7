"""Command-line front end: synth, train, eval, predict, gradcheck, sweep.

Every command is deterministic under fixed seeds and inputs; output files are
bit-identical across reruns (wall-clock timings go to stderr, never into
files).  Exit code 0 means the command completed with all contracts held.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .data import SYNTH_KINDS, center_root, load_pose_csv, synth_motion, window, write_pose_csv
from .errors import TrainingDiverged
from .gradcheck import GRADCHECK_TOLERANCE, run_suite
from .model import load_model, make_model_config, model_forward, save_model
from .runconfig import RunConfig, load_run_config
from .training import TrainConfig, evaluate, sweep, train
from .data import PoseSequence

SHORT_TERM_HORIZONS = (80.0, 160.0, 320.0, 400.0)
LONG_TERM_HORIZONS = (560.0, 1000.0)


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 1


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def _load_sequences(data_path: Path, frame_rate: float, centered: bool) -> list[PoseSequence]:
    if data_path.is_dir():
        files = sorted(data_path.glob("*.csv"))
        if not files:
            raise FileNotFoundError(f"no .csv files in {data_path}")
    else:
        files = [data_path]
    sequences = [load_pose_csv(f, frame_rate=frame_rate) for f in files]
    if centered:
        sequences = [center_root(s) for s in sequences]
    return sequences


def _split_sequences(sequences, split, seed):
    """Seeded by-sequence split into train/val/test lists.

    A nonzero fraction gets at least one sequence whenever enough sequences
    exist, so small synthetic datasets still produce a validation set.
    """
    n = len(sequences)
    order = np.random.default_rng(seed).permutation(n)
    n_val = max(1, int(n * split[1])) if split[1] > 0 and n >= 2 else 0
    n_test = max(1, int(n * split[2])) if split[2] > 0 and n >= 3 else 0
    n_train = n - n_val - n_test
    train_seqs = [sequences[i] for i in order[:n_train]]
    val_seqs = [sequences[i] for i in order[n_train : n_train + n_val]]
    test_seqs = [sequences[i] for i in order[n_train + n_val :]]
    return train_seqs, val_seqs, test_seqs


def _windows(sequences, t_past, t_future):
    samples = []
    for seq in sequences:
        samples.extend(window(seq, t_past, t_future))
    return samples


def _prepare_run(run: RunConfig):
    sequences = _load_sequences(run.data_dir, run.frame_rate, run.center_root)
    joints = sequences[0].joint_count
    train_seqs, val_seqs, _ = _split_sequences(sequences, run.split, run.seed)
    train_set = _windows(train_seqs, run.train.t_past, run.train.t_future)
    val_set = _windows(val_seqs, run.train.t_past, run.train.t_future)
    if not train_set:
        raise FileNotFoundError(
            f"no trainable windows in {run.data_dir} for "
            f"{run.train.t_past}+{run.train.t_future} frames"
        )
    return joints, train_set, val_set or None


def _write_history(path: Path, history):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_mpjpe", "val_mpjpe", "learning_rate"])
        for e in history.epochs:
            writer.writerow([e.epoch, repr(e.train_loss), repr(e.val_loss), repr(e.learning_rate)])


def cmd_synth(args) -> int:
    seq = synth_motion(args.kind, args.joints, args.frames, args.seed, args.frame_rate)
    write_pose_csv(args.out, seq)
    print(f"wrote {args.frames} frames x {args.joints} joints to {args.out}")
    return 0


def cmd_train(args) -> int:
    run = load_run_config(args.config)
    out_dir = Path(args.out) if args.out else run.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    joints, train_set, val_set = _prepare_run(run)
    model_config = make_model_config(
        joint_count=joints,
        t_future=run.train.t_future,
        irb=run.irb_config(),
        num_layers=run.gcn_layers,
    )
    history, params = train(model_config, train_set, val_set, run.train)
    save_model(out_dir / "model.ckpt", params)
    _write_history(out_dir / "history.csv", history)
    total = sum(e.seconds for e in history.epochs)
    print(
        f"trained {run.train.epochs} epochs on {len(train_set)} windows "
        f"({total:.1f} s); outputs in {out_dir}",
        file=sys.stderr,
    )
    print(f"checkpoint: {out_dir / 'model.ckpt'}")
    return 0


def cmd_eval(args) -> int:
    params = load_model(args.checkpoint)
    sequences = _load_sequences(Path(args.data), args.frame_rate, args.center_root)
    config = params.config
    samples = _windows(sequences, config.t_past, config.t_future)
    if not samples:
        return _fail(
            f"no windows of {config.t_past}+{config.t_future} frames in {args.data}"
        )
    if args.horizons:
        horizons = [float(h) for h in args.horizons.split(",")]
    else:
        horizons = list(
            LONG_TERM_HORIZONS if config.t_future >= 25 else SHORT_TERM_HORIZONS
        )
    table = evaluate(params, samples, horizons, frame_rate=args.frame_rate)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["horizon_ms", "mpjpe_mm"])
        for horizon in horizons:
            writer.writerow([f"{horizon:g}", repr(table[horizon])])
    for horizon in horizons:
        print(f"{horizon:g} ms\t{table[horizon]:.3f} mm")
    return 0


def cmd_predict(args) -> int:
    params = load_model(args.checkpoint)
    seq = load_pose_csv(args.input_csv, frame_rate=args.frame_rate)
    config = params.config
    if seq.num_frames < config.t_past:
        return _fail(
            f"{args.input_csv} has {seq.num_frames} frames, the model needs "
            f"{config.t_past}"
        )
    if seq.joint_count != config.joint_count:
        return _fail(
            f"{args.input_csv} has {seq.joint_count} joints, the checkpoint "
            f"was trained on {config.joint_count}"
        )
    pred = model_forward(seq.frames[-config.t_past :], params).array
    write_pose_csv(args.out, PoseSequence(frames=pred, frame_rate=seq.frame_rate))
    print(f"wrote {config.t_future} predicted frames to {args.out}")
    return 0


def cmd_gradcheck(args) -> int:
    errors = run_suite(scale=args.scale)
    failed = []
    for op, err in errors.items():
        status = "PASS" if err <= GRADCHECK_TOLERANCE else "FAIL"
        print(f"{status}  {op:32s} max rel err {err:.3e}")
        if err > GRADCHECK_TOLERANCE:
            failed.append(op)
    if failed:
        return _fail(
            f"{len(failed)} op(s) exceed {GRADCHECK_TOLERANCE:g}: {', '.join(failed)}"
        )
    print(f"all {len(errors)} checks within {GRADCHECK_TOLERANCE:g}")
    return 0


def cmd_sweep(args) -> int:
    run = load_run_config(args.config)
    joints, train_set, val_set = _prepare_run(run)
    if val_set is None:
        return _fail("the sweep needs a validation split (data.split)")
    configs = []
    for total in run.sweep_totals:
        run_total = dataclasses.replace(run, irb_features=total, branches=None)
        configs.append(
            (
                total,
                make_model_config(
                    joint_count=joints,
                    t_future=run.train.t_future,
                    irb=run_total.irb_config(),
                    num_layers=run.gcn_layers,
                ),
            )
        )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fh = open(out, "w", newline="", encoding="utf-8")
    writer = csv.writer(fh)
    writer.writerow(
        ["total_features", "avg_train_loss", "avg_val_loss",
         "ref_train_loss", "ref_val_loss", "status"]
    )
    fh.flush()

    def flush_row(row):
        writer.writerow(
            [
                row.total_features,
                repr(row.avg_train_loss),
                repr(row.avg_val_loss),
                "" if row.ref_train_loss is None else repr(row.ref_train_loss),
                "" if row.ref_val_loss is None else repr(row.ref_val_loss),
                row.failure or "ok",
            ]
        )
        fh.flush()
        print(
            f"{row.total_features} features: train {row.avg_train_loss:.3f} "
            f"val {row.avg_val_loss:.3f} [{row.failure or 'ok'}]"
        )

    try:
        rows = sweep(
            configs, train_set, val_set, run.train,
            tail_epochs=run.tail_epochs, jobs=args.jobs, on_row=flush_row,
        )
    finally:
        fh.close()
    if any(row.failure for row in rows):
        return _fail("one or more sweep entries failed; see the status column")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="irbmotion",
        description="Skeleton motion forecasting experiments",
    )
    parser.add_argument("--version", action="version", version=__version__)
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("synth", help="generate a synthetic pose CSV")
    p.add_argument("--kind", choices=SYNTH_KINDS, required=True)
    p.add_argument("--joints", type=_positive_int, required=True)
    p.add_argument("--frames", type=_positive_int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--frame-rate", type=float, default=25.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = commands.add_parser("train", help="train a model from a run config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output directory (overrides config and env)")
    p.set_defaults(func=cmd_train)

    p = commands.add_parser("eval", help="per-horizon error of a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="pose CSV file or directory")
    p.add_argument("--horizons", help="comma-separated milliseconds")
    p.add_argument("--frame-rate", type=float, default=25.0)
    p.add_argument("--center-root", action="store_true")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_eval)

    p = commands.add_parser("predict", help="forecast future frames from a CSV")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input-csv", required=True)
    p.add_argument("--frame-rate", type=float, default=25.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = commands.add_parser("gradcheck", help="finite-difference gradient audit")
    p.add_argument("--scale", choices=("tiny", "default"), default="tiny")
    p.set_defaults(func=cmd_gradcheck)

    p = commands.add_parser("sweep", help="embedding-width sweep report")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--jobs", type=_positive_int, default=1)
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, TrainingDiverged) as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
