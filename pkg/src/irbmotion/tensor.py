"""Dense float64 tensors, a forward-op tape, and reverse-mode gradients.

The model code builds its forward pass out of the free functions in this
module (``conv1d_valid``, ``matmul``, ``tanh``, ...).  Every op takes an
optional :class:`Tape`; with a tape the op appends a record (op kind, input
ids, output id, saved values), without one it is a plain numpy computation.
``backward`` replays the records in reverse through a registry of backward
rules and returns a :class:`GradientStore` for the requested leaves.

Tensors are immutable values and safe to share between threads.  A tape must
stay confined to the thread that built it; run independent model instances on
independent tapes for parallelism.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import ShapeError

__all__ = [
    "Tensor",
    "Tape",
    "GradientStore",
    "backward",
    "finite_diff_gradient",
    "gradient_rel_error",
    "check_gradients",
    "conv1d_valid",
    "matmul",
    "concat",
    "slice_1d",
    "reshape",
    "transpose",
    "add",
    "sub",
    "mul",
    "scale",
    "add_row",
    "add_col",
    "tanh",
    "sqrt",
    "sum_all",
]


class Tensor:
    """Immutable dense array of 64-bit reals with row-major layout.

    Scalars are normalized to shape ``(1,)`` so that every tensor has at
    least one extent and all extents are >= 1.
    """

    __slots__ = ("_array",)

    def __init__(self, values, shape: Sequence[int] | None = None):
        arr = np.array(values, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1)
        if shape is not None:
            arr = arr.reshape(tuple(shape))
        if arr.size == 0:
            raise ShapeError(f"tensor extents must all be >= 1, got shape {arr.shape}")
        arr.flags.writeable = False
        self._array = arr

    @staticmethod
    def zeros(shape: Sequence[int] | int) -> "Tensor":
        return _wrap(np.zeros(shape, dtype=np.float64))

    @staticmethod
    def ones(shape: Sequence[int] | int) -> "Tensor":
        return _wrap(np.ones(shape, dtype=np.float64))

    @property
    def shape(self) -> tuple[int, ...]:
        return self._array.shape

    @property
    def ndim(self) -> int:
        return self._array.ndim

    @property
    def size(self) -> int:
        return self._array.size

    @property
    def array(self) -> np.ndarray:
        """The underlying read-only ndarray."""
        return self._array

    @property
    def data(self) -> np.ndarray:
        """Flat row-major read-only view of the values."""
        return self._array.reshape(-1)

    def item(self) -> float:
        if self._array.size != 1:
            raise ShapeError(f"item() needs a 1-element tensor, got shape {self.shape}")
        return float(self._array.reshape(-1)[0])

    def tolist(self):
        return self._array.tolist()

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, data={self._array.tolist()!r})"


def _wrap(arr: np.ndarray) -> Tensor:
    """Adopt a freshly computed float64 array as a Tensor without copying."""
    t = Tensor.__new__(Tensor)
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    arr.flags.writeable = False
    t._array = arr
    return t


def _require(t, name: str) -> Tensor:
    if not isinstance(t, Tensor):
        raise TypeError(f"{name} must be a Tensor, got {type(t).__name__}")
    return t


class Tape:
    """Ordered record of forward ops for one model pass.

    Records are appended in execution order, so every record's inputs are
    either leaves or outputs of earlier records; the backward sweep visits
    each record exactly once in reverse.
    """

    __slots__ = ("_records", "_ids", "_keep", "_produced", "_next")

    def __init__(self):
        self._records: list[tuple] = []  # (op, out_id, in_ids, saved)
        self._ids: dict[int, int] = {}  # id(tensor) -> value id
        self._keep: list[Tensor] = []  # pins tensors so object ids stay unique
        self._produced: set[int] = set()
        self._next = 0

    def __len__(self) -> int:
        return len(self._records)

    def value_id(self, t: Tensor) -> int:
        """Return the tape-local id of ``t``, registering it as a leaf if new."""
        vid = self._ids.get(id(t))
        if vid is None:
            vid = self._next
            self._next = vid + 1
            self._ids[id(t)] = vid
            self._keep.append(t)
        return vid

    def record(self, op: str, inputs: Sequence[Tensor], output: Tensor, saved: tuple):
        in_ids = tuple(self.value_id(t) for t in inputs)
        out_id = self.value_id(output)
        self._produced.add(out_id)
        self._records.append((op, out_id, in_ids, saved))


class GradientStore:
    """Per-leaf gradients from one backward pass, keyed by leaf identity."""

    __slots__ = ("_grads",)

    def __init__(self):
        self._grads: dict[int, tuple[Tensor, Tensor]] = {}

    def set(self, leaf: Tensor, grad: Tensor):
        if grad.shape != leaf.shape:
            raise ShapeError(
                f"gradient shape {grad.shape} does not match leaf shape {leaf.shape}"
            )
        self._grads[id(leaf)] = (leaf, grad)

    def get(self, leaf: Tensor) -> Tensor:
        entry = self._grads.get(id(leaf))
        if entry is None:
            raise KeyError("no gradient recorded for this leaf")
        return entry[1]

    def __contains__(self, leaf: Tensor) -> bool:
        return id(leaf) in self._grads

    def __len__(self) -> int:
        return len(self._grads)

    def leaves(self) -> list[Tensor]:
        return [leaf for leaf, _ in self._grads.values()]


# Backward rules, keyed by op kind.  Each rule maps the upstream gradient and
# the record's saved values to one gradient per input (None = no gradient).
BACKWARD_RULES: dict[str, Callable] = {}


def backward_rule(op: str):
    def register(fn):
        BACKWARD_RULES[op] = fn
        return fn

    return register


def _record(tape: Tape | None, op: str, inputs, output: Tensor, saved: tuple = ()):
    if tape is not None:
        tape.record(op, inputs, output, saved)
    return output


# ---------------------------------------------------------------------------
# primitive ops


def conv1d_valid(
    signal: Tensor, kernels: Tensor, bias: Tensor, tape: Tape | None = None
) -> Tensor:
    """Unpadded stride-1 correlation of a 1-D signal with a filter bank.

    ``signal`` has shape (L,), ``kernels`` (C, k), ``bias`` (C,); the output
    has shape (C, L-k+1) with out[c][t] = bias[c] + sum_i signal[t+i]*kernels[c][i].
    """
    _require(signal, "signal")
    _require(kernels, "kernels")
    _require(bias, "bias")
    if signal.ndim != 1 or kernels.ndim != 2 or bias.ndim != 1:
        raise ShapeError(
            "conv1d_valid expects signal (L,), kernels (C, k), bias (C,), got "
            f"{signal.shape}, {kernels.shape}, {bias.shape}"
        )
    length = signal.shape[0]
    count, width = kernels.shape
    if bias.shape[0] != count:
        raise ShapeError(f"bias length {bias.shape[0]} != kernel count {count}")
    if width > length:
        raise ShapeError(f"kernel size {width} exceeds input length {length}")
    windows = np.lib.stride_tricks.sliding_window_view(signal.array, width)
    out = _wrap((windows @ kernels.array.T + bias.array).T)
    return _record(
        tape, "conv1d", (signal, kernels, bias), out,
        (signal.array, kernels.array, windows),
    )


@backward_rule("conv1d")
def _conv1d_backward(grad, saved):
    signal, kernels, windows = saved
    length = signal.shape[0]
    width = kernels.shape[1]
    d_bias = grad.sum(axis=1)
    d_kernels = grad @ windows
    d_windows = grad.T @ kernels
    d_signal = np.zeros(length)
    idx = np.arange(length - width + 1)[:, None] + np.arange(width)[None, :]
    np.add.at(d_signal, idx, d_windows)
    return d_signal, d_kernels, d_bias


def matmul(a: Tensor, b: Tensor, tape: Tape | None = None) -> Tensor:
    """Matrix product of a (M, N) and b (N, P)."""
    _require(a, "a")
    _require(b, "b")
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shapes do not agree: {a.shape} x {b.shape}")
    out = _wrap(a.array @ b.array)
    return _record(tape, "matmul", (a, b), out, (a.array, b.array))


@backward_rule("matmul")
def _matmul_backward(grad, saved):
    a, b = saved
    return grad @ b.T, a.T @ grad


def concat(parts: Sequence[Tensor], tape: Tape | None = None) -> Tensor:
    """Join 1-D tensors end to end, order preserved."""
    if len(parts) == 0:
        raise ShapeError("concat needs at least one part")
    for p in parts:
        _require(p, "part")
        if p.ndim != 1:
            raise ShapeError(f"concat parts must be 1-D, got shape {p.shape}")
    out = _wrap(np.concatenate([p.array for p in parts]))
    lengths = tuple(p.shape[0] for p in parts)
    return _record(tape, "concat", tuple(parts), out, (lengths,))


@backward_rule("concat")
def _concat_backward(grad, saved):
    (lengths,) = saved
    offsets = np.cumsum((0,) + lengths)
    return tuple(grad[offsets[i]: offsets[i + 1]] for i in range(len(lengths)))


def slice_1d(t: Tensor, start: int, stop: int, tape: Tape | None = None) -> Tensor:
    """Contiguous sub-range [start, stop) of a 1-D tensor."""
    _require(t, "t")
    if t.ndim != 1:
        raise ShapeError(f"slice_1d expects a 1-D tensor, got shape {t.shape}")
    length = t.shape[0]
    if not (0 <= start < stop <= length):
        raise ShapeError(f"slice [{start}, {stop}) out of range for length {length}")
    out = _wrap(t.array[start:stop].copy())
    return _record(tape, "slice_1d", (t,), out, (length, start, stop))


@backward_rule("slice_1d")
def _slice_1d_backward(grad, saved):
    length, start, stop = saved
    d = np.zeros(length)
    d[start:stop] = grad
    return (d,)


def reshape(t: Tensor, shape: Sequence[int], tape: Tape | None = None) -> Tensor:
    """Same values, new shape; element count must be preserved."""
    _require(t, "t")
    shape = tuple(shape)
    if int(np.prod(shape)) != t.size or any(e < 1 for e in shape):
        raise ShapeError(f"cannot reshape {t.shape} to {shape}")
    out = _wrap(t.array.reshape(shape).copy())
    return _record(tape, "reshape", (t,), out, (t.shape,))


@backward_rule("reshape")
def _reshape_backward(grad, saved):
    (in_shape,) = saved
    return (grad.reshape(in_shape),)


def transpose(t: Tensor, tape: Tape | None = None) -> Tensor:
    """Transpose of a 2-D tensor."""
    _require(t, "t")
    if t.ndim != 2:
        raise ShapeError(f"transpose expects a 2-D tensor, got shape {t.shape}")
    out = _wrap(t.array.T.copy())
    return _record(tape, "transpose", (t,), out, ())


@backward_rule("transpose")
def _transpose_backward(grad, saved):
    return (grad.T,)


def _binary_same_shape(op: str, a: Tensor, b: Tensor):
    _require(a, "a")
    _require(b, "b")
    if a.shape != b.shape:
        raise ShapeError(f"{op} needs identical shapes, got {a.shape} and {b.shape}")


def add(a: Tensor, b: Tensor, tape: Tape | None = None) -> Tensor:
    """Elementwise sum of same-shape tensors."""
    _binary_same_shape("add", a, b)
    out = _wrap(a.array + b.array)
    return _record(tape, "add", (a, b), out, ())


@backward_rule("add")
def _add_backward(grad, saved):
    return grad, grad


def sub(a: Tensor, b: Tensor, tape: Tape | None = None) -> Tensor:
    """Elementwise difference of same-shape tensors."""
    _binary_same_shape("sub", a, b)
    out = _wrap(a.array - b.array)
    return _record(tape, "sub", (a, b), out, ())


@backward_rule("sub")
def _sub_backward(grad, saved):
    return grad, -grad


def mul(a: Tensor, b: Tensor, tape: Tape | None = None) -> Tensor:
    """Elementwise product of same-shape tensors."""
    _binary_same_shape("mul", a, b)
    out = _wrap(a.array * b.array)
    return _record(tape, "mul", (a, b), out, (a.array, b.array))


@backward_rule("mul")
def _mul_backward(grad, saved):
    a, b = saved
    return grad * b, grad * a


def scale(t: Tensor, factor: float, tape: Tape | None = None) -> Tensor:
    """Multiply every element by a constant."""
    _require(t, "t")
    factor = float(factor)
    out = _wrap(t.array * factor)
    return _record(tape, "scale", (t,), out, (factor,))


@backward_rule("scale")
def _scale_backward(grad, saved):
    (factor,) = saved
    return (grad * factor,)


def add_row(matrix: Tensor, row: Tensor, tape: Tape | None = None) -> Tensor:
    """Add a length-F row vector to every row of an (N, F) matrix."""
    _require(matrix, "matrix")
    _require(row, "row")
    if matrix.ndim != 2 or row.ndim != 1 or matrix.shape[1] != row.shape[0]:
        raise ShapeError(f"add_row shapes do not agree: {matrix.shape} + {row.shape}")
    out = _wrap(matrix.array + row.array[None, :])
    return _record(tape, "add_row", (matrix, row), out, ())


@backward_rule("add_row")
def _add_row_backward(grad, saved):
    return grad, grad.sum(axis=0)


def add_col(matrix: Tensor, col: Tensor, tape: Tape | None = None) -> Tensor:
    """Add a length-N column vector to every column of an (N, F) matrix."""
    _require(matrix, "matrix")
    _require(col, "col")
    if matrix.ndim != 2 or col.ndim != 1 or matrix.shape[0] != col.shape[0]:
        raise ShapeError(f"add_col shapes do not agree: {matrix.shape} + {col.shape}")
    out = _wrap(matrix.array + col.array[:, None])
    return _record(tape, "add_col", (matrix, col), out, ())


@backward_rule("add_col")
def _add_col_backward(grad, saved):
    return grad, grad.sum(axis=1)


def tanh(t: Tensor, tape: Tape | None = None) -> Tensor:
    """Elementwise hyperbolic tangent."""
    _require(t, "t")
    out = _wrap(np.tanh(t.array))
    return _record(tape, "tanh", (t,), out, (out.array,))


@backward_rule("tanh")
def _tanh_backward(grad, saved):
    (y,) = saved
    return (grad * (1.0 - y * y),)


def sqrt(t: Tensor, tape: Tape | None = None) -> Tensor:
    """Elementwise square root.

    The backward rule uses the zero subgradient where the output is exactly
    zero, so losses built on distances stay finite when a distance vanishes.
    """
    _require(t, "t")
    out = _wrap(np.sqrt(t.array))
    return _record(tape, "sqrt", (t,), out, (out.array,))


@backward_rule("sqrt")
def _sqrt_backward(grad, saved):
    (y,) = saved
    d = np.zeros_like(y)
    nz = y != 0.0
    d[nz] = grad[nz] / (2.0 * y[nz])
    return (d,)


def sum_all(t: Tensor, tape: Tape | None = None) -> Tensor:
    """Sum of all elements as a 1-element tensor."""
    _require(t, "t")
    out = _wrap(np.array([t.array.sum()]))
    return _record(tape, "sum_all", (t,), out, (t.shape,))


@backward_rule("sum_all")
def _sum_all_backward(grad, saved):
    (in_shape,) = saved
    return (np.full(in_shape, grad[0]),)


# ---------------------------------------------------------------------------
# reverse sweep and the finite-difference oracle


def backward(loss: Tensor, tape: Tape, leaves: Sequence[Tensor]) -> GradientStore:
    """Gradients of a 1-element ``loss`` with respect to each leaf.

    ``loss`` must have been produced by an op recorded on ``tape``.  Leaves
    that do not influence the loss get zero gradients.
    """
    _require(loss, "loss")
    if loss.size != 1:
        raise ShapeError(f"loss must be a 1-element tensor, got shape {loss.shape}")
    loss_id = tape._ids.get(id(loss))
    if loss_id is None or loss_id not in tape._produced:
        raise ValueError("loss was not produced by an op on this tape")

    grads: dict[int, np.ndarray] = {loss_id: np.ones(loss.shape)}
    for op, out_id, in_ids, saved in reversed(tape._records):
        g = grads.pop(out_id, None)
        if g is None:
            continue
        in_grads = BACKWARD_RULES[op](g, saved)
        for vid, ig in zip(in_ids, in_grads):
            if ig is None:
                continue
            acc = grads.get(vid)
            grads[vid] = ig if acc is None else acc + ig

    store = GradientStore()
    for leaf in leaves:
        vid = tape._ids.get(id(leaf))
        g = grads.get(vid) if vid is not None else None
        store.set(leaf, Tensor.zeros(leaf.shape) if g is None else _wrap(g.copy()))
    return store


def finite_diff_gradient(
    f: Callable[[list[Tensor]], float],
    leaves: Sequence[Tensor],
    h: float = 1e-5,
) -> GradientStore:
    """Central-difference gradient of a scalar function of the leaves.

    ``f`` must be pure and deterministic; each element is perturbed by +-h
    and the two evaluations differenced.  This is the independent oracle the
    backward pass is checked against.
    """
    values = [leaf.array.copy() for leaf in leaves]
    store = GradientStore()
    for i, leaf in enumerate(leaves):
        flat = values[i].reshape(-1)
        grad = np.zeros_like(flat)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + h
            up = f([Tensor(v) for v in values])
            flat[j] = orig - h
            down = f([Tensor(v) for v in values])
            flat[j] = orig
            grad[j] = (up - down) / (2.0 * h)
        store.set(leaf, Tensor(grad.reshape(leaf.shape)))
    return store


def gradient_rel_error(a: Tensor, b: Tensor) -> float:
    """Max-norm relative disagreement between two gradients of one leaf."""
    if a.shape != b.shape:
        raise ShapeError(f"gradient shapes differ: {a.shape} vs {b.shape}")
    diff = float(np.max(np.abs(a.array - b.array)))
    denom = max(float(np.max(np.abs(a.array))), float(np.max(np.abs(b.array))))
    if denom == 0.0:
        return diff
    return diff / denom


def check_gradients(
    build: Callable[[list[Tensor], Tape | None], Tensor],
    leaves: Sequence[Tensor],
    h: float = 1e-5,
) -> float:
    """Compare tape gradients against central differences.

    ``build(leaves, tape)`` must construct the scalar loss from the given
    leaf tensors, recording on ``tape`` when one is supplied.  Returns the
    worst relative error across all leaves.
    """
    leaves = list(leaves)
    tape = Tape()
    loss = build(leaves, tape)
    ad = backward(loss, tape, leaves)
    fd = finite_diff_gradient(lambda vals: build(vals, None).item(), leaves, h)
    return max(gradient_rel_error(ad.get(leaf), fd.get(leaf)) for leaf in leaves)
