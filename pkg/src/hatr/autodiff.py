"""Dense float64 tensors with tape-based reverse-mode differentiation.

Design notes:

* Define-by-run: entering a ``Tape`` context makes every op record a
  backward rule; ``tape.backward(loss)`` replays them in reverse. Without
  an active tape, ops are plain numpy forward computations.
* A tape and the tensors it references belong to one thread (the active
  tape is thread-local). Tensors themselves are value-like and may be
  handed between threads.
* Every op validates that its output is finite and raises
  ``NonFiniteError`` naming the producing op otherwise; the same guard
  runs on every gradient produced during backward. Silent NaN/Inf
  propagation is treated as a bug, never as data.
* Gradient buffers are never mutated in place: accumulation always
  allocates. This makes it safe for backward rules to hand the same array
  to several inputs (e.g. ``add``).
"""

from __future__ import annotations

import threading
from typing import Callable, Iterable, Sequence

import numpy as np

from . import kernels


class ShapeError(ValueError):
    """Operand shapes do not satisfy an op's contract."""


class ConfigError(ValueError):
    """A structural parameter (kernel size, stride, channel count...) is invalid."""


class NonFiniteError(ArithmeticError):
    """An op produced NaN or Inf."""


class Tensor:
    """A dense float64 array with an optional gradient buffer."""

    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        if not arr.flags.c_contiguous:
            arr = np.ascontiguousarray(arr)
        self.data: np.ndarray = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


_tls = threading.local()


def _active_tape() -> "Tape | None":
    return getattr(_tls, "tape", None)


class Tape:
    """Ordered record of ops for one forward pass.

    Records are appended in execution order, so inputs always precede the
    ops that consume them; ``backward`` walks the list once, in reverse.
    """

    def __init__(self):
        self._nodes: list[tuple[Tensor, str, Callable]] = []

    def __enter__(self) -> "Tape":
        self._prev = _active_tape()
        _tls.tape = self
        return self

    def __exit__(self, *exc) -> None:
        _tls.tape = self._prev
        del self._prev

    def __len__(self) -> int:
        return len(self._nodes)

    def backward(self, loss: Tensor) -> None:
        """Populate ``grad`` of every tensor that influenced ``loss``.

        Repeated calls accumulate into existing ``grad`` buffers.
        """
        if loss.data.size != 1:
            raise ShapeError(f"backward() needs a scalar loss, got shape {loss.shape}")
        grads: dict[int, list] = {id(loss): [loss, np.ones_like(loss.data)]}

        def acc(t: Tensor, g: np.ndarray) -> None:
            if not t.requires_grad:
                return
            if not np.isfinite(g).all():
                raise NonFiniteError("non-finite gradient during backward")
            slot = grads.get(id(t))
            if slot is None:
                grads[id(t)] = [t, g]
            else:
                slot[1] = slot[1] + g

        for out, name, bw in reversed(self._nodes):
            slot = grads.pop(id(out), None)
            if slot is None:
                continue
            g = slot[1]
            out.grad = g if out.grad is None else out.grad + g
            bw(g, acc)
        # Whatever remains was never produced by a recorded op: the leaves.
        for t, g in grads.values():
            t.grad = g if t.grad is None else t.grad + g


class no_grad:
    """Context that suspends recording (used for inference and FD probes)."""

    def __enter__(self):
        self._prev = _active_tape()
        _tls.tape = None
        return self

    def __exit__(self, *exc):
        _tls.tape = self._prev
        del self._prev


def _check_finite(name: str, arr: np.ndarray) -> None:
    if not np.isfinite(arr).all():
        raise NonFiniteError(f"{name} produced non-finite values")


def _make(name: str, data: np.ndarray, inputs: Iterable[Tensor], bw: Callable) -> Tensor:
    """Wrap op output, run the finiteness guard, and record on the tape."""
    _check_finite(name, data)
    out = Tensor(data, requires_grad=any(t.requires_grad for t in inputs))
    tape = _active_tape()
    if tape is not None and out.requires_grad:
        tape._nodes.append((out, name, bw))
    return out


def constant(data) -> Tensor:
    return Tensor(data, requires_grad=False)


def parameter(data) -> Tensor:
    return Tensor(data, requires_grad=True)


# ---------------------------------------------------------------------------
# elementwise / structural ops


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum. ``b`` may also be a trailing-shape bias (broadcast
    over leading axes); no other broadcasting is supported."""
    if a.shape != b.shape and a.shape[a.data.ndim - b.data.ndim :] != b.shape:
        raise ShapeError(f"add: shapes {a.shape} and {b.shape} are not compatible")
    data = a.data + b.data

    def bw(g, acc):
        acc(a, g)
        if b.shape == a.shape:
            acc(b, g)
        else:
            axes = tuple(range(a.data.ndim - b.data.ndim))
            acc(b, g.sum(axis=axes))

    return _make("add", data, (a, b), bw)


def add_scalar(x: Tensor, c: float) -> Tensor:
    def bw(g, acc):
        acc(x, g)

    return _make("add_scalar", x.data + c, (x,), bw)


def scale(x: Tensor, c: float) -> Tensor:
    def bw(g, acc):
        acc(x, g * c)

    return _make("scale", x.data * c, (x,), bw)


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"mul: shapes {a.shape} and {b.shape} differ")

    def bw(g, acc):
        acc(a, g * b.data)
        acc(b, g * a.data)

    return _make("mul", a.data * b.data, (a, b), bw)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: cannot multiply {a.shape} by {b.shape}")

    def bw(g, acc):
        acc(a, g @ b.data.T)
        acc(b, a.data.T @ g)

    return _make("matmul", a.data @ b.data, (a, b), bw)


def transpose2d(x: Tensor) -> Tensor:
    if x.data.ndim != 2:
        raise ShapeError(f"transpose2d: expected 2-d tensor, got {x.shape}")

    def bw(g, acc):
        acc(x, g.T)

    return _make("transpose2d", x.data.T.copy(), (x,), bw)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(shape)

    def bw(g, acc):
        acc(x, g.reshape(x.shape))

    return _make("reshape", x.data.reshape(shape).copy(), (x,), bw)


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not parts:
        raise ShapeError("concat: empty input list")
    data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.shape[axis] for p in parts]

    def bw(g, acc):
        offset = 0
        for p, s in zip(parts, sizes):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(offset, offset + s)
            acc(p, g[tuple(sl)])
            offset += s

    return _make("concat", data, tuple(parts), bw)


def repeat_rows(x: Tensor, k: int) -> Tensor:
    """Repeat each row of a 2-d tensor ``k`` times (gradient sums back)."""
    if x.data.ndim != 2:
        raise ShapeError(f"repeat_rows: expected 2-d tensor, got {x.shape}")
    n, d = x.shape

    def bw(g, acc):
        acc(x, g.reshape(n, k, d).sum(axis=1))

    return _make("repeat_rows", np.repeat(x.data, k, axis=0), (x,), bw)


def sum_all(x: Tensor) -> Tensor:
    def bw(g, acc):
        acc(x, np.full(x.shape, float(g.reshape(()))))

    return _make("sum_all", np.asarray(x.data.sum()), (x,), bw)


# ---------------------------------------------------------------------------
# nonlinearities


def relu(x: Tensor) -> Tensor:
    data = np.maximum(x.data, 0.0)

    def bw(g, acc):
        acc(x, g * (x.data > 0.0))

    return _make("relu", data, (x,), bw)


def sigmoid(x: Tensor) -> Tensor:
    data = 1.0 / (1.0 + np.exp(-x.data))

    def bw(g, acc):
        acc(x, g * data * (1.0 - data))

    return _make("sigmoid", data, (x,), bw)


def tanh(x: Tensor) -> Tensor:
    data = np.tanh(x.data)

    def bw(g, acc):
        acc(x, g * (1.0 - data * data))

    return _make("tanh", data, (x,), bw)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    if not -x.data.ndim <= axis < x.data.ndim:
        raise ShapeError(f"softmax: axis {axis} invalid for shape {x.shape}")
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=axis, keepdims=True)

    def bw(g, acc):
        dot = (g * data).sum(axis=axis, keepdims=True)
        acc(x, data * (g - dot))

    return _make("softmax", data, (x,), bw)


def layernorm(x: Tensor, gain: Tensor, bias: Tensor, epsilon: float = 1e-5) -> Tensor:
    """Zero-mean unit-variance over the last axis, then affine."""
    dim = x.shape[-1]
    if gain.shape != (dim,) or bias.shape != (dim,):
        raise ShapeError(
            f"layernorm: gain {gain.shape} / bias {bias.shape} do not match last dim {dim}"
        )
    mean = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + epsilon)
    xhat = (x.data - mean) * inv
    data = xhat * gain.data + bias.data

    def bw(g, acc):
        lead = tuple(range(g.ndim - 1))
        acc(gain, (g * xhat).sum(axis=lead))
        acc(bias, g.sum(axis=lead))
        dxhat = g * gain.data
        acc(
            x,
            (inv / dim)
            * (
                dim * dxhat
                - dxhat.sum(axis=-1, keepdims=True)
                - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True)
            ),
        )

    return _make("layernorm", data, (x, gain, bias), bw)


# ---------------------------------------------------------------------------
# linear algebra composites


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Rows-as-samples affine map: ``x @ weight.T + bias``.

    weight: [out_dim, in_dim], bias: [out_dim].
    """
    if x.data.ndim != 2 or weight.data.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise ShapeError(f"linear: x {x.shape} incompatible with weight {weight.shape}")
    data = x.data @ weight.data.T
    if bias is not None:
        data = data + bias.data

    def bw(g, acc):
        acc(x, g @ weight.data)
        acc(weight, g.T @ x.data)
        if bias is not None:
            acc(bias, g.sum(axis=0))

    inputs = (x, weight) if bias is None else (x, weight, bias)
    return _make("linear", data, inputs, bw)


def embedding(table: Tensor, ids: Sequence[int]) -> Tensor:
    idx = np.asarray(ids, dtype=np.intp)
    if idx.ndim != 1:
        raise ShapeError("embedding: ids must be a flat sequence")
    if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
        raise ShapeError(
            f"embedding: id out of range [0, {table.shape[0]}): {int(idx.min())}..{int(idx.max())}"
        )

    def bw(g, acc):
        dt = np.zeros_like(table.data)
        np.add.at(dt, idx, g)
        acc(table, dt)

    return _make("embedding", table.data[idx].copy(), (table,), bw)


def cross_entropy(logits: Tensor, targets: Sequence[int], ignore_index: int = -1) -> Tensor:
    """Mean negative log-softmax probability of targets over non-ignored rows."""
    if logits.data.ndim != 2:
        raise ShapeError(f"cross_entropy: logits must be 2-d, got {logits.shape}")
    t = np.asarray(targets, dtype=np.intp)
    if t.shape != (logits.shape[0],):
        raise ShapeError(
            f"cross_entropy: {logits.shape[0]} rows of logits vs {t.shape} targets"
        )
    valid = t != ignore_index
    n_valid = int(valid.sum())
    if n_valid == 0:
        raise ShapeError("cross_entropy: every position is ignored, loss is undefined")
    bad = t[valid]
    if bad.min() < 0 or bad.max() >= logits.shape[1]:
        raise ShapeError(f"cross_entropy: target class out of range [0, {logits.shape[1]})")

    z = logits.data
    m = z.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(z - m).sum(axis=1))
    rows = np.nonzero(valid)[0]
    nll = lse[rows] - z[rows, t[rows]]
    data = np.asarray(nll.sum() / n_valid)

    def bw(g, acc):
        gs = float(g.reshape(()))
        p = np.exp(z[rows] - lse[rows, None])
        p[np.arange(rows.size), t[rows]] -= 1.0
        dz = np.zeros_like(z)
        dz[rows] = p * (gs / n_valid)
        acc(logits, dz)

    return _make("cross_entropy", data, (logits,), bw)


# ---------------------------------------------------------------------------
# convolutional ops (channels-last; single image [h,w,c] or batch [n,h,w,c])


def _as_batch(x: Tensor) -> tuple[np.ndarray, bool]:
    if x.data.ndim == 3:
        return x.data[None], True
    if x.data.ndim == 4:
        return x.data, False
    raise ShapeError(f"expected [h,w,c] or [n,h,w,c], got {x.shape}")


def conv2d(x: Tensor, kernel: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation with zero padding.

    kernel: [kh, kw, c_in, c_out] with kh, kw in {1, 3}.
    """
    xd, squeeze = _as_batch(x)
    if kernel.data.ndim != 4:
        raise ShapeError(f"conv2d: kernel must be [kh,kw,cin,cout], got {kernel.shape}")
    kh, kw, cin, cout = kernel.shape
    if kh not in (1, 3) or kw not in (1, 3):
        raise ConfigError(f"conv2d: kernel size {kh}x{kw} unsupported (must be 1 or 3)")
    if stride < 1 or padding < 0:
        raise ConfigError(f"conv2d: stride {stride} / padding {padding} invalid")
    n, h, w, cx = xd.shape
    if cx != cin:
        raise ShapeError(f"conv2d: input channels {cx} != kernel channels {cin}")
    oh = (h + 2 * padding - kh) // stride + 1
    ow = (w + 2 * padding - kw) // stride + 1
    if oh < 1 or ow < 1:
        raise ConfigError(
            f"conv2d: output size {oh}x{ow} collapses (input {h}x{w}, kernel {kh}x{kw}, "
            f"stride {stride}, padding {padding})"
        )

    wmat = kernel.data.reshape(kh * kw * cin, cout)
    if kh == kw == 1 and stride == 1 and padding == 0:
        cols = xd.reshape(n * h * w, cin)
        data = (cols @ wmat).reshape(n, oh, ow, cout)

        def bw(g, acc):
            g2 = g.reshape(n * oh * ow, cout)
            acc(kernel, (cols.T @ g2).reshape(kernel.shape))
            dx = (g2 @ wmat.T).reshape(n, h, w, cin)
            acc(x, dx[0] if squeeze else dx)

    else:
        xp = (
            np.pad(xd, ((0, 0), (padding, padding), (padding, padding), (0, 0)))
            if padding
            else xd
        )
        hp, wp = xp.shape[1], xp.shape[2]
        cols = kernels.im2col(xp, kh, kw, stride, stride, oh, ow)
        data = (cols @ wmat).reshape(n, oh, ow, cout)

        def bw(g, acc):
            g2 = g.reshape(n * oh * ow, cout)
            acc(kernel, (cols.T @ g2).reshape(kernel.shape))
            dcols = g2 @ wmat.T
            dxp = kernels.col2im(dcols, n, hp, wp, cin, kh, kw, stride, stride, oh, ow)
            dx = dxp[:, padding : padding + h, padding : padding + w, :] if padding else dxp
            acc(x, dx[0] if squeeze else dx)

    if squeeze:
        data = data[0]
    return _make("conv2d", data, (x, kernel), bw)


def maxpool2d(x: Tensor) -> Tensor:
    """2x2 stride-2 max pooling (spatial dims must be even)."""
    xd, squeeze = _as_batch(x)
    n, h, w, c = xd.shape
    if h % 2 or w % 2:
        raise ConfigError(f"maxpool2d: spatial size {h}x{w} not divisible by 2")
    data, idx = kernels.maxpool2_forward(np.ascontiguousarray(xd))

    def bw(g, acc):
        dx = kernels.maxpool2_backward(np.ascontiguousarray(g.reshape(data.shape)), idx)
        acc(x, dx[0] if squeeze else dx)

    return _make("maxpool2d", data[0] if squeeze else data, (x,), bw)


def avgpool_global(x: Tensor) -> Tensor:
    """Average over the full spatial extent: [n,h,w,c] -> [n,c] (or [h,w,c] -> [c])."""
    xd, squeeze = _as_batch(x)
    n, h, w, c = xd.shape
    data = xd.mean(axis=(1, 2))

    def bw(g, acc):
        g4 = g.reshape(n, 1, 1, c)
        dx = np.broadcast_to(g4 / (h * w), (n, h, w, c)).copy()
        acc(x, dx[0] if squeeze else dx)

    return _make("avgpool_global", data[0] if squeeze else data, (x,), bw)


class BatchNormState:
    """Running statistics for one batchnorm layer (not differentiated)."""

    __slots__ = ("mean", "var")

    def __init__(self, channels: int):
        self.mean = np.zeros(channels, dtype=np.float64)
        self.var = np.ones(channels, dtype=np.float64)


def batchnorm2d(
    x: Tensor,
    gain: Tensor,
    bias: Tensor,
    state: BatchNormState,
    training: bool,
    momentum: float = 0.1,
    epsilon: float = 1e-5,
) -> Tensor:
    """Per-channel batch normalization over (batch, height, width).

    Train mode normalizes by batch statistics and updates the running
    buffers in place; eval mode is a fixed affine map from the running
    buffers (deterministic and bit-stable across calls).
    """
    xd, squeeze = _as_batch(x)
    c = xd.shape[3]
    if gain.shape != (c,) or bias.shape != (c,):
        raise ShapeError(f"batchnorm2d: gain/bias must be [{c}]")

    if training:
        axes = (0, 1, 2)
        mean = xd.mean(axis=axes)
        var = xd.var(axis=axes)
        inv = 1.0 / np.sqrt(var + epsilon)
        xhat = (xd - mean) * inv
        data = xhat * gain.data + bias.data
        state.mean *= 1.0 - momentum
        state.mean += momentum * mean
        state.var *= 1.0 - momentum
        state.var += momentum * var
        count = xd.shape[0] * xd.shape[1] * xd.shape[2]

        def bw(g, acc):
            g4 = g.reshape(xd.shape)
            acc(gain, (g4 * xhat).sum(axis=axes))
            acc(bias, g4.sum(axis=axes))
            dxhat = g4 * gain.data
            dx = (inv / count) * (
                count * dxhat
                - dxhat.sum(axis=axes)
                - xhat * (dxhat * xhat).sum(axis=axes)
            )
            acc(x, dx[0] if squeeze else dx)

    else:
        inv = 1.0 / np.sqrt(state.var + epsilon)
        data = (xd - state.mean) * inv * gain.data + bias.data
        xhat_eval = (xd - state.mean) * inv

        def bw(g, acc):
            g4 = g.reshape(xd.shape)
            acc(gain, (g4 * xhat_eval).sum(axis=(0, 1, 2)))
            acc(bias, g4.sum(axis=(0, 1, 2)))
            dx = g4 * (gain.data * inv)
            acc(x, dx[0] if squeeze else dx)

    return _make("batchnorm2d", data[0] if squeeze else data, (x, gain, bias), bw)


# ---------------------------------------------------------------------------
# gradient verification


def fd_check(f: Callable[[Tensor], Tensor], x: Tensor, step: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    Relative error per element is |analytic - numeric| / max(1, |analytic|);
    the maximum over all elements of ``x`` is returned. ``f`` must map ``x``
    to a scalar tensor and be deterministic.
    """
    if not x.requires_grad:
        raise ShapeError("fd_check: x must have requires_grad=True")
    x.grad = None
    with Tape() as tape:
        y = f(x)
    if y.data.size != 1:
        raise ShapeError(f"fd_check: f must be scalar-valued, got shape {y.shape}")
    tape.backward(y)
    analytic = np.zeros_like(x.data) if x.grad is None else x.grad.copy()

    flat = x.data.reshape(-1)
    numeric = np.empty(flat.size, dtype=np.float64)
    with no_grad():
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            fp = f(x).item()
            flat[i] = orig - step
            fm = f(x).item()
            flat[i] = orig
            numeric[i] = (fp - fm) / (2.0 * step)
    a = analytic.reshape(-1)
    rel = np.abs(a - numeric) / np.maximum(1.0, np.abs(a))
    return float(rel.max())
