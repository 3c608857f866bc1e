"""Dense tensors with reverse-mode automatic differentiation.

Values live in numpy buffers (float32 for training, float64 for tests); each
op records a backward closure, and ``backward`` walks the recorded graph in
reverse topological order with a fixed accumulation order, so identical
inputs always produce bit-identical gradients.
"""

from __future__ import annotations

import json
import struct
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .errors import IoError, NotScalar, ShapeMismatch, VersionMismatch


class Tensor:
    __slots__ = ("values", "grad", "parents", "backward_fn", "requires_grad", "name")

    def __init__(self, values, requires_grad: bool = False,
                 parents: tuple = (), backward_fn: Optional[Callable] = None,
                 name: Optional[str] = None):
        self.values = np.asarray(values)
        self.grad: Optional[np.ndarray] = None
        self.parents = parents
        self.backward_fn = backward_fn
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self.name = name

    @property
    def shape(self):
        return self.values.shape

    @property
    def dtype(self):
        return self.values.dtype

    def item(self) -> float:
        return float(self.values)

    def detach(self) -> "Tensor":
        return Tensor(self.values)

    def __repr__(self):
        return f"Tensor(shape={self.values.shape}, grad={'set' if self.grad is not None else 'none'})"


def tensor(values, dtype=np.float64) -> Tensor:
    """A constant (non-differentiable) tensor."""
    return Tensor(np.asarray(values, dtype=dtype))


def parameter(values, name: Optional[str] = None, dtype=None) -> Tensor:
    arr = np.asarray(values)
    if dtype is not None:
        arr = arr.astype(dtype)
    return Tensor(arr, requires_grad=True, name=name)


def _as_tensor(x, like: Tensor) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=like.dtype))


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcasted gradient back to the operand's shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


def _op(values, parents, backward_fn) -> Tensor:
    for p in parents:
        if p.requires_grad:
            return Tensor(values, requires_grad=True, parents=tuple(parents),
                          backward_fn=backward_fn)
    return Tensor(values)


# -- arithmetic -------------------------------------------------------------

def add(a: Tensor, b) -> Tensor:
    b = _as_tensor(b, a)
    try:
        out = a.values + b.values
    except ValueError:
        raise ShapeMismatch(f"add: {a.shape} vs {b.shape}") from None

    def back(g):
        return (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape))
    return _op(out, (a, b), back)


def neg(a: Tensor) -> Tensor:
    return _op(-a.values, (a,), lambda g: (-g,))


def sub(a: Tensor, b) -> Tensor:
    return add(a, neg(_as_tensor(b, a)))


def hadamard(a: Tensor, b) -> Tensor:
    """Elementwise product with broadcasting."""
    b = _as_tensor(b, a)
    try:
        out = a.values * b.values
    except ValueError:
        raise ShapeMismatch(f"hadamard: {a.shape} vs {b.shape}") from None

    def back(g):
        return (_unbroadcast(g * b.values, a.shape), _unbroadcast(g * a.values, b.shape))
    return _op(out, (a, b), back)


def scale(a: Tensor, s: float) -> Tensor:
    return _op(a.values * s, (a,), lambda g: (g * s,))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.values.ndim != 2 or b.values.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"matmul: {a.shape} vs {b.shape}")
    out = a.values @ b.values

    def back(g):
        return (g @ b.values.T, a.values.T @ g)
    return _op(out, (a, b), back)


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    out = np.concatenate([p.values for p in parts], axis=axis)
    sizes = [p.shape[axis] for p in parts]

    def back(g):
        return tuple(np.split(g, np.cumsum(sizes)[:-1], axis=axis))
    return _op(out, tuple(parts), back)


def reshape(a: Tensor, shape) -> Tensor:
    orig = a.shape
    return _op(a.values.reshape(shape), (a,), lambda g: (g.reshape(orig),))


def sum_reduce(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = a.values.sum(axis=axis, keepdims=keepdims)

    def back(g):
        g = np.asarray(g)
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape),)
    return _op(out, (a,), back)


def mean_all(a: Tensor) -> Tensor:
    return scale(sum_reduce(a), 1.0 / a.values.size)


# -- nonlinearities ---------------------------------------------------------

def relu(a: Tensor) -> Tensor:
    mask = a.values > 0
    return _op(np.where(mask, a.values, 0), (a,), lambda g: (g * mask,))


def leaky_relu(a: Tensor, slope: float = 0.01) -> Tensor:
    mask = a.values > 0
    out = np.where(mask, a.values, slope * a.values)
    return _op(out, (a,), lambda g: (g * np.where(mask, 1.0, slope).astype(a.dtype),))


def elu(a: Tensor) -> Tensor:
    pos = a.values > 0
    out = np.where(pos, a.values, np.expm1(a.values))
    return _op(out, (a,), lambda g: (g * np.where(pos, 1.0, np.exp(a.values)).astype(a.dtype),))


def signed_sqrt_relu(a: Tensor) -> Tensor:
    """sqrt(relu(x)) - sqrt(relu(-x)), i.e. sign(x) * sqrt(|x|).

    The derivative diverges at 0; it is clamped to 0 there so training stays
    finite.
    """
    absv = np.abs(a.values)
    out = np.sign(a.values) * np.sqrt(absv)

    def back(g):
        d = np.zeros_like(a.values)
        nz = absv > 0
        d[nz] = 0.5 / np.sqrt(absv[nz])
        return (g * d,)
    return _op(out, (a,), back)


def softmax(a: Tensor) -> Tensor:
    """Numerically stable softmax over the last axis."""
    shifted = a.values - a.values.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)

    def back(g):
        dot = (g * out).sum(axis=-1, keepdims=True)
        return ((g - dot) * out,)
    return _op(out, (a,), back)


def clip_min(a: Tensor, floor: float) -> Tensor:
    mask = a.values > floor
    return _op(np.maximum(a.values, floor), (a,), lambda g: (g * mask,))


def log(a: Tensor) -> Tensor:
    return _op(np.log(a.values), (a,), lambda g: (g / a.values,))


def dropout(a: Tensor, rate: float, rng: Optional[np.random.Generator] = None,
            training: bool = True, mask: Optional[np.ndarray] = None) -> Tensor:
    """Inverted dropout; identity when evaluating or rate == 0."""
    if not training or rate <= 0.0:
        return a
    if mask is None:
        if rng is None:
            raise ValueError("dropout in training mode needs an rng or explicit mask")
        mask = (rng.random(a.shape) >= rate) / (1.0 - rate)
    mask = mask.astype(a.dtype, copy=False)
    return _op(a.values * mask, (a,), lambda g: (g * mask,))


# -- backward pass ----------------------------------------------------------

def _topo_order(root: Tensor) -> list[Tensor]:
    order, seen, stack = [], set(), [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor, params: Optional[Iterable[Tensor]] = None) -> None:
    """Fill .grad on every tensor reachable from ``loss``.

    Accumulation across shared subexpressions sums; parameters passed in
    ``params`` that the loss never touched get explicit zero gradients.
    """
    if loss.values.size != 1:
        raise NotScalar(f"backward needs a scalar loss, got shape {loss.shape}")
    order = _topo_order(loss)
    loss.grad = np.ones_like(loss.values)
    for node in reversed(order):
        if node.backward_fn is None or node.grad is None:
            continue
        for parent, g in zip(node.parents, node.backward_fn(node.grad)):
            if not parent.requires_grad:
                continue
            g = np.asarray(g, dtype=parent.dtype)
            # grads are never mutated in place, so views are safe to hold
            parent.grad = g if parent.grad is None else parent.grad + g
    if params is not None:
        for p in params:
            if p.grad is None:
                p.grad = np.zeros_like(p.values)


def zero_grads(params: Iterable[Tensor]) -> None:
    for p in params:
        p.grad = None


def finite_diff_check(f: Callable[[], Tensor], params: Sequence[Tensor],
                      eps: float = 1e-5) -> float:
    """Max relative error between analytic gradients and central differences.

    ``f`` rebuilds and returns the scalar loss from the current parameter
    values; parameters are perturbed in place one coordinate at a time.
    """
    zero_grads(params)
    loss = f()
    backward(loss, params)
    analytic = [p.grad.copy() for p in params]

    worst = 0.0
    for p, ga in zip(params, analytic):
        flat = p.values.reshape(-1)
        gflat = ga.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = float(f().values)
            flat[i] = orig - eps
            lo = float(f().values)
            flat[i] = orig
            numeric = (hi - lo) / (2.0 * eps)
            err = abs(gflat[i] - numeric) / max(1e-8, abs(gflat[i]) + abs(numeric))
            worst = max(worst, err)
    return worst


# -- checkpoint format ------------------------------------------------------

_CKPT_MAGIC = b"LMCK"
_CKPT_VERSION = 1
_DTYPE_CODES = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}
_CODE_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}


def save_checkpoint(path: str, params: dict[str, Tensor], config: dict) -> None:
    """Write named parameter buffers plus a JSON config trailer."""
    blob = bytearray()
    blob += _CKPT_MAGIC
    blob += struct.pack("<II", _CKPT_VERSION, len(params))
    for name, p in params.items():
        raw = name.encode("utf-8")
        blob += struct.pack("<H", len(raw)) + raw
        blob += struct.pack("<BB", _DTYPE_CODES[p.values.dtype], p.values.ndim)
        for d in p.values.shape:
            blob += struct.pack("<I", d)
        blob += np.ascontiguousarray(p.values).astype(p.values.dtype.newbyteorder("<")).tobytes()
    cfg = json.dumps(config, sort_keys=True).encode("utf-8")
    blob += struct.pack("<I", len(cfg)) + cfg
    try:
        with open(path, "wb") as fh:
            fh.write(bytes(blob))
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from None


def load_checkpoint(path: str) -> tuple[dict[str, np.ndarray], dict]:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from None
    if data[:4] != _CKPT_MAGIC:
        raise VersionMismatch("not a checkpoint file")
    version, count = struct.unpack_from("<II", data, 4)
    if version != _CKPT_VERSION:
        raise VersionMismatch(f"unsupported checkpoint version {version}")
    pos = 12
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", data, pos); pos += 2
        name = data[pos:pos + nlen].decode("utf-8"); pos += nlen
        code, ndim = struct.unpack_from("<BB", data, pos); pos += 2
        dims = struct.unpack_from(f"<{ndim}I", data, pos); pos += 4 * ndim
        dt = _CODE_DTYPES[code]
        n = int(np.prod(dims)) if ndim else 1
        arr = np.frombuffer(data, dtype=dt, count=n, offset=pos).reshape(dims)
        pos += n * dt.itemsize
        out[name] = arr.astype(dt.newbyteorder("="))
    (clen,) = struct.unpack_from("<I", data, pos); pos += 4
    config = json.loads(data[pos:pos + clen].decode("utf-8"))
    return out, config
