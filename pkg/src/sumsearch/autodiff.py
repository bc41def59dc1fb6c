"""Dense 2-D arrays with reverse-mode automatic differentiation.

The engine is deliberately small: matrices only (batches and vectors are
folded into rows), eager forward evaluation, and an implicit tape built from
parent links. Gradients are accumulated by a single reverse-topological walk
from a scalar loss. Float32 is the working precision; switch to float64 via
:func:`set_default_dtype` when running finite-difference checks.
"""

from __future__ import annotations

import struct

import numpy as np

_DEFAULT_DTYPE = np.dtype(np.float32)

CHECKPOINT_MAGIC = b"TS3W"
CHECKPOINT_VERSION = 1


def set_default_dtype(dtype) -> None:
    """Set the dtype for newly created arrays (float32 or float64)."""
    global _DEFAULT_DTYPE
    dt = np.dtype(dtype)
    if dt not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ValueError(f"unsupported dtype {dtype!r}; use float32 or float64")
    _DEFAULT_DTYPE = dt


def default_dtype() -> np.dtype:
    return _DEFAULT_DTYPE


class DiffArray:
    """A 2-D float array that remembers how it was computed.

    ``grad`` is populated by :func:`backward` and always matches the shape of
    ``values``. Creating an array with NaN or Inf raises immediately, so a
    diverging computation fails at the op that produced it.
    """

    __slots__ = ("values", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, values, requires_grad: bool = False, _parents=(), _backward=None):
        arr = np.asarray(values, dtype=_DEFAULT_DTYPE)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        if arr.ndim != 2:
            raise ValueError(f"DiffArray must be 2-D, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise FloatingPointError("non-finite values in DiffArray")
        self.values = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = tuple(_parents)
        self._backward = _backward

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def item(self) -> float:
        if self.values.size != 1:
            raise ValueError(f"item() needs a 1x1 array, got {self.shape}")
        return float(self.values[0, 0])

    def detach(self) -> "DiffArray":
        """A constant copy that does not participate in the graph."""
        return DiffArray(self.values.copy())

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"DiffArray(shape={self.shape}{flag})"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return mul(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def parameter(values) -> DiffArray:
    """A trainable leaf array."""
    return DiffArray(values, requires_grad=True)


def constant(values) -> DiffArray:
    return DiffArray(values)


# ---------------------------------------------------------------------------
# graph walking


def _toposort(root: DiffArray) -> list[DiffArray]:
    """Iterative post-order: inputs appear before the nodes that use them."""
    order: list[DiffArray] = []
    visited: set[int] = set()
    stack: list[tuple[DiffArray, bool]] = [(root, False)]
    while stack:
        node, emitted = stack.pop()
        if emitted:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


def backward(loss: DiffArray) -> None:
    """Populate ``grad`` on every array the scalar ``loss`` depends on.

    Raises if a reachable array still carries a gradient from an earlier
    call; reset parameters with :func:`zero_grads` between steps.
    """
    if loss.shape != (1, 1):
        raise ValueError(f"backward needs a 1x1 loss, got shape {loss.shape}")
    order = _toposort(loss)
    for node in order:
        if node.grad is not None:
            raise RuntimeError("gradients already populated; call zero_grads before the next backward")
    loss.grad = np.ones((1, 1), dtype=loss.values.dtype)
    for node in reversed(order):
        if node.grad is None or node._backward is None:
            continue
        contributions = node._backward(node.grad)
        for parent, contrib in zip(node._parents, contributions):
            if contrib is None:
                continue
            if not (parent.requires_grad or parent._parents):
                continue  # plain constants never need gradients
            if parent.grad is None:
                parent.grad = contrib
            else:
                parent.grad = parent.grad + contrib


def zero_grads(params) -> None:
    for p in params:
        p.grad = None


# ---------------------------------------------------------------------------
# elementwise and structural ops


def _unbroadcast(g: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    if g.shape == shape:
        return g
    out = g
    if shape[0] == 1 and out.shape[0] != 1:
        out = out.sum(axis=0, keepdims=True)
    if shape[1] == 1 and out.shape[1] != 1:
        out = out.sum(axis=1, keepdims=True)
    return out


def _check_broadcast(a: DiffArray, b: DiffArray, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ValueError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


def add(a: DiffArray, b: DiffArray) -> DiffArray:
    _check_broadcast(a, b, "add")

    def back(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return DiffArray(a.values + b.values, _parents=(a, b), _backward=back)


def sub(a: DiffArray, b: DiffArray) -> DiffArray:
    _check_broadcast(a, b, "sub")

    def back(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return DiffArray(a.values - b.values, _parents=(a, b), _backward=back)


def mul(a: DiffArray, b: DiffArray) -> DiffArray:
    _check_broadcast(a, b, "mul")

    def back(g):
        return _unbroadcast(g * b.values, a.shape), _unbroadcast(g * a.values, b.shape)

    return DiffArray(a.values * b.values, _parents=(a, b), _backward=back)


def scale(a: DiffArray, s: float) -> DiffArray:
    def back(g):
        return (g * s,)

    return DiffArray(a.values * s, _parents=(a,), _backward=back)


def matmul(a: DiffArray, b: DiffArray) -> DiffArray:
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} x {b.shape}")

    def back(g):
        return g @ b.values.T, a.values.T @ g

    return DiffArray(a.values @ b.values, _parents=(a, b), _backward=back)


def transpose(a: DiffArray) -> DiffArray:
    def back(g):
        return (g.T,)

    return DiffArray(a.values.T, _parents=(a,), _backward=back)


def relu(a: DiffArray) -> DiffArray:
    mask = a.values > 0

    def back(g):
        return (g * mask,)

    return DiffArray(np.where(mask, a.values, 0.0), _parents=(a,), _backward=back)


def tanh(a: DiffArray) -> DiffArray:
    y = np.tanh(a.values)

    def back(g):
        return (g * (1.0 - y * y),)

    return DiffArray(y, _parents=(a,), _backward=back)


def exp(a: DiffArray) -> DiffArray:
    y = np.exp(a.values)

    def back(g):
        return (g * y,)

    return DiffArray(y, _parents=(a,), _backward=back)


def log(a: DiffArray) -> DiffArray:
    if (a.values <= 0).any():
        raise FloatingPointError("log of non-positive value")

    def back(g):
        return (g / a.values,)

    return DiffArray(np.log(a.values), _parents=(a,), _backward=back)


def sum_all(a: DiffArray) -> DiffArray:
    def back(g):
        return (np.full_like(a.values, g[0, 0]),)

    return DiffArray(a.values.sum().reshape(1, 1), _parents=(a,), _backward=back)


def mean_all(a: DiffArray) -> DiffArray:
    n = a.values.size

    def back(g):
        return (np.full_like(a.values, g[0, 0] / n),)

    return DiffArray(a.values.mean().reshape(1, 1), _parents=(a,), _backward=back)


def mean_rows(a: DiffArray) -> DiffArray:
    """Column-wise mean over rows: (L, d) -> (1, d)."""
    n = a.shape[0]

    def back(g):
        return (np.repeat(g / n, n, axis=0),)

    return DiffArray(a.values.mean(axis=0, keepdims=True), _parents=(a,), _backward=back)


def concat_rows(arrays) -> DiffArray:
    arrays = list(arrays)
    if not arrays:
        raise ValueError("concat_rows of empty list")
    widths = {a.shape[1] for a in arrays}
    if len(widths) != 1:
        raise ValueError(f"concat_rows: mixed column counts {sorted(widths)}")
    sizes = [a.shape[0] for a in arrays]
    offsets = np.cumsum([0] + sizes)

    def back(g):
        return tuple(g[offsets[i]:offsets[i + 1]] for i in range(len(arrays)))

    return DiffArray(np.vstack([a.values for a in arrays]), _parents=tuple(arrays), _backward=back)


def concat_cols(arrays) -> DiffArray:
    arrays = list(arrays)
    if not arrays:
        raise ValueError("concat_cols of empty list")
    heights = {a.shape[0] for a in arrays}
    if len(heights) != 1:
        raise ValueError(f"concat_cols: mixed row counts {sorted(heights)}")
    sizes = [a.shape[1] for a in arrays]
    offsets = np.cumsum([0] + sizes)

    def back(g):
        return tuple(g[:, offsets[i]:offsets[i + 1]] for i in range(len(arrays)))

    return DiffArray(np.hstack([a.values for a in arrays]), _parents=tuple(arrays), _backward=back)


def take_rows(table: DiffArray, ids) -> DiffArray:
    """Row gather, the embedding lookup. Gradient scatter-adds into the table."""
    idx = np.asarray(ids, dtype=np.int64)
    if idx.ndim != 1 or idx.size == 0:
        raise ValueError("take_rows needs a non-empty 1-D index list")
    if (idx < 0).any() or (idx >= table.shape[0]).any():
        raise ValueError(f"row index out of range for table with {table.shape[0]} rows")

    def back(g):
        buf = np.zeros_like(table.values)
        np.add.at(buf, idx, g)
        return (buf,)

    return DiffArray(table.values[idx], _parents=(table,), _backward=back)


# ---------------------------------------------------------------------------
# row-normalizing ops


def softmax_rows(a: DiffArray) -> DiffArray:
    """Per-row softmax with max-subtraction for stability."""
    shifted = a.values - a.values.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=1, keepdims=True)

    def back(g):
        dot = (g * y).sum(axis=1, keepdims=True)
        return (y * (g - dot),)

    return DiffArray(y, _parents=(a,), _backward=back)


def log_softmax_rows(a: DiffArray) -> DiffArray:
    """Per-row log-softmax; stable even when probabilities underflow."""
    m = a.values.max(axis=1, keepdims=True)
    shifted = a.values - m
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True)) + m
    y = a.values - lse
    sm = np.exp(y)

    def back(g):
        return (g - sm * g.sum(axis=1, keepdims=True),)

    return DiffArray(y, _parents=(a,), _backward=back)


def layer_norm(a: DiffArray, gain: DiffArray, bias: DiffArray, eps: float = 1e-5) -> DiffArray:
    """Per-row normalization to zero mean / unit variance, then affine."""
    cols = a.shape[1]
    if gain.shape != (1, cols) or bias.shape != (1, cols):
        raise ValueError(f"layer_norm: gain/bias must be 1x{cols}, got {gain.shape} and {bias.shape}")
    mu = a.values.mean(axis=1, keepdims=True)
    var = ((a.values - mu) ** 2).mean(axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (a.values - mu) * inv

    def back(g):
        dgain = (g * xhat).sum(axis=0, keepdims=True)
        dbias = g.sum(axis=0, keepdims=True)
        dxhat = g * gain.values
        dx = inv * (
            dxhat
            - dxhat.mean(axis=1, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=1, keepdims=True)
        )
        return dx, dgain, dbias

    return DiffArray(xhat * gain.values + bias.values, _parents=(a, gain, bias), _backward=back)


# ---------------------------------------------------------------------------
# optimizer


class OptimState:
    """Per-parameter squared-gradient accumulators for diagonal AdaGrad."""

    def __init__(self, params: dict[str, DiffArray], learning_rate: float = 0.01, epsilon: float = 1e-8):
        self.learning_rate = float(learning_rate)
        self.epsilon = float(epsilon)
        self.accum = {name: np.zeros_like(p.values) for name, p in params.items()}


def adagrad_step(params: dict[str, DiffArray], state: OptimState) -> None:
    """p -= lr * g / (sqrt(sum g^2) + eps), applied in place.

    Parameters with no gradient are left untouched (their accumulators too).
    """
    for name, p in params.items():
        if p.grad is None:
            continue
        acc = state.accum.get(name)
        if acc is None or acc.shape != p.grad.shape:
            raise ValueError(f"optimizer state does not match parameter {name!r}")
        g = p.grad
        acc += g * g
        denom = np.sqrt(acc) + state.epsilon
        update = np.divide(g, denom, out=np.zeros_like(g), where=g != 0)
        p.values -= state.learning_rate * update
        if not np.isfinite(p.values).all():
            raise FloatingPointError(f"non-finite values in parameter {name!r} after update")


# ---------------------------------------------------------------------------
# checkpoint serialization
#
# Layout: magic "TS3W", format version u32, array count u32, then per array
# name length u32 + UTF-8 name, rows u32, cols u32, row-major little-endian
# float32 payload. Arrays are written sorted by name.


def save_arrays(path, arrays: dict[str, np.ndarray]) -> None:
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<I", CHECKPOINT_VERSION))
        f.write(struct.pack("<I", len(arrays)))
        for name in sorted(arrays):
            arr = np.ascontiguousarray(arrays[name], dtype="<f4")
            if arr.ndim != 2:
                raise ValueError(f"checkpoint arrays must be 2-D, got {arr.ndim}-D for {name!r}")
            encoded = name.encode("utf-8")
            f.write(struct.pack("<I", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<II", arr.shape[0], arr.shape[1]))
            f.write(arr.tobytes())


def load_arrays(path) -> dict[str, np.ndarray]:
    def read_exact(f, n):
        buf = f.read(n)
        if len(buf) != n:
            raise ValueError(f"truncated checkpoint file {path}")
        return buf

    arrays: dict[str, np.ndarray] = {}
    with open(path, "rb") as f:
        if read_exact(f, 4) != CHECKPOINT_MAGIC:
            raise ValueError(f"{path} is not a checkpoint file (bad magic)")
        (version,) = struct.unpack("<I", read_exact(f, 4))
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        (count,) = struct.unpack("<I", read_exact(f, 4))
        for _ in range(count):
            (name_len,) = struct.unpack("<I", read_exact(f, 4))
            name = read_exact(f, name_len).decode("utf-8")
            rows, cols = struct.unpack("<II", read_exact(f, 8))
            data = np.frombuffer(read_exact(f, 4 * rows * cols), dtype="<f4")
            arrays[name] = data.reshape(rows, cols).copy()
    return arrays
