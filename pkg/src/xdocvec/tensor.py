"""Dense float64 tensors with a reverse-mode tape.

Ops build the graph eagerly: a result tensor keeps references to its parents
and a closure that scatters the incoming gradient onto them. The tape is
rebuilt on every forward pass, so variable-length sequences need no static
graph. `backward` runs one iterative reverse-topological sweep, which keeps
graphs thousands of nodes deep (long documents) safe from recursion limits.

Everything is float64: gradient checking at 1e-4 relative tolerance is not
realistic in float32.
"""

from __future__ import annotations

import struct
from contextlib import contextmanager
from typing import BinaryIO, Callable, Sequence

import numpy as np

from .errors import ContractError, DimensionError, FormatError, InputError

_grad_enabled = True


@contextmanager
def no_grad():
    """Disable taping; ops inside return detached tensors."""
    global _grad_enabled
    saved = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = saved


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        # Leaves that want gradients carry a zeroed buffer from the start;
        # interior nodes get theirs lazily during backward.
        self.grad = np.zeros_like(self.data) if requires_grad else None
        self._parents: tuple = ()
        self._backward: Callable[[np.ndarray], None] | None = None

    @property
    def shape(self) -> tuple:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        if self.grad is not None:
            self.grad[...] = 0.0

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # Operator sugar; the module-level functions do the work.
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def _node(data: np.ndarray, parents: tuple, backward: Callable) -> Tensor:
    t = Tensor.__new__(Tensor)
    t.data = data
    t.requires_grad = True
    t.grad = None
    t._parents = parents
    t._backward = backward
    return t


def _taping(*tensors: Tensor) -> bool:
    return _grad_enabled and any(t.requires_grad for t in tensors)


def accumulate_grad(t: Tensor, g: np.ndarray) -> None:
    """Add `g` into t.grad, allocating the buffer on first touch."""
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g)  # copy: g may be a view owned by someone else
    else:
        t.grad += g


_acc = accumulate_grad


def backward(loss: Tensor) -> None:
    """Populate .grad on every reachable requires_grad leaf of `loss`.

    Accumulation is additive: a leaf used k times receives the sum of all k
    contributions, and repeated backward calls keep adding until zero_grad.
    """
    if loss.data.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.data.shape}")
    if loss._backward is None and not loss.requires_grad:
        raise ContractError("loss is not on the tape (no taped computation produced it)")
    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p._backward is not None and id(p) not in seen:
                stack.append((p, False))
    _acc(loss, np.ones_like(loss.data))
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcast gradient back to `shape`."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise / arithmetic ops
# ---------------------------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    out = a.data + b.data
    if not _taping(a, b):
        return Tensor(out)

    def bw(g):
        _acc(a, _unbroadcast(g, a.data.shape))
        _acc(b, _unbroadcast(g, b.data.shape))

    return _node(out, (a, b), bw)


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = a.data - b.data
    if not _taping(a, b):
        return Tensor(out)

    def bw(g):
        _acc(a, _unbroadcast(g, a.data.shape))
        _acc(b, _unbroadcast(-g, b.data.shape))

    return _node(out, (a, b), bw)


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = a.data * b.data
    if not _taping(a, b):
        return Tensor(out)

    def bw(g):
        _acc(a, _unbroadcast(g * b.data, a.data.shape))
        _acc(b, _unbroadcast(g * a.data, b.data.shape))

    return _node(out, (a, b), bw)


def scale(a: Tensor, c: float) -> Tensor:
    out = a.data * c
    if not _taping(a):
        return Tensor(out)

    def bw(g):
        _acc(a, g * c)

    return _node(out, (a,), bw)


def shift(a: Tensor, c: float) -> Tensor:
    out = a.data + c
    if not _taping(a):
        return Tensor(out)

    def bw(g):
        _acc(a, g)

    return _node(out, (a,), bw)


def square(a: Tensor) -> Tensor:
    out = a.data * a.data
    if not _taping(a):
        return Tensor(out)

    def bw(g):
        _acc(a, 2.0 * a.data * g)

    return _node(out, (a,), bw)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise DimensionError(f"matmul shapes incompatible: {a.data.shape} x {b.data.shape}")
    out = a.data @ b.data
    if not _taping(a, b):
        return Tensor(out)

    def bw(g):
        if a.requires_grad:
            _acc(a, g @ b.data.T)
        if b.requires_grad:
            _acc(b, a.data.T @ g)

    return _node(out, (a, b), bw)


def affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """x @ w + b in one node; x is (n, in), w (in, out), b (out,)."""
    if x.data.ndim != 2 or w.data.ndim != 2 or x.data.shape[1] != w.data.shape[0]:
        raise DimensionError(f"affine shapes incompatible: {x.data.shape} x {w.data.shape}")
    out = x.data @ w.data + b.data
    if not _taping(x, w, b):
        return Tensor(out)

    def bw(g):
        if x.requires_grad:
            _acc(x, g @ w.data.T)
        if w.requires_grad:
            _acc(w, x.data.T @ g)
        if b.requires_grad:
            _acc(b, g.sum(axis=0))

    return _node(out, (x, w, b), bw)


# ---------------------------------------------------------------------------
# nonlinearities and reductions
# ---------------------------------------------------------------------------


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)
    if not _taping(a):
        return Tensor(out)

    def bw(g):
        _acc(a, g * (1.0 - out * out))

    return _node(out, (a,), bw)


def _sigmoid_arr(x: np.ndarray) -> np.ndarray:
    # clipping at +-500 keeps exp finite and is exact to <1e-217
    return 1.0 / (1.0 + np.exp(-np.clip(x, -500.0, 500.0)))


def sigmoid(a: Tensor) -> Tensor:
    out = _sigmoid_arr(a.data)
    if not _taping(a):
        return Tensor(out)

    def bw(g):
        _acc(a, g * out * (1.0 - out))

    return _node(out, (a,), bw)


def relu(a: Tensor) -> Tensor:
    out = np.maximum(a.data, 0.0)
    if not _taping(a):
        return Tensor(out)

    def bw(g):
        _acc(a, g * (a.data > 0.0))

    return _node(out, (a,), bw)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    """Max-subtracted softmax along `axis`; exact on huge score gaps."""
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)
    if not _taping(a):
        return Tensor(out)

    def bw(g):
        dot = (g * out).sum(axis=axis, keepdims=True)
        _acc(a, out * (g - dot))

    return _node(out, (a,), bw)


def sum_all(a: Tensor) -> Tensor:
    out = np.asarray(a.data.sum())
    if not _taping(a):
        return Tensor(out)

    def bw(g):
        _acc(a, np.full_like(a.data, float(g)))

    return _node(out, (a,), bw)


def mean_all(a: Tensor) -> Tensor:
    n = a.data.size
    out = np.asarray(a.data.sum() / n)
    if not _taping(a):
        return Tensor(out)

    def bw(g):
        _acc(a, np.full_like(a.data, float(g) / n))

    return _node(out, (a,), bw)


# ---------------------------------------------------------------------------
# shape ops
# ---------------------------------------------------------------------------


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise DimensionError(f"transpose expects a matrix, got shape {a.data.shape}")
    out = a.data.T
    if not _taping(a):
        return Tensor(out)

    def bw(g):
        _acc(a, g.T)

    return _node(out, (a,), bw)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise InputError("concat of an empty tensor list")
    out = np.concatenate([t.data for t in tensors], axis=axis)
    if not _taping(*tensors):
        return Tensor(out)
    sizes = [t.data.shape[axis] for t in tensors]

    def bw(g):
        off = 0
        idx = [slice(None)] * g.ndim
        for t, n in zip(tensors, sizes):
            idx[axis] = slice(off, off + n)
            _acc(t, g[tuple(idx)])
            off += n

    return _node(out, tuple(tensors), bw)


def embedding(table: Tensor, ids: Sequence[int]) -> Tensor:
    """Gather rows `ids` of `table` as an (len(ids), dim) matrix."""
    idx = np.asarray(ids, dtype=np.intp)
    if idx.size and (idx.min() < 0 or idx.max() >= table.data.shape[0]):
        raise InputError(
            f"token id out of range: ids span [{idx.min()}, {idx.max()}] "
            f"but table has {table.data.shape[0]} rows"
        )
    out = table.data[idx]
    if not _taping(table):
        return Tensor(out)

    def bw(g):
        if table.grad is None:
            table.grad = np.zeros_like(table.data)
        np.add.at(table.grad, idx, g)

    return _node(out, (table,), bw)


def row_dot(a: Tensor, b: Tensor) -> Tensor:
    """Per-row dot product of two (n, d) matrices, returned as (1, n)."""
    if a.data.shape != b.data.shape or a.data.ndim != 2:
        raise DimensionError(f"row_dot shapes incompatible: {a.data.shape} vs {b.data.shape}")
    out = np.einsum("ij,ij->i", a.data, b.data)[None, :]
    if not _taping(a, b):
        return Tensor(out)

    def bw(g):
        col = g.reshape(-1, 1)
        _acc(a, col * b.data)
        _acc(b, col * a.data)

    return _node(out, (a, b), bw)


def softmax_cross_entropy(logits: Tensor, targets: Sequence[int]) -> Tensor:
    """Mean negative log-likelihood of `targets` under row-wise softmax.

    Fused and max-subtracted, so the decoder's per-token loss costs one node
    instead of a softmax/log/gather chain.
    """
    idx = np.asarray(targets, dtype=np.intp)
    if logits.data.ndim != 2 or idx.ndim != 1 or idx.shape[0] != logits.data.shape[0]:
        raise DimensionError(
            f"cross entropy needs (n, vocab) logits and n targets, got "
            f"{logits.data.shape} and {idx.shape}"
        )
    if idx.size and (idx.min() < 0 or idx.max() >= logits.data.shape[1]):
        raise InputError("target id out of vocabulary range")
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1))
    nll = lse - shifted[np.arange(idx.shape[0]), idx]
    out = np.asarray(nll.mean())
    if not _taping(logits):
        return Tensor(out)

    def bw(g):
        p = np.exp(shifted - lse[:, None])
        p[np.arange(idx.shape[0]), idx] -= 1.0
        _acc(logits, p * (float(g) / idx.shape[0]))

    return _node(out, (logits,), bw)


# ---------------------------------------------------------------------------
# construction helpers and serialization
# ---------------------------------------------------------------------------


def uniform_tensor(
    shape: tuple, rng: np.random.Generator, scale: float = 0.08, requires_grad: bool = True
) -> Tensor:
    return Tensor(rng.uniform(-scale, scale, size=shape), requires_grad=requires_grad)


def zeros_tensor(shape: tuple, requires_grad: bool = True) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=requires_grad)


_TENSOR_MAGIC = b"XTB1"


def write_tensor_block(buf: BinaryIO, arr: np.ndarray) -> None:
    """Little-endian block: magic, rank, extents, raw float64 payload."""
    arr = np.asarray(arr, dtype=np.float64)
    buf.write(_TENSOR_MAGIC)
    buf.write(struct.pack("<I", arr.ndim))
    if arr.ndim:
        buf.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
    buf.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def read_tensor_block(buf: BinaryIO) -> np.ndarray:
    magic = buf.read(4)
    if magic != _TENSOR_MAGIC:
        raise FormatError(f"bad tensor magic {magic!r}")
    raw = buf.read(4)
    if len(raw) != 4:
        raise FormatError("truncated tensor block: missing rank")
    (rank,) = struct.unpack("<I", raw)
    if rank > 8:
        raise FormatError(f"implausible tensor rank {rank}")
    raw = buf.read(8 * rank)
    if len(raw) != 8 * rank:
        raise FormatError("truncated tensor block: missing extents")
    shape = struct.unpack(f"<{rank}Q", raw) if rank else ()
    count = int(np.prod(shape)) if rank else 1
    payload = buf.read(8 * count)
    if len(payload) != 8 * count:
        raise FormatError("truncated tensor block: missing payload")
    return np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(shape)
