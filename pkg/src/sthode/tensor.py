"""Dense tensors with reverse-mode automatic differentiation.

Small tape-based autodiff on top of numpy float64 arrays. Every
differentiable operation in the model (mode products, softmax, dilated
causal convolution, Huber loss, ...) lives here so gradient checking can
cover the whole network.
"""

from __future__ import annotations

import numpy as np

EPS_SQUASH = 1e-3


class DimensionError(ValueError):
    """Shape mismatch between operands, names the offending axis."""


def _as_array(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


class Tensor:
    """A float64 array plus the tape machinery for backprop."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, _parents=(), _backward=None):
        self.data = _as_array(data)
        self.grad = None
        self.requires_grad = bool(requires_grad) or any(p.requires_grad for p in _parents)
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def item(self) -> float:
        return float(self.data)

    def backward(self):
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar output")
        order = []
        seen = set()

        def visit(t):
            if id(t) in seen or not t.requires_grad:
                return
            seen.add(id(t))
            for p in t._parents:
                visit(p)
            order.append(t)

        visit(self)
        for t in order:
            t.grad = np.zeros_like(t.data)
        self.grad = np.ones_like(self.data)
        for t in reversed(order):
            if t._backward is not None:
                t._backward(t.grad)

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return hadamard(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return add(self, neg(as_tensor(other)))

    def __rsub__(self, other):
        return add(as_tensor(other), neg(self))

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def constant(x) -> Tensor:
    return Tensor(x)


class Parameter:
    """Named trainable tensor, optionally squashed into [0, 1)."""

    def __init__(self, name: str, data, constraint: str = "none"):
        if constraint not in ("none", "unit"):
            raise ValueError(f"unknown constraint {constraint!r}")
        self.name = name
        self.tensor = Tensor(data, requires_grad=True)
        self.constraint = constraint

    def materialize(self, hard: bool = False) -> Tensor:
        """The tensor as seen by the model ("unit" entries land in [0, 1))."""
        if self.constraint == "unit":
            return squash01(self.tensor, hard=hard)
        return self.tensor

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.tensor.shape}, constraint={self.constraint})"


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum g down to `shape` (inverse of numpy broadcasting)."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _accum(t: Tensor, g: np.ndarray):
    if t.requires_grad:
        t.grad += _unbroadcast(g, t.data.shape)


# ---------------------------------------------------------------------------
# elementwise / structural ops


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data + b.data, _parents=(a, b))
    out._backward = lambda g: (_accum(a, g), _accum(b, g))
    return out


def neg(a) -> Tensor:
    a = as_tensor(a)
    out = Tensor(-a.data, _parents=(a,))
    out._backward = lambda g: _accum(a, -g)
    return out


def hadamard(a, b) -> Tensor:
    """Elementwise product (broadcasting allowed)."""
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data * b.data, _parents=(a, b))
    out._backward = lambda g: (_accum(a, g * b.data), _accum(b, g * a.data))
    return out


def scale(a, c: float) -> Tensor:
    a = as_tensor(a)
    out = Tensor(a.data * c, _parents=(a,))
    out._backward = lambda g: _accum(a, g * c)
    return out


def tsum(a) -> Tensor:
    a = as_tensor(a)
    out = Tensor(a.data.sum(), _parents=(a,))
    out._backward = lambda g: _accum(a, np.broadcast_to(g, a.data.shape))
    return out


def tmean(a) -> Tensor:
    a = as_tensor(a)
    n = a.data.size
    out = Tensor(a.data.mean(), _parents=(a,))
    out._backward = lambda g: _accum(a, np.broadcast_to(g / n, a.data.shape))
    return out


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    out = Tensor(np.where(mask, a.data, 0.0), _parents=(a,))
    out._backward = lambda g: _accum(a, g * mask)
    return out


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    x = a.data
    s = np.empty_like(x)
    pos = x >= 0
    s[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    s[~pos] = ex / (1.0 + ex)
    out = Tensor(s, _parents=(a,))
    out._backward = lambda g: _accum(a, g * s * (1.0 - s))
    return out


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    out = Tensor(a.data.reshape(shape), _parents=(a,))
    out._backward = lambda g: _accum(a, g.reshape(a.data.shape))
    return out


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis), _parents=tuple(tensors))
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def _bw(g):
        for t, piece in zip(tensors, np.split(g, splits, axis=axis)):
            _accum(t, piece)

    out._backward = _bw
    return out


def maximum(tensors) -> Tensor:
    """Elementwise max over a list; ties route the gradient to the first max."""
    tensors = [as_tensor(t) for t in tensors]
    stacked = np.stack([t.data for t in tensors], axis=0)
    idx = np.argmax(stacked, axis=0)
    out = Tensor(np.max(stacked, axis=0), _parents=tuple(tensors))

    def _bw(g):
        for i, t in enumerate(tensors):
            _accum(t, g * (idx == i))

    out._backward = _bw
    return out


# ---------------------------------------------------------------------------
# linear-algebra ops


def matmul(a, b) -> Tensor:
    """a @ b for 2-D operands (or batched-leading a with 2-D b)."""
    a, b = as_tensor(a), as_tensor(b)
    if a.data.shape[-1] != b.data.shape[0]:
        raise DimensionError(
            f"matmul inner axes disagree: {a.data.shape[-1]} vs {b.data.shape[0]}"
        )
    out = Tensor(a.data @ b.data, _parents=(a, b))

    def _bw(g):
        _accum(a, g @ b.data.T)
        lead = tuple(range(g.ndim - 1))
        _accum(b, np.tensordot(a.data, g, axes=(lead, lead)))

    out._backward = _bw
    return out


def outer(u, v) -> Tensor:
    """Rank-1 outer product of two vectors."""
    u, v = as_tensor(u), as_tensor(v)
    if u.data.ndim != 1 or v.data.ndim != 1 or u.data.size == 0 or v.data.size == 0:
        raise DimensionError("outer expects two nonempty vectors")
    out = Tensor(np.outer(u.data, v.data), _parents=(u, v))
    out._backward = lambda g: (_accum(u, g @ v.data), _accum(v, u.data @ g))
    return out


def mode_product(x, m, mode: int) -> Tensor:
    """Contract the matrix m with one of the last three axes of x.

    mode 1/2/3 selects the node/time/feature axis; leading batch axes
    pass through untouched.
    """
    x, m = as_tensor(x), as_tensor(m)
    if x.data.ndim < 3:
        raise DimensionError("mode_product expects a tensor with at least 3 axes")
    if mode not in (1, 2, 3):
        raise DimensionError(f"mode must be 1, 2 or 3, got {mode}")
    axis = x.data.ndim - 3 + (mode - 1)
    n = x.data.shape[axis]
    if m.data.shape != (n, n):
        raise DimensionError(
            f"mode-{mode} matrix must be {n}x{n} to match axis {axis}, got {m.data.shape}"
        )

    def apply(mat, arr):
        return np.moveaxis(np.tensordot(mat, arr, axes=([1], [axis])), 0, axis)

    out = Tensor(apply(m.data, x.data), _parents=(x, m))
    others = tuple(i for i in range(x.data.ndim) if i != axis)

    def _bw(g):
        _accum(x, apply(m.data.T, g))
        _accum(m, np.tensordot(g, x.data, axes=(others, others)))

    out._backward = _bw
    return out


# ---------------------------------------------------------------------------
# model-specific ops


def softmax_rows(m) -> Tensor:
    """Row-wise softmax of a matrix (stable; rows sum to 1)."""
    m = as_tensor(m)
    if m.data.ndim != 2:
        raise DimensionError("softmax_rows expects a matrix")
    z = m.data - m.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=1, keepdims=True)
    out = Tensor(s, _parents=(m,))

    def _bw(g):
        _accum(m, s * (g - (g * s).sum(axis=1, keepdims=True)))

    out._backward = _bw
    return out


def squash01(raw, eps: float = EPS_SQUASH, hard: bool = False) -> Tensor:
    """Map unconstrained reals into [0, 1 - eps).

    Default is a scaled logistic (smooth); hard=True clips instead, for
    the ablation switch.
    """
    raw = as_tensor(raw)
    if hard:
        lo, hi = 0.0, 1.0 - eps
        clipped = np.clip(raw.data, lo, hi)
        inside = (raw.data > lo) & (raw.data < hi)
        out = Tensor(clipped, _parents=(raw,))
        out._backward = lambda g: _accum(raw, g * inside)
        return out
    return scale(sigmoid(raw), 1.0 - eps)


def dilated_causal_conv(x, filters, dilation: int = 1) -> Tensor:
    """1-D dilated causal convolution along the time axis.

    x has shape (..., T, F_in); filters has shape (k, F_in, F_out). The
    input is left-padded with (k-1)*dilation zeros so the output keeps
    length T and no output element looks at the future.
    """
    x, filters = as_tensor(x), as_tensor(filters)
    if filters.data.ndim != 3:
        raise DimensionError("filters must have shape (k, F_in, F_out)")
    k, f_in, f_out = filters.data.shape
    if x.data.ndim < 2:
        raise DimensionError("input must have shape (..., T, F_in)")
    t_len = x.data.shape[-2]
    if x.data.shape[-1] != f_in:
        raise DimensionError(
            f"input feature axis {x.data.shape[-1]} does not match filter F_in {f_in}"
        )
    if k < 1 or dilation < 1:
        raise DimensionError("kernel size and dilation must be >= 1")
    if t_len < 1:
        raise DimensionError("kernel longer than padded input (empty time axis)")

    pad = (k - 1) * dilation
    pad_spec = [(0, 0)] * (x.data.ndim - 2) + [(pad, 0), (0, 0)]
    xp = np.pad(x.data, pad_spec)
    starts = [pad - dilation * s for s in range(k)]
    out_data = np.zeros(x.data.shape[:-1] + (f_out,))
    for s, start in enumerate(starts):
        out_data += xp[..., start : start + t_len, :] @ filters.data[s]
    out = Tensor(out_data, _parents=(x, filters))

    def _bw(g):
        if x.requires_grad:
            gxp = np.zeros_like(xp)
            for s, start in enumerate(starts):
                gxp[..., start : start + t_len, :] += g @ filters.data[s].T
            _accum(x, gxp[..., pad:, :])
        if filters.requires_grad:
            gf = np.zeros_like(filters.data)
            lead = tuple(range(g.ndim - 1))
            for s, start in enumerate(starts):
                gf[s] = np.tensordot(xp[..., start : start + t_len, :], g, axes=(lead, lead))
            _accum(filters, gf)

    out._backward = _bw
    return out


def huber_loss(y, y_hat, delta: float = 1.0) -> Tensor:
    """Mean Huber loss: 0.5 e^2 inside |e| <= delta, delta|e| - delta/2 outside.

    The linear branch uses the offset delta/2 (not delta^2/2); the two
    coincide at delta=1. The seam takes the quadratic-branch derivative.
    """
    y, y_hat = as_tensor(y), as_tensor(y_hat)
    if y.data.shape != y_hat.data.shape:
        raise DimensionError(f"shape mismatch {y.data.shape} vs {y_hat.data.shape}")
    if delta <= 0:
        raise ValueError("delta must be positive")
    e = y.data - y_hat.data
    quad = np.abs(e) <= delta
    loss = np.where(quad, 0.5 * e * e, delta * np.abs(e) - 0.5 * delta)
    out = Tensor(loss.mean(), _parents=(y, y_hat))
    n = e.size

    def _bw(g):
        de = np.where(quad, e, delta * np.sign(e)) * (g / n)
        _accum(y, de)
        _accum(y_hat, -de)

    out._backward = _bw
    return out
