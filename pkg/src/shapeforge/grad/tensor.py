"""Reverse-mode automatic differentiation over dense float32 numpy arrays.

A `Tensor` wraps a C-contiguous float32 ndarray plus an optional backward
closure; calling `backward(loss)` on a scalar loss accumulates gradients into
every reachable leaf with `requires_grad`. Graphs are built eagerly and torn
down after backward. Everything is single-threaded and deterministic: the same
inputs produce bit-identical values and gradients.

Broadcasting follows numpy rules; gradients of broadcast operands are reduced
back to the operand shape.
"""

import numpy as np

DTYPE = np.float32


class ShapeMismatch(ValueError):
    """Raised when operand shapes are incompatible; carries both shapes."""

    def __init__(self, op, shape_a, shape_b):
        self.op = op
        self.shapes = (tuple(shape_a), tuple(shape_b))
        super().__init__(f"{op}: incompatible shapes {tuple(shape_a)} vs {tuple(shape_b)}")


_GRAD_ENABLED = True


class no_grad:
    """Context manager that disables graph construction."""

    def __enter__(self):
        global _GRAD_ENABLED
        self._prev = _GRAD_ENABLED
        _GRAD_ENABLED = False
        return self

    def __exit__(self, *exc):
        global _GRAD_ENABLED
        _GRAD_ENABLED = self._prev
        return False


def _coerce(data):
    a = np.asarray(data, dtype=DTYPE)
    return np.ascontiguousarray(a)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False):
        self.data = _coerce(data)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def _accumulate(self, g):
        if self.grad is None:
            # own the buffer: g may be shared with a sibling's accumulation
            self.grad = np.array(g, dtype=DTYPE, copy=True)
        else:
            self.grad += g

    def zero_grad(self):
        self.grad = None

    def item(self):
        return float(self.data.reshape(()))

    # -- arithmetic sugar -------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, mul(as_tensor(other), -1.0))

    def __rsub__(self, other):
        return add(as_tensor(other), mul(self, -1.0))

    def __truediv__(self, other):
        return div(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return take(self, idx)

    # -- common methods ----------------------------------------------------
    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 or isinstance(shape[0], int) else shape[0])

    def transpose(self, axes):
        return transpose(self, axes)

    def sum(self, axis=None, keepdims=False):
        return reduce_sum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return reduce_mean(self, axis, keepdims)

    def max(self, axis):
        return reduce_max(self, axis)


def as_tensor(x):
    if isinstance(x, Tensor):
        return x
    return Tensor(x)


def constant(x):
    """Non-differentiable tensor (data is not copied if already float32)."""
    return Tensor(x, requires_grad=False)


def _node(data, parents, backward):
    out = Tensor(data)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def make_node(data, parents, backward):
    """Public hook for domain-specific ops with hand-written backward rules.

    `backward(g)` must call `_accumulate` on each differentiable parent.
    """
    return _node(data, parents, backward)


def _unbroadcast(g, shape):
    """Reduce gradient `g` back to a broadcast operand's `shape`."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.astype(DTYPE, copy=False)


def backward(loss):
    """Accumulate d(loss)/d(leaf) into every reachable requires_grad leaf.

    `loss` must be scalar. Nodes are visited in reverse topological order;
    leaves that do not lie on a path to the loss keep a zero (None) gradient.
    """
    if loss.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    topo = []
    seen = set()
    stack = [(loss, False)]
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
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    loss._accumulate(np.ones_like(loss.data))
    for node in reversed(topo):
        if node._backward is not None:
            node._backward(node.grad)
            # free the closure; graphs are single-use
            node._backward = None
            node._parents = ()


def gradients(loss, leaves):
    """backward() then gather per-leaf gradients, zeros for untouched leaves."""
    backward(loss)
    return [l.grad if l.grad is not None else np.zeros_like(l.data) for l in leaves]


# ---------------------------------------------------------------------------
# elementwise / arithmetic ops
# ---------------------------------------------------------------------------

def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data + b.data
    except ValueError:
        raise ShapeMismatch("add", a.shape, b.shape) from None

    def bwd(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.data.shape))

    return _node(data, (a, b), bwd)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data * b.data
    except ValueError:
        raise ShapeMismatch("mul", a.shape, b.shape) from None

    def bwd(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.data.shape))

    return _node(data, (a, b), bwd)


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data / b.data
    except ValueError:
        raise ShapeMismatch("div", a.shape, b.shape) from None

    def bwd(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g / b.data, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))

    return _node(data, (a, b), bwd)


def pow_scalar(a, p):
    a = as_tensor(a)
    p = float(p)
    data = a.data**DTYPE(p)

    def bwd(g):
        a._accumulate((g * p * a.data ** DTYPE(p - 1.0)).astype(DTYPE, copy=False))

    return _node(data, (a,), bwd)


def exp(a):
    a = as_tensor(a)
    data = np.exp(a.data)

    def bwd(g):
        a._accumulate(g * data)

    return _node(data, (a,), bwd)


def log(a):
    a = as_tensor(a)
    data = np.log(a.data)

    def bwd(g):
        a._accumulate(g / a.data)

    return _node(data, (a,), bwd)


def tanh(a):
    a = as_tensor(a)
    data = np.tanh(a.data)

    def bwd(g):
        a._accumulate(g * (1.0 - data * data))

    return _node(data, (a,), bwd)


def relu(a):
    a = as_tensor(a)
    data = np.maximum(a.data, 0.0)

    def bwd(g):
        a._accumulate(g * (a.data > 0))

    return _node(data, (a,), bwd)


def sigmoid(a):
    a = as_tensor(a)
    # numerically stable two-sided form
    data = np.where(a.data >= 0, 1.0 / (1.0 + np.exp(-a.data)),
                    np.exp(a.data) / (1.0 + np.exp(a.data))).astype(DTYPE)

    def bwd(g):
        a._accumulate(g * data * (1.0 - data))

    return _node(data, (a,), bwd)


def where(mask, a, b):
    """Elementwise select; `mask` is a boolean ndarray, not differentiated."""
    a, b = as_tensor(a), as_tensor(b)
    mask = np.asarray(mask, dtype=bool)
    data = np.where(mask, a.data, b.data).astype(DTYPE)

    def bwd(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(np.where(mask, g, 0.0).astype(DTYPE), a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(np.where(mask, 0.0, g).astype(DTYPE), b.data.shape))

    return _node(data, (a, b), bwd)


# ---------------------------------------------------------------------------
# linear algebra
# ---------------------------------------------------------------------------

def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim < 1 or b.data.ndim < 2 or a.data.shape[-1] != b.data.shape[-2]:
        raise ShapeMismatch("matmul", a.shape, b.shape)
    # fold leading axes into one GEMM when the right operand is a plain matrix
    fold = a.data.ndim > 2 and b.data.ndim == 2
    if fold:
        lead = a.data.shape[:-1]
        data = (a.data.reshape(-1, a.data.shape[-1]) @ b.data).reshape(lead + (b.data.shape[1],))
    else:
        data = a.data @ b.data

    def bwd(g):
        if fold:
            g2 = g.reshape(-1, g.shape[-1])
            if a.requires_grad:
                a._accumulate((g2 @ b.data.T).reshape(a.data.shape))
            if b.requires_grad:
                b._accumulate(a.data.reshape(-1, a.data.shape[-1]).T @ g2)
            return
        if a.requires_grad:
            ga = g @ b.data.swapaxes(-1, -2)
            a._accumulate(_unbroadcast(ga, a.data.shape))
        if b.requires_grad:
            gb = a.data.swapaxes(-1, -2) @ g
            b._accumulate(_unbroadcast(gb, b.data.shape))

    return _node(data, (a, b), bwd)


def linear(x, w, b):
    """Fused x @ w + b for 2-D weights; x may carry leading batch axes."""
    x, w, b = as_tensor(x), as_tensor(w), as_tensor(b)
    if x.data.shape[-1] != w.data.shape[0]:
        raise ShapeMismatch("linear", x.shape, w.shape)
    lead = x.data.shape[:-1]
    x2 = x.data.reshape(-1, x.data.shape[-1])
    data = (x2 @ w.data + b.data).reshape(lead + (w.data.shape[1],))

    def bwd(g):
        g2 = g.reshape(-1, g.shape[-1])
        if x.requires_grad:
            x._accumulate((g2 @ w.data.T).reshape(x.data.shape))
        if w.requires_grad:
            w._accumulate(x2.T @ g2)
        if b.requires_grad:
            b._accumulate(g2.sum(axis=0))

    return _node(data, (x, w, b), bwd)


# ---------------------------------------------------------------------------
# reductions
# ---------------------------------------------------------------------------

def reduce_sum(a, axis=None, keepdims=False):
    a = as_tensor(a)
    data = a.data.sum(axis=axis, keepdims=keepdims, dtype=DTYPE)

    def bwd(g):
        gg = g
        if not keepdims and axis is not None:
            gg = np.expand_dims(g, axis)
        a._accumulate(np.broadcast_to(gg, a.data.shape).astype(DTYPE, copy=False))

    return _node(data, (a,), bwd)


def reduce_mean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    if axis is None:
        n = a.data.size
    else:
        ax = axis if isinstance(axis, tuple) else (axis,)
        n = 1
        for i in ax:
            n *= a.data.shape[i]
    return mul(reduce_sum(a, axis, keepdims), 1.0 / n)


def reduce_max(a, axis):
    """Max over one axis; ties route the gradient to the first maximum."""
    a = as_tensor(a)
    data = a.data.max(axis=axis)
    idx = np.argmax(a.data, axis=axis)

    def bwd(g):
        out = np.zeros_like(a.data)
        np.put_along_axis(out, np.expand_dims(idx, axis), np.expand_dims(g, axis), axis)
        a._accumulate(out)

    return _node(data, (a,), bwd)


def softmax(a, axis=-1):
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=axis, keepdims=True)

    def bwd(g):
        dot = (g * data).sum(axis=axis, keepdims=True)
        a._accumulate(data * (g - dot))

    return _node(data, (a,), bwd)


def log_softmax(a, axis=-1):
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    data = shifted - lse
    sm = np.exp(data)

    def bwd(g):
        a._accumulate(g - sm * g.sum(axis=axis, keepdims=True))

    return _node(data, (a,), bwd)


# ---------------------------------------------------------------------------
# shape ops
# ---------------------------------------------------------------------------

def reshape(a, shape):
    a = as_tensor(a)
    data = a.data.reshape(shape)

    def bwd(g):
        a._accumulate(g.reshape(a.data.shape))

    return _node(data, (a,), bwd)


def transpose(a, axes):
    a = as_tensor(a)
    data = np.ascontiguousarray(a.data.transpose(axes))
    inv = np.argsort(axes)

    def bwd(g):
        a._accumulate(g.transpose(inv))

    return _node(data, (a,), bwd)


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(lo, hi)
                t._accumulate(g[tuple(sl)])

    return _node(data, tuple(tensors), bwd)


def take(a, idx):
    """Basic slicing / integer-array indexing with scatter-add backward."""
    a = as_tensor(a)
    data = np.ascontiguousarray(a.data[idx])

    def bwd(g):
        out = np.zeros_like(a.data)
        np.add.at(out, idx, g)
        a._accumulate(out)

    return _node(data, (a,), bwd)


def embedding(table, ids):
    """Row gather from a (V, E) table by an integer id array."""
    table = as_tensor(table)
    ids = np.asarray(ids)
    data = table.data[ids]

    def bwd(g):
        out = np.zeros_like(table.data)
        np.add.at(out, ids.reshape(-1), g.reshape(-1, table.data.shape[1]))
        table._accumulate(out)

    return _node(data, (table,), bwd)


# ---------------------------------------------------------------------------
# convolution
# ---------------------------------------------------------------------------

def _im2col3d(x, k, stride):
    """(B,C,D,H,W) -> columns (B, P, C*k^3) for a k^3 kernel at `stride`."""
    from numpy.lib.stride_tricks import sliding_window_view

    win = sliding_window_view(x, (k, k, k), axis=(2, 3, 4))
    win = win[:, :, ::stride, ::stride, ::stride]
    b, c, do, ho, wo = win.shape[:5]
    cols = win.transpose(0, 2, 3, 4, 1, 5, 6, 7).reshape(b, do * ho * wo, c * k * k * k)
    return np.ascontiguousarray(cols), (do, ho, wo)


def conv3d(x, w, bias=None, stride=1, padding=0):
    """3D cross-correlation, stride 1 or 2, zero padding.

    x: (B, C, D, H, W); w: (O, C, k, k, k); bias: (O,) or None.
    """
    x, w = as_tensor(x), as_tensor(w)
    if x.data.ndim != 5 or w.data.ndim != 5 or x.data.shape[1] != w.data.shape[1]:
        raise ShapeMismatch("conv3d", x.shape, w.shape)
    b_in = as_tensor(bias) if bias is not None else None
    k = w.data.shape[2]
    o = w.data.shape[0]
    s, p = int(stride), int(padding)
    xp = np.pad(x.data, ((0, 0), (0, 0), (p, p), (p, p), (p, p)))
    cols, (do, ho, wo) = _im2col3d(xp, k, s)
    wflat = w.data.reshape(o, -1)
    out = cols @ wflat.T  # (B, P, O)
    if b_in is not None:
        out += b_in.data
    bsz = x.data.shape[0]
    data = out.reshape(bsz, do, ho, wo, o).transpose(0, 4, 1, 2, 3)
    data = np.ascontiguousarray(data, dtype=DTYPE)

    def bwd(g):
        gcol = g.transpose(0, 2, 3, 4, 1).reshape(bsz, -1, o)
        if w.requires_grad:
            gw = np.tensordot(gcol, cols, axes=([0, 1], [0, 1]))  # (O, C*k^3)
            w._accumulate(gw.reshape(w.data.shape).astype(DTYPE, copy=False))
        if b_in is not None and b_in.requires_grad:
            b_in._accumulate(gcol.sum(axis=(0, 1)).astype(DTYPE, copy=False))
        if x.requires_grad:
            x._accumulate(_conv3d_input_grad(g, w.data, x.data.shape, s, p))

    parents = (x, w) if b_in is None else (x, w, b_in)
    return _node(data, parents, bwd)


def _conv3d_input_grad(g, w, xshape, s, p):
    """dL/dx by col2im: one GEMM into column gradients, then one strided
    scatter-add per kernel offset."""
    bsz, o = g.shape[:2]
    c, k = w.shape[1], w.shape[2]
    dims = xshape[2:]
    do, ho, wo = g.shape[2:]
    gcol = g.transpose(0, 2, 3, 4, 1).reshape(-1, o)           # (B*P, O)
    dcol = gcol @ w.reshape(o, -1)                              # (B*P, C*k^3)
    dcol = dcol.reshape(bsz, do, ho, wo, c, k, k, k)
    dxp = np.zeros((bsz, c, dims[0] + 2 * p, dims[1] + 2 * p, dims[2] + 2 * p), dtype=DTYPE)
    for i in range(k):
        for j in range(k):
            for l in range(k):
                dxp[:, :, i:i + do * s:s, j:j + ho * s:s, l:l + wo * s:s] += \
                    dcol[:, :, :, :, :, i, j, l].transpose(0, 4, 1, 2, 3)
    if p > 0:
        dxp = dxp[:, :, p:p + dims[0], p:p + dims[1], p:p + dims[2]]
    return np.ascontiguousarray(dxp, dtype=DTYPE)
