"""Small neural-net layer library on top of the autodiff tensor."""

import numpy as np

from . import tensor as T
from .tensor import DTYPE, Tensor


class Module:
    """Base class with automatic parameter/child registration.

    Assigning a `Tensor` attribute registers a parameter; assigning a
    `Module` registers a child. Buffers (non-learned state such as running
    statistics) are registered explicitly.
    """

    def __init__(self):
        object.__setattr__(self, "_params", {})
        object.__setattr__(self, "_buffers", {})
        object.__setattr__(self, "_children", {})
        object.__setattr__(self, "training", True)

    def __setattr__(self, name, value):
        if isinstance(value, Tensor):
            self._params[name] = value
        elif isinstance(value, Module):
            self._children[name] = value
        object.__setattr__(self, name, value)

    def register_buffer(self, name, value):
        self._buffers[name] = np.asarray(value, dtype=DTYPE)
        object.__setattr__(self, name, self._buffers[name])

    def set_buffer(self, name, value):
        self._buffers[name] = np.asarray(value, dtype=DTYPE)
        object.__setattr__(self, name, self._buffers[name])

    def named_parameters(self, prefix=""):
        for name, p in self._params.items():
            yield prefix + name, p
        for cname, child in self._children.items():
            yield from child.named_parameters(prefix + cname + ".")

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def named_buffers(self, prefix=""):
        for name, b in self._buffers.items():
            yield prefix + name, b
        for cname, child in self._children.items():
            yield from child.named_buffers(prefix + cname + ".")

    def train(self, mode=True):
        object.__setattr__(self, "training", mode)
        for child in self._children.values():
            child.train(mode)
        return self

    def eval(self):
        return self.train(False)

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def state_arrays(self):
        """name -> float32 ndarray for every parameter and buffer."""
        out = {name: p.data for name, p in self.named_parameters()}
        out.update({name: b for name, b in self.named_buffers()})
        return out

    def load_state_arrays(self, arrays):
        for name, p in self.named_parameters():
            a = np.asarray(arrays[name], dtype=DTYPE).reshape(p.data.shape)
            p.data = np.ascontiguousarray(a)
        self._load_buffers(arrays, "")

    def _load_buffers(self, arrays, prefix):
        for name in list(self._buffers):
            full = prefix + name
            self.set_buffer(name, np.asarray(arrays[full], dtype=DTYPE).reshape(self._buffers[name].shape))
        for cname, child in self._children.items():
            child._load_buffers(arrays, prefix + cname + ".")


class ModuleList(Module):
    def __init__(self, modules=()):
        super().__init__()
        self._list = []
        for m in modules:
            self.append(m)

    def append(self, module):
        self._children[str(len(self._list))] = module
        self._list.append(module)

    def __iter__(self):
        return iter(self._list)

    def __len__(self):
        return len(self._list)

    def __getitem__(self, i):
        return self._list[i]


def he_init(rng, fan_in, shape):
    std = np.sqrt(2.0 / fan_in)
    return (rng.standard_normal(shape) * std).astype(DTYPE)


class Linear(Module):
    def __init__(self, in_features, out_features, rng, zero_init=False):
        super().__init__()
        if zero_init:
            w = np.zeros((in_features, out_features), dtype=DTYPE)
        else:
            w = he_init(rng, in_features, (in_features, out_features))
        self.weight = Tensor(w, requires_grad=True)
        self.bias = Tensor(np.zeros(out_features, dtype=DTYPE), requires_grad=True)

    def __call__(self, x):
        return T.linear(x, self.weight, self.bias)


class Conv3d(Module):
    def __init__(self, in_ch, out_ch, kernel, rng, stride=1, padding=0):
        super().__init__()
        fan_in = in_ch * kernel**3
        self.weight = Tensor(he_init(rng, fan_in, (out_ch, in_ch, kernel, kernel, kernel)),
                             requires_grad=True)
        self.bias = Tensor(np.zeros(out_ch, dtype=DTYPE), requires_grad=True)
        self.stride = stride
        self.padding = padding

    def __call__(self, x):
        return T.conv3d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)


class BatchNorm(Module):
    """Batch normalization over all axes except `channel_axis`.

    Training mode normalizes with batch statistics and updates running
    statistics with momentum 0.9; eval mode uses the running statistics.
    """

    def __init__(self, num_features, channel_axis=1, momentum=0.9, eps=1e-5,
                 affine=True):
        super().__init__()
        self.affine = affine
        if affine:
            self.gamma = Tensor(np.ones(num_features, dtype=DTYPE), requires_grad=True)
            self.beta = Tensor(np.zeros(num_features, dtype=DTYPE), requires_grad=True)
        self.register_buffer("running_mean", np.zeros(num_features, dtype=DTYPE))
        self.register_buffer("running_var", np.ones(num_features, dtype=DTYPE))
        self.channel_axis = channel_axis
        self.momentum = momentum
        self.eps = eps

    def _bshape(self, ndim):
        shape = [1] * ndim
        shape[self.channel_axis] = -1
        return tuple(shape)

    def __call__(self, x):
        ax = tuple(i for i in range(x.data.ndim) if i != self.channel_axis)
        bshape = self._bshape(x.data.ndim)
        if self.training:
            mu = T.reduce_mean(x, axis=ax, keepdims=True)
            centered = T.add(x, T.mul(mu, -1.0))
            var = T.reduce_mean(T.mul(centered, centered), axis=ax, keepdims=True)
            inv = T.pow_scalar(T.add(var, self.eps), -0.5)
            xhat = T.mul(centered, inv)
            m = self.momentum
            self.set_buffer("running_mean",
                            m * self.running_mean + (1 - m) * mu.data.reshape(-1))
            self.set_buffer("running_var",
                            m * self.running_var + (1 - m) * var.data.reshape(-1))
        else:
            mu = self.running_mean.reshape(bshape)
            inv = (1.0 / np.sqrt(self.running_var + self.eps)).reshape(bshape).astype(DTYPE)
            xhat = T.mul(T.add(x, T.constant(-mu)), T.constant(inv))
        if not self.affine:
            return xhat
        g = T.reshape(self.gamma, bshape)
        b = T.reshape(self.beta, bshape)
        return T.add(T.mul(xhat, g), b)


class MLP(Module):
    """Dense stack with a pointwise activation between layers, none after the
    last. activation: "relu" or "tanh" (smooth nets stay exactly
    finite-difference testable)."""

    def __init__(self, widths, rng, zero_init_last=False, activation="relu"):
        super().__init__()
        self.layers = ModuleList(
            Linear(widths[i], widths[i + 1], rng,
                   zero_init=(zero_init_last and i == len(widths) - 2))
            for i in range(len(widths) - 1))
        self._act = T.relu if activation == "relu" else T.tanh

    def __call__(self, x):
        n = len(self.layers)
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < n - 1:
                x = self._act(x)
        return x
