"""Dense float32 arrays with reverse-mode autodiff, layers, and optimizers."""

from .tensor import (
    DTYPE,
    ShapeMismatch,
    Tensor,
    as_tensor,
    backward,
    concat,
    constant,
    conv3d,
    div,
    embedding,
    exp,
    gradients,
    linear,
    log,
    log_softmax,
    matmul,
    mul,
    no_grad,
    add,
    pow_scalar,
    reduce_max,
    reduce_mean,
    reduce_sum,
    relu,
    reshape,
    sigmoid,
    softmax,
    take,
    tanh,
    transpose,
    where,
)
from . import nn, optim, rng, checkpoint

__all__ = [
    "DTYPE", "ShapeMismatch", "Tensor", "as_tensor", "backward", "concat",
    "constant", "conv3d", "div", "embedding", "exp", "gradients", "linear", "log",
    "log_softmax", "matmul", "mul", "no_grad", "add", "pow_scalar",
    "reduce_max", "reduce_mean", "reduce_sum", "relu", "reshape", "sigmoid",
    "softmax", "take", "tanh", "transpose", "where",
    "nn", "optim", "rng", "checkpoint",
]
