"""Masked autoregressive flow with conditional inputs.

Density direction (e -> z) is a single parallel pass; generation inverts the
autoregression one coordinate at a time. Layers alternate the degree
ordering; optional invertible batch-norm sits between layers, mirroring the
coupling stack.
"""

import numpy as np

from ..grad import nn
from ..grad import no_grad
from ..grad import tensor as T
from .realnvp import LOG_2PI, BatchNormFlow, _standard_normal_logprob


def made_masks(dim, hidden, reverse=False):
    """(input->h1, h1->h2, h2->output) binary masks for a two-hidden MADE."""
    in_deg = np.arange(1, dim + 1)
    if reverse:
        in_deg = in_deg[::-1].copy()
    if dim > 1:
        h_deg = (np.arange(hidden) % (dim - 1)) + 1
    else:
        h_deg = np.ones(hidden, dtype=int)
    out_deg = in_deg
    m1 = (h_deg[None, :] >= in_deg[:, None]).astype(np.float32)      # (dim, H)
    m2 = (h_deg[None, :] >= h_deg[:, None]).astype(np.float32)       # (H, H)
    m3 = (out_deg[None, :] > h_deg[:, None]).astype(np.float32)      # (H, dim)
    return m1, m2, m3


class _MaskedLinear(nn.Module):
    def __init__(self, in_dim, out_dim, mask, rng, cond_dim=0, zero_init=False):
        super().__init__()
        base = nn.he_init(rng, in_dim, (in_dim, out_dim))
        if zero_init:
            base[:] = 0.0
        self.weight = T.Tensor(base, requires_grad=True)
        self.bias = T.Tensor(np.zeros(out_dim, np.float32), requires_grad=True)
        self.mask = np.asarray(mask, np.float32)
        if cond_dim:
            self.cond_weight = T.Tensor(nn.he_init(rng, cond_dim, (cond_dim, out_dim)),
                                        requires_grad=True)
        self.cond_dim = cond_dim

    def __call__(self, x, c=None):
        out = T.linear(x, T.mul(self.weight, self.mask), self.bias)
        if self.cond_dim and c is not None:
            out = T.add(out, T.matmul(c, self.cond_weight))
        return out


class MAFLayer(nn.Module):
    """One conditional MADE producing shift m and tanh-bounded log-scale a."""

    def __init__(self, dim, cond_dim, rng, hidden=1024, reverse=False):
        super().__init__()
        m1, m2, m3 = made_masks(dim, hidden, reverse)
        self.lin1 = _MaskedLinear(dim, hidden, m1, rng, cond_dim=cond_dim)
        self.lin2 = _MaskedLinear(hidden, hidden, m2, rng)
        self.out_m = _MaskedLinear(hidden, dim, m3, rng, zero_init=True)
        self.out_a = _MaskedLinear(hidden, dim, m3, rng, zero_init=True)
        self.a_gain = T.Tensor(np.ones(dim, np.float32), requires_grad=True)
        self.dim = dim
        self.reverse = reverse

    def _shift_scale(self, x, c):
        h = T.tanh(self.lin1(x, c))
        h = T.tanh(self.lin2(h))
        m = self.out_m(h)
        a = T.mul(T.tanh(self.out_a(h)), self.a_gain)
        return m, a

    def forward(self, x, c):
        m, a = self._shift_scale(x, c)
        z = T.mul(T.add(x, T.mul(m, -1.0)), T.exp(T.mul(a, -1.0)))
        logdet = T.mul(T.reduce_sum(a, axis=1), -1.0)
        return z, logdet

    def inverse(self, z, c):
        with no_grad():
            x = np.zeros_like(z.data)
            order = np.arange(self.dim)[::-1] if self.reverse else np.arange(self.dim)
            for d in order:
                m, a = self._shift_scale(T.Tensor(x), c)
                x[:, d] = z.data[:, d] * np.exp(a.data[:, d]) + m.data[:, d]
        return T.Tensor(x)


class MAFModel(nn.Module):
    """Stack of MAF layers with alternating degree order."""

    family = "maf"

    def __init__(self, dim, cond_dim, rng, n_blocks=5, hidden=1024,
                 batch_norm=True):
        super().__init__()
        self.dim = dim
        self.cond_dim = cond_dim
        self.n_blocks = n_blocks
        self.hidden = hidden
        self.batch_norm = batch_norm
        self.conditioning = "affine_coupling"
        self.mask_kind = "autoregressive"
        self.prior = None
        self.layers = nn.ModuleList(
            MAFLayer(dim, cond_dim, rng, hidden=hidden, reverse=bool(i % 2))
            for i in range(n_blocks))
        if batch_norm:
            self.bns = nn.ModuleList(BatchNormFlow(dim) for _ in range(n_blocks))

    def forward(self, e, c):
        x = e
        logdet = T.Tensor(np.zeros(e.data.shape[0], np.float32))
        for i, layer in enumerate(self.layers):
            x, ld = layer.forward(x, c)
            logdet = T.add(logdet, ld)
            if self.batch_norm:
                x, ld_bn = self.bns[i].forward(x)
                logdet = T.add(logdet, ld_bn)
            if not np.isfinite(x.data).all():
                raise FloatingPointError(f"non-finite values after MAF layer {i}")
        return x, logdet

    def inverse(self, z, c):
        x = z if isinstance(z, T.Tensor) else T.Tensor(z)
        for i in reversed(range(len(self.layers))):
            if self.batch_norm:
                x = self.bns[i].inverse(x)
            x = self.layers[i].inverse(x, c)
        return x

    def log_prob(self, e, c):
        z, logdet = self.forward(e, c)
        return T.add(_standard_normal_logprob(z), logdet)

    def log_prob_values(self, e, c):
        was_training = self.training
        self.eval()
        with no_grad():
            z, logdet = self.forward(T.Tensor(e), T.Tensor(c))
            zz = z.data.astype(np.float64)
            base = -0.5 * (zz * zz).sum(axis=1) - 0.5 * self.dim * LOG_2PI
        self.train(was_training)
        return base + logdet.data.astype(np.float64)

    def sample(self, c_row, n=1, rng=None, mean_mode=False):
        was_training = self.training
        self.eval()
        c_row = np.asarray(c_row, np.float32).reshape(-1)
        if mean_mode:
            z = np.zeros((1, self.dim), np.float32)
        else:
            z = np.stack([rng.standard_normal(self.dim).astype(np.float32)
                          for _ in range(n)])
        c = T.Tensor(np.tile(c_row, (z.shape[0], 1)))
        out = self.inverse(T.Tensor(z), c).data.copy()
        self.train(was_training)
        return out

    def hyperparameters(self):
        return {
            "family": self.family,
            "dim": self.dim,
            "cond_dim": self.cond_dim,
            "n_blocks": self.n_blocks,
            "hidden": self.hidden,
            "batch_norm": self.batch_norm,
        }
