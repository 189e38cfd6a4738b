"""Conditional RealNVP: affine coupling stack with exact log-det and inverse.

Forward is the density direction (latent e -> base z); inverse drives
generation (z -> e). Conditioning modes:

  affine_coupling  the condition vector is concatenated into every coupling
                   block's scale/translation nets; base is N(0, I).
  prior_network    couplings are unconditioned; a small MLP maps the
                   condition to the mean/scale of a diagonal Gaussian base.

Scale outputs pass through tanh and a learnable per-dimension gain, so a
freshly initialized model is the identity map (final net layers start at
zero) and exp(s) stays bounded during training.
"""

import numpy as np

from ..grad import nn
from ..grad import no_grad
from ..grad import tensor as T
from .masks import MASK_KINDS, mask_stack

LOG_2PI = float(np.log(2.0 * np.pi))


def _coupling_net(in_dim, hidden, out_dim, rng):
    # 2-layer MLP + linear output; zero-init output keeps the block an
    # identity at start; tanh activations keep the bijection smooth
    return nn.MLP((in_dim, hidden, hidden, out_dim), rng, zero_init_last=True,
                  activation="tanh")


class CouplingBlock(nn.Module):
    def __init__(self, mask, cond_dim, rng, hidden=1024):
        super().__init__()
        self.mask = np.asarray(mask, dtype=bool)
        self.in_idx = np.flatnonzero(self.mask)
        self.out_idx = np.flatnonzero(~self.mask)
        d_in, d_out = len(self.in_idx), len(self.out_idx)
        self.cond_dim = cond_dim
        self.s_net = _coupling_net(cond_dim + d_in, hidden, d_out, rng)
        self.t_net = _coupling_net(cond_dim + d_in, hidden, d_out, rng)
        self.s_gain = T.Tensor(np.ones(d_out, np.float32), requires_grad=True)
        # final position of [masked-in columns, transformed columns]
        self._perm = np.argsort(np.concatenate([self.in_idx, self.out_idx]))

    def _nets(self, kept, c):
        h = kept if c is None else T.concat([c, kept], axis=1)
        s = T.mul(T.tanh(self.s_net(h)), self.s_gain)
        t = self.t_net(h)
        return s, t

    def forward(self, x, c):
        """(B, D) -> (z, per-sample log-det), density direction."""
        kept = T.take(x, (slice(None), self.in_idx))
        rest = T.take(x, (slice(None), self.out_idx))
        s, t = self._nets(kept, c)
        z_rest = T.add(T.mul(rest, T.exp(s)), t)
        z = T.take(T.concat([kept, z_rest], axis=1), (slice(None), self._perm))
        return z, T.reduce_sum(s, axis=1)

    def inverse(self, z, c):
        with no_grad():
            kept = T.take(z, (slice(None), self.in_idx))
            rest = T.take(z, (slice(None), self.out_idx))
            s, t = self._nets(kept, c)
            x_rest = T.mul(T.add(rest, T.mul(t, -1.0)), T.exp(T.mul(s, -1.0)))
            x = T.take(T.concat([kept, x_rest], axis=1), (slice(None), self._perm))
        return x


class BatchNormFlow(nn.Module):
    """Invertible batch-norm layer with exact log-det.

    Training-mode forward normalizes by batch statistics (and updates
    running statistics); eval-mode forward and all inversions use the
    running statistics, making the layer a fixed affine bijection.
    """

    def __init__(self, dim, momentum=0.9, eps=1e-5):
        super().__init__()
        self.log_gamma = T.Tensor(np.zeros(dim, np.float32), requires_grad=True)
        self.beta = T.Tensor(np.zeros(dim, np.float32), requires_grad=True)
        self.register_buffer("running_mean", np.zeros(dim, np.float32))
        self.register_buffer("running_var", np.ones(dim, np.float32))
        self.momentum = momentum
        self.eps = eps

    def forward(self, x, _c=None):
        if self.training:
            mu = T.reduce_mean(x, axis=0, keepdims=True)
            centered = T.add(x, T.mul(mu, -1.0))
            var = T.reduce_mean(T.mul(centered, centered), axis=0, keepdims=True)
            m = self.momentum
            self.set_buffer("running_mean",
                            m * self.running_mean + (1 - m) * mu.data.reshape(-1))
            self.set_buffer("running_var",
                            m * self.running_var + (1 - m) * var.data.reshape(-1))
        else:
            mu = T.constant(self.running_mean.reshape(1, -1))
            centered = T.add(x, T.mul(mu, -1.0))
            var = T.constant(self.running_var.reshape(1, -1))
        inv_std = T.pow_scalar(T.add(var, self.eps), -0.5)
        y = T.add(T.mul(T.mul(centered, inv_std), T.exp(self.log_gamma)), self.beta)
        # per-dim log|dy/dx| = log_gamma - 0.5*log(var + eps)
        half_log_var = T.mul(T.log(T.add(var, self.eps)), 0.5)
        ld = T.reduce_sum(T.add(self.log_gamma, T.mul(half_log_var, -1.0)))
        bsz = x.data.shape[0]
        logdet = T.mul(T.Tensor(np.ones(bsz, np.float32)), ld)
        return y, logdet

    def inverse(self, y, _c=None):
        with no_grad():
            std = np.sqrt(self.running_var + self.eps)
            x = (y.data - self.beta.data) * np.exp(-self.log_gamma.data) * std \
                + self.running_mean
        return T.Tensor(x)


class GaussianPrior(nn.Module):
    """Condition-dependent diagonal Gaussian base for prior_network mode."""

    def __init__(self, dim, cond_dim, rng, hidden=128):
        super().__init__()
        self.net = nn.MLP((cond_dim, hidden, 2 * dim, ), rng, zero_init_last=True)
        self.dim = dim

    def params(self, c):
        out = self.net(c)
        mu = T.take(out, (slice(None), slice(0, self.dim)))
        log_sigma = T.take(out, (slice(None), slice(self.dim, 2 * self.dim)))
        return mu, log_sigma

    def log_prob(self, z, c):
        mu, log_sigma = self.params(c)
        inv = T.exp(T.mul(log_sigma, -1.0))
        u = T.mul(T.add(z, T.mul(mu, -1.0)), inv)
        per = T.add(T.mul(T.mul(u, u), 0.5), T.add(log_sigma, 0.5 * LOG_2PI))
        return T.mul(T.reduce_sum(per, axis=1), -1.0)

    def sample(self, c_row, n, rng, mean_mode):
        with no_grad():
            mu, log_sigma = self.params(T.Tensor(np.tile(c_row, (1, 1))))
        mu = mu.data[0]
        sigma = np.exp(log_sigma.data[0])
        if mean_mode:
            return mu[None].copy()
        rows = [mu + sigma * rng.standard_normal(self.dim).astype(np.float32)
                for _ in range(n)]
        return np.stack(rows)


def _standard_normal_logprob(z):
    sq = T.reduce_sum(T.mul(z, z), axis=1)
    d = z.data.shape[1]
    return T.mul(T.add(T.mul(sq, 0.5), 0.5 * d * LOG_2PI), -1.0)


CONDITIONING_MODES = ("affine_coupling", "prior_network")


class FlowModel(nn.Module):
    """Stack of coupling blocks (with optional batch-norm) over latent width D."""

    family = "realnvp"

    def __init__(self, dim, cond_dim, rng, n_blocks=5, hidden=1024,
                 mask_kind="dimension_wise", conditioning="affine_coupling",
                 batch_norm=True):
        super().__init__()
        if mask_kind not in MASK_KINDS:
            raise ValueError(f"unknown mask kind {mask_kind!r}")
        if conditioning not in CONDITIONING_MODES:
            raise ValueError(f"unknown conditioning mode {conditioning!r}")
        self.dim = dim
        self.cond_dim = cond_dim
        self.mask_kind = mask_kind
        self.conditioning = conditioning
        self.hidden = hidden
        self.n_blocks = n_blocks
        self.batch_norm = batch_norm
        block_cond = cond_dim if conditioning == "affine_coupling" else 0
        self.blocks = nn.ModuleList(
            CouplingBlock(m, block_cond, rng, hidden=hidden)
            for m in mask_stack(mask_kind, dim, n_blocks))
        if batch_norm:
            self.bns = nn.ModuleList(BatchNormFlow(dim) for _ in range(n_blocks))
        self.prior = GaussianPrior(dim, cond_dim, rng) if conditioning == "prior_network" else None

    def _block_cond(self, c):
        return c if self.conditioning == "affine_coupling" else None

    def forward(self, e, c):
        """Density direction: (B, D) latents -> (z, per-sample log_det)."""
        if e.data.shape[1] != self.dim:
            raise T.ShapeMismatch("flow.forward", e.data.shape, (e.data.shape[0], self.dim))
        x = e
        logdet = T.Tensor(np.zeros(e.data.shape[0], np.float32))
        bc = self._block_cond(c)
        for i, block in enumerate(self.blocks):
            x, ld = block.forward(x, bc)
            logdet = T.add(logdet, ld)
            if self.batch_norm:
                x, ld_bn = self.bns[i].forward(x)
                logdet = T.add(logdet, ld_bn)
            if not np.isfinite(x.data).all():
                raise FloatingPointError(f"non-finite values after flow block {i}")
        return x, logdet

    def inverse(self, z, c):
        """Generation direction; runs in eval mode (running batch stats)."""
        x = z if isinstance(z, T.Tensor) else T.Tensor(z)
        bc = self._block_cond(c)
        for i in reversed(range(len(self.blocks))):
            if self.batch_norm:
                x = self.bns[i].inverse(x)
            x = self.blocks[i].inverse(x, bc)
            if not np.isfinite(x.data).all():
                raise FloatingPointError(f"non-finite values inverting flow block {i}")
        return x

    def log_prob(self, e, c):
        """Per-sample log density as a Tensor (float32 training path)."""
        z, logdet = self.forward(e, c)
        if self.prior is not None:
            base = self.prior.log_prob(z, c)
        else:
            base = _standard_normal_logprob(z)
        return T.add(base, logdet)

    def log_prob_values(self, e, c):
        """Eval-mode log densities as a float64 ndarray (reporting path)."""
        was_training = self.training
        self.eval()
        with no_grad():
            z, logdet = self.forward(T.Tensor(e), None if c is None else T.Tensor(c))
            if self.prior is not None:
                base = self.prior.log_prob(z, T.Tensor(c)).data.astype(np.float64)
            else:
                zz = z.data.astype(np.float64)
                base = -0.5 * (zz * zz).sum(axis=1) - 0.5 * self.dim * LOG_2PI
        self.train(was_training)
        return base + logdet.data.astype(np.float64)

    def sample(self, c_row, n=1, rng=None, mean_mode=False):
        """Draw latents for one condition vector; prefix-stable in n."""
        was_training = self.training
        self.eval()
        c_row = np.asarray(c_row, np.float32).reshape(-1)
        if self.prior is not None:
            z = self.prior.sample(c_row, n, rng, mean_mode)
        elif mean_mode:
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
            "mask_kind": self.mask_kind,
            "conditioning": self.conditioning,
            "batch_norm": self.batch_norm,
            "block_order": "coupling_then_batchnorm",
        }
