"""Implicit occupancy decoders and the point-cloud folding decoder."""

import numpy as np

from ..grad import nn
from ..grad import tensor as T


class _ResBlock(nn.Module):
    def __init__(self, width, rng):
        super().__init__()
        self.fc1 = nn.Linear(width, width, rng)
        self.fc2 = nn.Linear(width, width, rng)

    def __call__(self, h):
        d = self.fc2(T.relu(self.fc1(T.relu(h))))
        return T.add(h, d)


class _CondBNResBlock(nn.Module):
    """Residual block whose normalization scale/shift come from the latent."""

    def __init__(self, width, latent_dim, rng):
        super().__init__()
        self.bn1 = nn.BatchNorm(width, channel_axis=2, affine=False)
        self.bn2 = nn.BatchNorm(width, channel_axis=2, affine=False)
        self.fc1 = nn.Linear(width, width, rng)
        self.fc2 = nn.Linear(width, width, rng)
        self.g1 = nn.Linear(latent_dim, width, rng, zero_init=True)
        self.b1 = nn.Linear(latent_dim, width, rng, zero_init=True)
        self.g2 = nn.Linear(latent_dim, width, rng, zero_init=True)
        self.b2 = nn.Linear(latent_dim, width, rng, zero_init=True)

    @staticmethod
    def _cbn(bn, gamma_net, beta_net, h, e):
        gamma = T.add(gamma_net(e), 1.0)  # starts as identity scale
        beta = beta_net(e)
        hn = bn(h)
        return T.add(T.mul(hn, T.reshape(gamma, (gamma.data.shape[0], 1, -1))),
                     T.reshape(beta, (beta.data.shape[0], 1, -1)))

    def __call__(self, h, e):
        net = self.fc1(T.relu(self._cbn(self.bn1, self.g1, self.b1, h, e)))
        net = self.fc2(T.relu(self._cbn(self.bn2, self.g2, self.b2, net, e)))
        return T.add(h, net)


class ImplicitDecoder(nn.Module):
    """Latent + query point -> occupancy logit.

    variant "concat": the latent is concatenated to each point, then five
    plain residual dense blocks. variant "cbn": points are embedded alone and
    the latent drives conditional batch-norm inside each block.
    """

    def __init__(self, latent_dim, rng, width=128, blocks=5, variant="concat",
                 point_scale=1.0):
        super().__init__()
        if variant not in ("concat", "cbn"):
            raise ValueError(f"unknown decoder variant {variant!r}")
        self.variant = variant
        self.latent_dim = latent_dim
        self.width = width
        # >1 rescales query coordinates before the first layer; raising it
        # acts like a larger learning rate on the point pathway and can tip
        # MSE-on-sigmoid training into a saturated constant predictor
        self.point_scale = point_scale
        in_dim = latent_dim + 3 if variant == "concat" else 3
        self.fc_in = nn.Linear(in_dim, width, rng)
        if variant == "concat":
            self.blocks = nn.ModuleList(_ResBlock(width, rng) for _ in range(blocks))
        else:
            self.blocks = nn.ModuleList(
                _CondBNResBlock(width, latent_dim, rng) for _ in range(blocks))
        self.fc_out = nn.Linear(width, 1, rng)

    def logits(self, e, points):
        """e: (B, D) Tensor; points: (B, P, 3) array -> (B, P) logit Tensor."""
        pts = T.constant(np.asarray(points, dtype=np.float32) * self.point_scale)
        b, p = pts.data.shape[:2]
        if self.variant == "concat":
            tiled = T.mul(T.reshape(e, (b, 1, -1)), np.ones((1, p, 1), np.float32))
            h = self.fc_in(T.concat([tiled, pts], axis=2))
            for blk in self.blocks:
                h = blk(h)
        else:
            h = self.fc_in(pts)
            for blk in self.blocks:
                h = blk(h, e)
        out = self.fc_out(T.relu(h))
        return T.reshape(out, (b, p))

    def probabilities(self, e, points):
        return T.sigmoid(self.logits(e, points))


class FoldingDecoder(nn.Module):
    """Two sequential folds of a single square grid, driven by the latent."""

    def __init__(self, latent_dim, rng, grid_side=32, hidden=256):
        super().__init__()
        self.grid_side = grid_side
        lin = np.linspace(-0.5, 0.5, grid_side, dtype=np.float32)
        gx, gy = np.meshgrid(lin, lin, indexing="ij")
        self.grid = np.stack([gx, gy], axis=-1).reshape(-1, 2)  # (G^2, 2)
        self.fold1 = nn.MLP((latent_dim + 2, hidden, hidden, 3), rng)
        self.fold2 = nn.MLP((latent_dim + 3, hidden, hidden, 3), rng)
        self.latent_dim = latent_dim

    @property
    def n_points(self):
        return self.grid_side**2

    def __call__(self, e):
        """e: (B, D) Tensor -> (B, G^2, 3) point Tensor."""
        b = e.data.shape[0]
        g2 = self.n_points
        tiled = T.mul(T.reshape(e, (b, 1, -1)), np.ones((1, g2, 1), np.float32))
        grid = T.constant(np.broadcast_to(self.grid, (b, g2, 2)).copy())
        p1 = self.fold1(T.concat([tiled, grid], axis=2))
        p2 = self.fold2(T.concat([tiled, p1], axis=2))
        return p2
