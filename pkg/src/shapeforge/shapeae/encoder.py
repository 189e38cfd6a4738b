"""Shape encoders: batch-normalized voxel conv stacks and a point-set encoder."""

import numpy as np

from ..grad import nn
from ..grad import tensor as T


class _ConvBlock(nn.Module):
    def __init__(self, in_ch, out_ch, rng):
        super().__init__()
        self.conv = nn.Conv3d(in_ch, out_ch, 3, rng, stride=2, padding=1)
        self.bn = nn.BatchNorm(out_ch)

    def __call__(self, x):
        return T.relu(self.bn(self.conv(x)))


class _ResConvBlock(nn.Module):
    """Strided conv block with a 1x1x1 strided projection skip."""

    def __init__(self, in_ch, out_ch, rng):
        super().__init__()
        self.conv = nn.Conv3d(in_ch, out_ch, 3, rng, stride=2, padding=1)
        self.bn = nn.BatchNorm(out_ch)
        self.proj = nn.Conv3d(in_ch, out_ch, 1, rng, stride=2, padding=0)

    def __call__(self, x):
        return T.relu(T.add(self.bn(self.conv(x)), self.proj(x)))


class VoxelEncoder(nn.Module):
    """4 stride-2 3D conv layers + linear head -> latent.

    variant: "plain" (conv+bn+relu) or "residual" (adds projection skips).
    Input resolution must be divisible by 16.
    """

    def __init__(self, latent_dim, resolution, rng, channels=(8, 16, 32, 64),
                 variant="plain"):
        super().__init__()
        if resolution % 16 != 0:
            raise ValueError(f"resolution {resolution} not divisible by 16")
        if variant not in ("plain", "residual"):
            raise ValueError(f"unknown encoder variant {variant!r}")
        block = _ConvBlock if variant == "plain" else _ResConvBlock
        chans = (1,) + tuple(channels)
        self.blocks = nn.ModuleList(block(chans[i], chans[i + 1], rng) for i in range(4))
        side = resolution // 16
        self.head = nn.Linear(channels[-1] * side**3, latent_dim, rng)
        self.resolution = resolution
        self.variant = variant
        self.latent_dim = latent_dim
        self.channels = tuple(channels)

    def __call__(self, grids):
        """grids: (B, R, R, R) float/bool array -> (B, D) latent Tensor."""
        x = np.asarray(grids, dtype=np.float32)
        if x.shape[1:] != (self.resolution,) * 3:
            raise ValueError(f"expected {(self.resolution,)*3} grids, got {x.shape[1:]}")
        h = T.constant(x[:, None])
        for b in self.blocks:
            h = b(h)
        return self.head(T.reshape(h, (h.data.shape[0], -1)))


class PointNetEncoder(nn.Module):
    """5 shared linear layers per point, max-pool over points, MLP head."""

    def __init__(self, latent_dim, rng, widths=(64, 64, 128, 128, 256), head_hidden=256):
        super().__init__()
        dims = (3,) + tuple(widths)
        self.layers = nn.ModuleList(nn.Linear(dims[i], dims[i + 1], rng) for i in range(5))
        self.head1 = nn.Linear(widths[-1], head_hidden, rng)
        self.head2 = nn.Linear(head_hidden, latent_dim, rng)
        self.latent_dim = latent_dim

    def __call__(self, clouds):
        """clouds: (B, N, 3) array -> (B, D) latent Tensor."""
        h = T.constant(np.asarray(clouds, dtype=np.float32))
        for i, layer in enumerate(self.layers):
            h = layer(h)
            if i < len(self.layers) - 1:
                h = T.relu(h)
        pooled = T.reduce_max(h, axis=1)
        return self.head2(T.relu(self.head1(pooled)))
