"""Stage-1 training: noise-regularized autoencoding of voxel shapes."""

import json
from pathlib import Path

import numpy as np

from ..grad import backward, no_grad
from ..grad import nn
from ..grad import tensor as T
from ..grad.optim import Adam
from ..grad.rng import StreamPool
from ..synthshape.sampling import sample_queries
from .chamfer import chamfer_loss
from .decoder import FoldingDecoder, ImplicitDecoder
from .encoder import PointNetEncoder, VoxelEncoder

LATENT_NOISE_STD = 0.1
ENCODER_KINDS = ("vox", "resvox", "pointnet")
DECODER_KINDS = ("concat", "cbn")


class ShapeAutoencoder(nn.Module):
    """Voxel (or point) encoder plus implicit occupancy decoder."""

    def __init__(self, latent_dim, resolution, rng, encoder="vox",
                 decoder="concat", channels=(8, 16, 32, 64), width=128,
                 blocks=5, cloud_points=1024):
        super().__init__()
        if encoder not in ENCODER_KINDS:
            raise ValueError(f"unknown encoder kind {encoder!r}")
        self.encoder_kind = encoder
        self.cloud_points = cloud_points
        if encoder == "pointnet":
            self.encoder = PointNetEncoder(latent_dim, rng)
        else:
            self.encoder = VoxelEncoder(
                latent_dim, resolution, rng, channels=channels,
                variant="plain" if encoder == "vox" else "residual")
        self.decoder = ImplicitDecoder(latent_dim, rng, width=width,
                                       blocks=blocks, variant=decoder)
        self.latent_dim = latent_dim
        self.resolution = resolution

    def encode(self, inputs, noise_std=0.0, rng=None):
        """Latent codes with optional Gaussian noise injection.

        inputs: (B, R, R, R) grids or (B, N, 3) clouds per encoder kind.
        noise_std > 0 requires an explicit rng stream.
        """
        e = self.encoder(inputs)
        if noise_std > 0:
            if rng is None:
                raise ValueError("noise injection needs an rng stream")
            eps = rng.normal(0.0, noise_std, size=e.data.shape).astype(np.float32)
            e = T.add(e, T.constant(eps))
        return e

    def encode_clean(self, inputs):
        """Deterministic eval-mode latents as a plain ndarray."""
        was_training = self.training
        self.eval()
        with no_grad():
            e = self.encoder(inputs).data.copy()
        self.train(was_training)
        return e

    def decode_probabilities(self, e, points):
        return self.decoder.probabilities(e, points)

    def hyperparameters(self):
        return {
            "latent_dim": self.latent_dim,
            "resolution": self.resolution,
            "encoder": self.encoder_kind,
            "decoder": self.decoder.variant,
            "width": self.decoder.width,
        }


def decode_grid(model, latent, resolution, chunk=16384):
    """Probability field of one latent on the cell-center lattice."""
    centers = (np.arange(resolution) + 0.5) / resolution - 0.5
    gx, gy, gz = np.meshgrid(centers, centers, centers, indexing="ij")
    pts = np.stack([gx, gy, gz], axis=-1).reshape(-1, 3).astype(np.float32)
    e = T.Tensor(np.asarray(latent, np.float32).reshape(1, -1))
    was_training = model.training
    model.eval()
    out = np.empty(len(pts), dtype=np.float32)
    with no_grad():
        for lo in range(0, len(pts), chunk):
            block = pts[lo:lo + chunk][None]
            out[lo:lo + chunk] = model.decode_probabilities(e, block).data[0]
    model.train(was_training)
    return out.reshape(resolution, resolution, resolution)


def _encoder_inputs(model, corpus, split, indices, clouds=None):
    if model.encoder_kind == "pointnet":
        return np.stack([clouds[i] for i in indices])
    return np.stack([corpus.voxels(split, i) for i in indices]).astype(np.float32)


def _surface_clouds(corpus, split, n_points, seed):
    pool = StreamPool(seed)
    return [corpus.surface_cloud(split, i, n_points, pool.stream("cloud", i))
            for i in range(corpus.count(split))]


def train_stage1(corpus, epochs=300, batch=32, lr=1e-4, noise_std=LATENT_NOISE_STD,
                 points_per_step=512, latent_dim=128, encoder="vox",
                 decoder="concat", channels=(8, 16, 32, 64), width=128,
                 blocks=5, seed=0, log_fn=None):
    """Train the autoencoder on the train split; returns (model, history).

    The loss is mean squared error between predicted occupancy probabilities
    and the exact {0, 1} labels on a fresh subsample of each shape's stored
    query points every step. Latent noise is resampled per minibatch and used
    only here; all downstream consumers read noise-free eval-mode latents.
    """
    pool = StreamPool(seed)
    n = corpus.count("train")
    model = ShapeAutoencoder(latent_dim, corpus.cfg.resolution, pool.stream("init"),
                             encoder=encoder, decoder=decoder,
                             channels=channels, width=width, blocks=blocks)
    clouds = None
    if encoder == "pointnet":
        clouds = _surface_clouds(corpus, "train", model.cloud_points,
                                 pool.child("clouds").seed)
    opt = Adam(list(model.named_parameters()), lr=lr)
    history = []
    m_total = corpus.cfg.queries
    for epoch in range(epochs):
        order = pool.stream("shuffle", epoch).permutation(n)
        noise_rng = pool.stream("noise", epoch)
        pick = pool.stream("points", epoch)
        losses = []
        for start in range(0, n - batch + 1, batch):
            idx = order[start:start + batch]
            inputs = _encoder_inputs(model, corpus, "train", idx, clouds)
            pts = np.empty((len(idx), points_per_step, 3), np.float32)
            targ = np.empty((len(idx), points_per_step), np.float32)
            for row, i in enumerate(idx):
                p, o = corpus.queries("train", i)
                sel = pick.integers(0, m_total, points_per_step)
                pts[row], targ[row] = p[sel], o[sel]
            e = model.encode(inputs, noise_std, noise_rng)
            probs = model.decode_probabilities(e, pts)
            diff = T.add(probs, T.constant(-targ))
            loss = T.reduce_mean(T.mul(diff, diff))
            if not np.isfinite(loss.data).all():
                raise RuntimeError(
                    f"stage-1 loss became non-finite at epoch {epoch} step {start // batch}")
            opt.zero_grad()
            backward(loss)
            opt.step()
            losses.append(loss.item())
        history.append(float(np.mean(losses)))
        if log_fn:
            log_fn(f"stage1 epoch {epoch + 1}/{epochs} mse {history[-1]:.5f}")
    model.eval()
    return model, history


def latent_table(model, corpus, split="train", batch=64, clouds_seed=0):
    """Noise-free eval-mode latents for every sample of a split, (N, D)."""
    n = corpus.count(split)
    clouds = None
    if model.encoder_kind == "pointnet":
        clouds = _surface_clouds(corpus, split, model.cloud_points, clouds_seed)
    rows = []
    for lo in range(0, n, batch):
        idx = range(lo, min(lo + batch, n))
        rows.append(model.encode_clean(_encoder_inputs(model, corpus, split, idx, clouds)))
    return np.concatenate(rows) if rows else np.zeros((0, model.latent_dim), np.float32)


def save_latent_table(path, table, sample_ids):
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    np.ascontiguousarray(table, dtype="<f4").tofile(path / "latents.bin")
    index = {"rows": {str(sid): row for row, sid in enumerate(sample_ids)},
             "shape": list(table.shape)}
    (path / "index.json").write_text(json.dumps(index, sort_keys=True))


def load_latent_table(path):
    path = Path(path)
    index = json.loads((path / "index.json").read_text())
    table = np.fromfile(path / "latents.bin", dtype="<f4").reshape(index["shape"])
    return table, index


def reconstruction_metrics(model, corpus, split="test", n_points=2048,
                           threshold=0.5, max_samples=None, seed=0):
    """{MSE, IOU} of the trained autoencoder over a split.

    MSE is measured on fresh oracle-labelled query points; IOU compares the
    thresholded decoded grid with the stored voxelization. `max_samples`
    caps the evaluated subset (deterministic prefix) for desk-scale runs.
    """
    try:
        n = corpus.count(split)
    except KeyError:
        raise ValueError(f"unknown split {split!r}") from None
    if n == 0:
        raise ValueError(f"split {split!r} is empty")
    take = n if max_samples is None else min(n, max_samples)
    pool = StreamPool(seed)
    clouds = None
    if model.encoder_kind == "pointnet":
        clouds = _surface_clouds(corpus, split, model.cloud_points,
                                 pool.child("clouds").seed)
    mses, ious = [], []
    r = corpus.cfg.resolution
    for i in range(take):
        inputs = _encoder_inputs(model, corpus, split, [i], clouds)
        e = model.encode_clean(inputs)[0]
        spec = corpus.spec(split, i)
        pts, occ = sample_queries(spec, n_points, pool.stream("recon", i))
        with no_grad():
            probs = model.decode_probabilities(
                T.Tensor(e.reshape(1, -1)), pts[None]).data[0]
        mses.append(float(np.mean((probs - occ) ** 2)))
        pred = decode_grid(model, e, r) >= threshold
        truth = corpus.voxels(split, i)
        ious.append(grid_iou(pred, truth))
    return {"mse": float(np.mean(mses)), "iou": float(np.mean(ious)),
            "samples": take}


def grid_iou(a, b):
    """Intersection over union of boolean grids; both empty counts as 0."""
    a = np.asarray(a, bool)
    b = np.asarray(b, bool)
    union = np.logical_or(a, b).sum()
    if union == 0:
        return 0.0
    return float(np.logical_and(a, b).sum() / union)


def train_pointcloud_variant(corpus, epochs=60, batch=16, lr=1e-3,
                             latent_dim=128, grid_side=32, cloud_points=2048,
                             input_points=1024, seed=0, log_fn=None):
    """PointNet encoder + folding decoder trained with the Chamfer loss."""
    pool = StreamPool(seed)
    n = corpus.count("train")
    encoder = PointNetEncoder(latent_dim, pool.stream("init"))
    decoder = FoldingDecoder(latent_dim, pool.stream("init", "fold"), grid_side=grid_side)
    model = PointAutoencoder(encoder, decoder)
    clouds = _surface_clouds(corpus, "train", cloud_points, pool.child("clouds").seed)
    opt = Adam(list(model.named_parameters()), lr=lr)
    history = []
    for epoch in range(epochs):
        order = pool.stream("shuffle", epoch).permutation(n)
        pick = pool.stream("sub", epoch)
        losses = []
        for start in range(0, n - batch + 1, batch):
            idx = order[start:start + batch]
            target = np.stack([clouds[i] for i in idx])
            sel = pick.integers(0, cloud_points, input_points)
            pred = model(target[:, sel])
            loss = chamfer_loss(pred, target)
            if not np.isfinite(loss.data).all():
                raise RuntimeError(f"point-cloud loss became non-finite at epoch {epoch}")
            opt.zero_grad()
            backward(loss)
            opt.step()
            losses.append(loss.item())
        history.append(float(np.mean(losses)))
        if log_fn:
            log_fn(f"pointcloud epoch {epoch + 1}/{epochs} chamfer {history[-1]:.5f}")
    model.eval()
    return model, history, clouds


class PointAutoencoder(nn.Module):
    def __init__(self, encoder, decoder):
        super().__init__()
        self.encoder = encoder
        self.decoder = decoder

    def __call__(self, clouds):
        return self.decoder(self.encoder(clouds))
