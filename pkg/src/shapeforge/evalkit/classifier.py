"""Voxel category classifier; its fourth-layer features feed the FID metric."""

import numpy as np

from ..grad import backward, no_grad
from ..grad import nn
from ..grad import tensor as T
from ..grad.optim import Adam
from ..grad.rng import StreamPool


class VoxelClassifier(nn.Module):
    """4 batch-normalized stride-2 3D convs + 2 dense layers.

    `features()` taps the flattened activations after the fourth conv layer.
    """

    def __init__(self, n_classes, resolution, rng, channels=(8, 16, 32, 64),
                 hidden=128):
        super().__init__()
        if resolution % 16 != 0:
            raise ValueError(f"resolution {resolution} not divisible by 16")
        chans = (1,) + tuple(channels)
        self.convs = nn.ModuleList(
            nn.Conv3d(chans[i], chans[i + 1], 3, rng, stride=2, padding=1)
            for i in range(4))
        self.bns = nn.ModuleList(nn.BatchNorm(c) for c in channels)
        side = resolution // 16
        self.feature_dim = channels[-1] * side**3
        self.fc1 = nn.Linear(self.feature_dim, hidden, rng)
        self.fc2 = nn.Linear(hidden, n_classes, rng)
        self.resolution = resolution
        self.n_classes = n_classes

    def _tap(self, grids):
        x = np.asarray(grids, np.float32)
        h = T.constant(x[:, None])
        for conv, bn in zip(self.convs, self.bns):
            h = T.relu(bn(conv(h)))
        return T.reshape(h, (h.data.shape[0], -1))

    def logits(self, grids):
        return self.fc2(T.relu(self.fc1(self._tap(grids))))

    def probabilities(self, grids):
        return T.softmax(self.logits(grids), axis=1)

    def features(self, grids, batch=64):
        """Eval-mode fourth-layer feature vectors, (N, F) ndarray."""
        was_training = self.training
        self.eval()
        rows = []
        with no_grad():
            for lo in range(0, len(grids), batch):
                rows.append(self._tap(grids[lo:lo + batch]).data.copy())
        self.train(was_training)
        return np.concatenate(rows) if rows else np.zeros((0, self.feature_dim), np.float32)

    def predict(self, grids, batch=64):
        was_training = self.training
        self.eval()
        out = []
        with no_grad():
            for lo in range(0, len(grids), batch):
                out.append(np.argmax(self.logits(grids[lo:lo + batch]).data, axis=1))
        self.train(was_training)
        return np.concatenate(out) if out else np.zeros(0, np.int64)


def cross_entropy(logits, labels):
    lsm = T.log_softmax(logits, axis=1)
    picked = T.take(lsm, (np.arange(len(labels)), np.asarray(labels)))
    return T.mul(T.reduce_mean(picked), -1.0)


def train_classifier_arrays(train_grids, train_labels, test_grids, test_labels,
                            n_classes, epochs=30, batch=32, lr=1e-3,
                            channels=(8, 16, 32, 64), seed=0, log_fn=None):
    """Fit on (grids, labels) arrays; returns (classifier, held-out accuracy)."""
    train_labels = np.asarray(train_labels)
    if len(np.unique(train_labels)) < 2:
        raise ValueError("classifier needs at least two categories in the corpus")
    pool = StreamPool(seed)
    resolution = np.asarray(train_grids[0]).shape[0]
    model = VoxelClassifier(n_classes, resolution, pool.stream("init"),
                            channels=channels)
    opt = Adam(list(model.named_parameters()), lr=lr)
    n = len(train_grids)
    bsz = min(batch, n)
    for epoch in range(epochs):
        order = pool.stream("shuffle", epoch).permutation(n)
        losses = []
        for start in range(0, n - bsz + 1, bsz):
            idx = order[start:start + bsz]
            grids = np.stack([train_grids[i] for i in idx])
            loss = cross_entropy(model.logits(grids), train_labels[idx])
            opt.zero_grad()
            backward(loss)
            opt.step()
            losses.append(loss.item())
        if log_fn:
            log_fn(f"classifier epoch {epoch + 1}/{epochs} ce {np.mean(losses):.4f}")
    model.eval()
    if len(test_labels):
        acc = float((model.predict(np.stack(test_grids)) == np.asarray(test_labels)).mean())
    else:
        acc = float("nan")
    return model, acc


def train_classifier(corpus, epochs=30, batch=32, lr=1e-3,
                     channels=(8, 16, 32, 64), seed=0, log_fn=None):
    """Fit on the corpus train split; returns (classifier, held-out accuracy)."""
    train_grids = [corpus.voxels("train", i) for i in range(corpus.count("train"))]
    train_labels = [corpus.category_index("train", i)
                    for i in range(corpus.count("train"))]
    test_grids = [corpus.voxels("test", i) for i in range(corpus.count("test"))]
    test_labels = [corpus.category_index("test", i)
                   for i in range(corpus.count("test"))]
    return train_classifier_arrays(
        train_grids, train_labels, test_grids, test_labels,
        n_classes=len(corpus.cfg.categories), epochs=epochs, batch=batch,
        lr=lr, channels=channels, seed=seed, log_fn=log_fn)
