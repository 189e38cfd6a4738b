"""Jointly trained image and text encoders sharing one embedding space.

Both towers emit L2-normalized vectors of width E. After contrastive
pretraining the embedder is frozen: no downstream stage updates it.
"""

import numpy as np

from ..grad import nn
from ..grad import tensor as T
from .tokenizer import Tokenizer  # noqa: F401

INIT_TEMPERATURE = 0.07


def conv2d(x, w, b, stride, padding):
    """2-D convolution as a depth-1 volume through conv3d."""
    xt = T.reshape(x, (x.data.shape[0], x.data.shape[1], 1) + x.data.shape[2:])
    out = T.conv3d(xt, w, b, stride=stride, padding=padding)
    s = out.data.shape
    return T.reshape(out, (s[0], s[1], s[3], s[4]))


class _Conv2dLayer(nn.Module):
    def __init__(self, in_ch, out_ch, rng, stride=2):
        super().__init__()
        fan_in = in_ch * 9
        w = nn.he_init(rng, fan_in, (out_ch, in_ch, 3, 3, 3))
        w[:, :, 0] = 0.0  # depth taps beyond the single image plane stay dead
        w[:, :, 2] = 0.0
        self.weight = T.Tensor(w, requires_grad=True)
        self.bias = T.Tensor(np.zeros(out_ch, np.float32), requires_grad=True)
        self.stride = stride

    def __call__(self, x):
        return conv2d(x, self.weight, self.bias, self.stride, 1)


class ImageTower(nn.Module):
    """3 batch-normalized stride-2 conv layers + linear head -> R^E."""

    def __init__(self, embed_dim, image_size, rng, channels=(16, 32, 64)):
        super().__init__()
        self.image_size = image_size
        c1, c2, c3 = channels
        self.conv1 = _Conv2dLayer(1, c1, rng)
        self.bn1 = nn.BatchNorm(c1)
        self.conv2 = _Conv2dLayer(c1, c2, rng)
        self.bn2 = nn.BatchNorm(c2)
        self.conv3 = _Conv2dLayer(c2, c3, rng)
        self.bn3 = nn.BatchNorm(c3)
        side = image_size // 8
        self.head = nn.Linear(c3 * side * side, embed_dim, rng)

    def __call__(self, x):
        h = T.relu(self.bn1(self.conv1(x)))
        h = T.relu(self.bn2(self.conv2(h)))
        h = T.relu(self.bn3(self.conv3(h)))
        h = T.reshape(h, (h.data.shape[0], -1))
        return self.head(h)


class TextTower(nn.Module):
    """Token-embedding average + 2-layer MLP -> R^E."""

    def __init__(self, embed_dim, vocab_size, rng, token_dim=64, hidden=128):
        super().__init__()
        table = (rng.standard_normal((vocab_size, token_dim)) * 0.1).astype(np.float32)
        self.token_table = T.Tensor(table, requires_grad=True)
        self.fc1 = nn.Linear(token_dim, hidden, rng)
        self.fc2 = nn.Linear(hidden, embed_dim, rng)

    def __call__(self, ids, mask):
        """ids: (B, L) int array; mask: (B, L) float array, 1 on real tokens."""
        emb = T.embedding(self.token_table, ids)  # (B, L, Dtok)
        m = T.constant(mask[:, :, None].astype(np.float32))
        total = T.reduce_sum(T.mul(emb, m), axis=1)
        count = T.constant(np.maximum(mask.sum(axis=1, keepdims=True), 1.0).astype(np.float32))
        avg = T.div(total, count)
        return self.fc2(T.relu(self.fc1(avg)))


def l2_normalize(x):
    sq = T.reduce_sum(T.mul(x, x), axis=1, keepdims=True)
    return T.mul(x, T.pow_scalar(T.add(sq, 1e-12), -0.5))


class JointEmbedder(nn.Module):
    def __init__(self, tokenizer, embed_dim=64, image_size=64, seed_rng=None,
                 channels=(16, 32, 64), normalize_condition=True):
        super().__init__()
        rng = seed_rng if seed_rng is not None else np.random.default_rng(0)
        self.tokenizer = tokenizer
        self.embed_dim = embed_dim
        self.normalize_condition = normalize_condition
        self.image_tower = ImageTower(embed_dim, image_size, rng, channels)
        self.text_tower = TextTower(embed_dim, tokenizer.vocab_size, rng)
        self.log_tau = T.Tensor(np.log(INIT_TEMPERATURE), requires_grad=True)
        self.frozen = False

    # -- training-path forward (Tensors, gradients flow) -------------------
    def forward_images(self, images):
        """images: (B, H, W) float in [0, 1] -> normalized (B, E) Tensor."""
        if images.shape[1:] != (self.image_tower.image_size,) * 2:
            raise ValueError(
                f"expected {(self.image_tower.image_size,) * 2} images, got {images.shape[1:]}")
        x = T.constant(images[:, None, :, :].astype(np.float32))
        return l2_normalize(self.image_tower(x))

    def tokenize_batch(self, texts):
        ids = np.zeros((len(texts), self.tokenizer.max_len), dtype=np.int64)
        mask = np.zeros_like(ids, dtype=np.float32)
        for i, t in enumerate(texts):
            enc = self.tokenizer.encode(t)
            ids[i, :len(enc)] = enc
            mask[i, :len(enc)] = 1.0
        return ids, mask

    def forward_texts(self, texts):
        ids, mask = self.tokenize_batch(texts)
        return l2_normalize(self.text_tower(ids, mask))

    # -- frozen inference ---------------------------------------------------
    def embed_image(self, image):
        """One (H, W) grayscale image (uint8 or [0,1] float) -> (E,) ndarray."""
        img = np.asarray(image)
        if img.dtype == np.uint8:
            img = img.astype(np.float32) / 255.0
        with T.no_grad():
            return self.forward_images(img[None]).data[0].copy()

    def embed_images(self, images):
        imgs = np.asarray(images)
        if imgs.dtype == np.uint8:
            imgs = imgs.astype(np.float32) / 255.0
        with T.no_grad():
            return self.forward_images(imgs).data.copy()

    def embed_text(self, text):
        if not isinstance(text, str) or not text.strip():
            raise ValueError("empty text prompt")
        with T.no_grad():
            return self.forward_texts([text]).data[0].copy()

    def freeze(self):
        self.eval()
        for p in self.parameters():
            p.requires_grad = False
        self.frozen = True
        return self

    def hyperparameters(self):
        return {
            "embed_dim": self.embed_dim,
            "image_size": self.image_tower.image_size,
            "vocab_size": self.tokenizer.vocab_size,
            "normalize_condition": self.normalize_condition,
        }


def contrastive_loss(img_emb, txt_emb, log_tau):
    """Symmetric cross-entropy over in-batch cosine-similarity logits.

    Returns the sum of the two directional mean cross-entropies, so a batch
    of identical embeddings scores exactly 2*log(batch).
    """
    n = img_emb.data.shape[0]
    scale = T.exp(T.mul(log_tau, -1.0))  # 1 / tau
    logits = T.mul(T.matmul(img_emb, T.transpose(txt_emb, (1, 0))), scale)
    targets = np.arange(n)
    li2t = T.log_softmax(logits, axis=1)
    lt2i = T.log_softmax(logits, axis=0)
    picked = T.take(li2t, (targets, targets))
    picked2 = T.take(lt2i, (targets, targets))
    ce = T.mul(T.add(T.reduce_mean(picked), T.reduce_mean(picked2)), -1.0)
    return ce
