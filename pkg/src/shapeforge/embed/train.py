"""Contrastive pretraining of the joint embedder on (render, caption) pairs."""

import numpy as np

from ..grad import backward
from ..grad.optim import Adam
from ..grad.rng import StreamPool
from .model import JointEmbedder, contrastive_loss
from .tokenizer import Tokenizer


def contrastive_train(corpus, epochs=40, batch=32, lr=1e-3, embed_dim=64,
                      seed=0, normalize_condition=True, log_fn=None):
    """Train f_I/f_T on the corpus train split and return the frozen embedder.

    Each step pairs a random view of each sampled shape with a random caption
    from its caption set; the loss is symmetric InfoNCE over in-batch
    similarities. Returns (embedder, per-epoch loss log).
    """
    n = corpus.count("train")
    if batch > n:
        raise ValueError(f"batch {batch} exceeds corpus train size {n}")
    pool = StreamPool(seed)
    all_captions = [c for i in range(n) for c in corpus.captions("train", i)]
    tokenizer = Tokenizer.build(all_captions)
    embedder = JointEmbedder(
        tokenizer, embed_dim=embed_dim, image_size=corpus.cfg.image_size,
        seed_rng=pool.stream("init"), normalize_condition=normalize_condition)
    opt = Adam(list(embedder.named_parameters()), lr=lr)
    history = []
    for epoch in range(epochs):
        order = pool.stream("shuffle", epoch).permutation(n)
        pick = pool.stream("pick", epoch)
        losses = []
        for start in range(0, n - batch + 1, batch):
            idx = order[start:start + batch]
            images = np.stack([
                corpus.images("train", i)[pick.integers(0, corpus.cfg.views)]
                for i in idx]).astype(np.float32) / 255.0
            texts = []
            for i in idx:
                caps = corpus.captions("train", i)
                texts.append(caps[pick.integers(0, len(caps))])
            img_emb = embedder.forward_images(images)
            txt_emb = embedder.forward_texts(texts)
            loss = contrastive_loss(img_emb, txt_emb, embedder.log_tau)
            opt.zero_grad()
            backward(loss)
            opt.step()
            losses.append(loss.item())
        history.append(float(np.mean(losses)))
        if log_fn:
            log_fn(f"embedder epoch {epoch + 1}/{epochs} loss {history[-1]:.4f}")
    embedder.freeze()
    return embedder, history


def retrieval_accuracy(embedder, corpus, split="test"):
    """Top-1 text->image retrieval accuracy on (caption set, shape) pairs.

    Both sides are ensembled: the query is the mean text embedding over the
    shape's caption set (prompt ensembling), the gallery entry is the mean
    image embedding over the shape's K views. Deterministic.
    """
    n = corpus.count(split)
    img_emb = np.stack([
        embedder.embed_images(corpus.images(split, i)).mean(axis=0)
        for i in range(n)])
    hits = 0
    for i in range(n):
        caps = corpus.captions(split, i)
        txt = np.mean([embedder.embed_text(c) for c in caps], axis=0)
        hits += int(np.argmax(img_emb @ txt) == i)
    return hits / n
