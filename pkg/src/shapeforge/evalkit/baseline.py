"""Supervised baseline: a linear map from frozen text embeddings to latents.

Trained with an L2 loss on (caption embedding, latent) pairs from a category
subset only, then evaluated on the full query set. The gap against the
image-conditioned flow pipeline on categories the baseline never saw is the
desk-scale analogue of the zero-shot comparison.
"""

import numpy as np

from ..pipeline.generate import GenerationRequest
from ..shapeae.train import decode_grid
from .report import run_query_set


class LinearTextToLatent:
    """W, b minimizing ||E W + b - L||^2 (closed-form least squares)."""

    def __init__(self, weights, bias):
        self.weights = weights
        self.bias = bias

    @classmethod
    def fit(cls, text_embeddings, latents, ridge=1e-8):
        e = np.asarray(text_embeddings, np.float64)
        l = np.asarray(latents, np.float64)
        if len(e) == 0:
            raise ValueError("no (caption, latent) pairs to fit")
        ones = np.ones((len(e), 1))
        x = np.concatenate([e, ones], axis=1)
        gram = x.T @ x + ridge * np.eye(x.shape[1])
        sol = np.linalg.solve(gram, x.T @ l)
        return cls(sol[:-1].astype(np.float32), sol[-1].astype(np.float32))

    def predict(self, text_embeddings):
        e = np.asarray(text_embeddings, np.float32)
        return e @ self.weights + self.bias

    def train_mse(self, text_embeddings, latents):
        pred = self.predict(text_embeddings)
        return float(np.mean((pred - np.asarray(latents, np.float32)) ** 2))


def baseline_pairs(bundle, corpus, categories_subset):
    """(text embedding, latent) pairs for train samples in the subset."""
    embs, lats = [], []
    for i in range(corpus.count("train")):
        if corpus.meta("train", i)["category"] not in categories_subset:
            continue
        for cap in corpus.captions("train", i):
            embs.append(bundle.embedder.embed_text(cap))
            lats.append(bundle.latents[i])
    if not embs:
        raise ValueError(f"no pairs found for categories {categories_subset}")
    return np.stack(embs), np.stack(lats)


def supervised_baseline(bundle, corpus, classifier, query_set,
                        categories_subset=("box", "sphere"), resolution=32,
                        threshold=0.05, seed=0):
    """Fit the linear baseline and evaluate it on the full query set."""
    embs, lats = baseline_pairs(bundle, corpus, categories_subset)
    model = LinearTextToLatent.fit(embs, lats)
    grids = []
    for prompt in query_set.prompts():
        c = bundle.embedder.embed_text(prompt)
        latent = model.predict(c[None])[0]
        probs = decode_grid(bundle.autoencoder, latent, resolution)
        grids.append(probs >= threshold)
    report = run_query_set(query_set, bundle, classifier, corpus,
                           resolution=resolution, threshold=threshold,
                           seed=seed, tag="supervised_linear_baseline",
                           grids=np.stack(grids))
    report.extra["train_categories"] = list(categories_subset)
    report.extra["train_mse"] = model.train_mse(embs, lats)
    return model, report
