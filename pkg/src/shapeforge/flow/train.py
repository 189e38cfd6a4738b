"""Stage-2 training: conditional density of shape latents given view embeddings."""

import numpy as np

from ..grad import backward
from ..grad.optim import Adam
from ..grad.rng import StreamPool
from ..grad import tensor as T
from .maf import MAFModel
from .realnvp import FlowModel


def build_flow(dim, cond_dim, rng, family="realnvp", n_blocks=5, hidden=1024,
               mask_kind="dimension_wise", conditioning="affine_coupling",
               batch_norm=True):
    if family == "realnvp":
        return FlowModel(dim, cond_dim, rng, n_blocks=n_blocks, hidden=hidden,
                         mask_kind=mask_kind, conditioning=conditioning,
                         batch_norm=batch_norm)
    if family == "maf":
        return MAFModel(dim, cond_dim, rng, n_blocks=n_blocks, hidden=hidden,
                        batch_norm=batch_norm)
    raise ValueError(f"unknown flow family {family!r}")


def train_stage2(latents, condition_table, epochs=100, batch=32, lr=1e-4,
                 views_per_shape=None, seed=0, family="realnvp",
                 mask_kind="dimension_wise", conditioning="affine_coupling",
                 n_blocks=5, hidden=1024, batch_norm=True, log_fn=None):
    """Fit the flow to (latent, image-embedding) pairs.

    latents: (N, D); condition_table: (N, K, E) frozen image embeddings, one
    per rendered view. Each step draws one view per sampled shape uniformly
    from the first `views_per_shape` views. Returns (model, per-epoch NLL).
    """
    latents = np.asarray(latents, np.float32)
    condition_table = np.asarray(condition_table, np.float32)
    if len(latents) != len(condition_table):
        raise ValueError(
            f"latent table ({len(latents)}) misaligned with condition table "
            f"({len(condition_table)})")
    n, d = latents.shape
    k_total = condition_table.shape[1]
    k_use = k_total if views_per_shape is None else min(views_per_shape, k_total)
    pool = StreamPool(seed)
    model = build_flow(d, condition_table.shape[2], pool.stream("init"),
                       family=family, n_blocks=n_blocks, hidden=hidden,
                       mask_kind=mask_kind, conditioning=conditioning,
                       batch_norm=batch_norm)
    opt = Adam(list(model.named_parameters()), lr=lr)
    history = []
    for epoch in range(epochs):
        order = pool.stream("shuffle", epoch).permutation(n)
        pick = pool.stream("views", epoch)
        losses = []
        for start in range(0, n - batch + 1, batch):
            idx = order[start:start + batch]
            views = pick.integers(0, k_use, len(idx))
            e = T.Tensor(latents[idx])
            c = T.Tensor(condition_table[idx, views])
            nll = T.mul(T.reduce_mean(model.log_prob(e, c)), -1.0)
            opt.zero_grad()
            backward(nll)
            opt.step()
            losses.append(nll.item())
        history.append(float(np.mean(losses)))
        if log_fn:
            log_fn(f"stage2 epoch {epoch + 1}/{epochs} nll {history[-1]:.4f}")
    model.eval()
    return model, history


def mean_nll(model, latents, conditions):
    """Eval-mode negative log-likelihood over aligned (latent, condition) rows."""
    return float(-model.log_prob_values(
        np.asarray(latents, np.float32), np.asarray(conditions, np.float32)).mean())
