"""Full two-stage training orchestration and the checkpoint bundle format.

A bundle directory holds the three model checkpoints (joint embedder,
stage-1 autoencoder, stage-2 flow), the latent table, the tokenizer
vocabulary, training logs, and a manifest with the config echo, seeds, and
per-checkpoint content hashes.
"""

import json
import time
from pathlib import Path

import numpy as np

from ..embed.model import JointEmbedder
from ..embed.tokenizer import Tokenizer
from ..embed.train import contrastive_train
from ..flow.train import build_flow, train_stage2
from ..grad import checkpoint as ckpt
from ..grad.rng import StreamPool, stream
from ..shapeae.train import (
    ShapeAutoencoder,
    latent_table,
    load_latent_table,
    save_latent_table,
    train_stage1,
)
from ..synthshape.dataset import Corpus, build_corpus

BUNDLE_VERSION = 1


class StageFailure(RuntimeError):
    def __init__(self, stage, step, cause):
        self.stage = stage
        super().__init__(f"training stage {stage!r} failed at {step}: {cause}")


def condition_table(embedder, corpus, split="train"):
    """Frozen image embeddings for every (sample, view): (N, K, E)."""
    n = corpus.count(split)
    k = corpus.cfg.views
    out = np.empty((n, k, embedder.embed_dim), np.float32)
    for i in range(n):
        out[i] = embedder.embed_images(corpus.images(split, i))
    return out


def run_full_training(config, corpus_dir, out_dir, log_fn=None, reuse_corpus=True):
    """Build (or reuse) the corpus, run all stages, write the bundle."""
    config.validate()
    log = log_fn or (lambda msg: None)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t_start = time.time()
    logs = {}

    corpus_dir = Path(corpus_dir)
    if reuse_corpus and (corpus_dir / "manifest.json").exists():
        corpus = Corpus(corpus_dir)
        log(f"reusing corpus at {corpus_dir}")
    else:
        log("building corpus")
        try:
            corpus = build_corpus(config.corpus_config(), corpus_dir)
        except Exception as e:
            raise StageFailure("dataset", "build", e) from e
    log(f"corpus: {corpus.count('train')} train / {corpus.count('test')} test")

    try:
        embedder, emb_log = contrastive_train(
            corpus, epochs=config.embedder_epochs, batch=config.embedder_batch,
            lr=config.embedder_lr, embed_dim=config.embed_dim,
            seed=config.seed, normalize_condition=config.normalize_condition,
            log_fn=log)
    except Exception as e:
        raise StageFailure("embedder", "contrastive_train", e) from e
    logs["embedder_loss"] = emb_log

    try:
        autoencoder, s1_log = train_stage1(
            corpus, epochs=config.stage1_epochs, batch=config.stage1_batch,
            lr=config.stage1_lr, noise_std=config.latent_noise,
            points_per_step=config.points_per_step,
            latent_dim=config.latent_dim, encoder=config.encoder,
            decoder=config.stage1_decoder, channels=config.encoder_channels,
            width=config.decoder_width, blocks=config.decoder_blocks,
            seed=config.seed, log_fn=log)
    except Exception as e:
        raise StageFailure("stage1", "train_stage1", e) from e
    logs["stage1_mse"] = s1_log

    latents = latent_table(autoencoder, corpus, "train")
    if config.stage2_latents == "noisy":
        noise = stream(config.seed, "stage2_latent_noise").normal(
            0.0, config.latent_noise, latents.shape).astype(np.float32)
        latents = latents + noise
    conds = condition_table(embedder, corpus, "train")

    try:
        flow_model, s2_log = train_stage2(
            latents, conds, epochs=config.stage2_epochs,
            batch=config.stage2_batch, lr=config.stage2_lr,
            views_per_shape=config.views_per_shape or None,
            seed=config.seed, family=config.flow_family,
            mask_kind=config.mask_kind, conditioning=config.conditioning,
            n_blocks=config.flow_blocks, hidden=config.flow_hidden,
            batch_norm=config.flow_batch_norm, log_fn=log)
    except Exception as e:
        raise StageFailure("stage2", "train_stage2", e) from e
    logs["stage2_nll"] = s2_log

    save_bundle(out, config, corpus_dir, embedder, autoencoder, flow_model,
                latents, logs, wall_seconds=time.time() - t_start)
    log(f"bundle written to {out}")
    return Bundle(out)


def save_bundle(out, config, corpus_dir, embedder, autoencoder, flow_model,
                latents, logs, wall_seconds=0.0):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    ckpt.save_checkpoint(out / "embedder", "joint_embedder",
                         embedder.hyperparameters(), embedder.state_arrays())
    embedder.tokenizer.save(out / "embedder" / "vocab.json")
    ckpt.save_checkpoint(out / "stage1", "shape_autoencoder",
                         autoencoder.hyperparameters(), autoencoder.state_arrays())
    ckpt.save_checkpoint(out / "stage2", "conditional_flow",
                         flow_model.hyperparameters(), flow_model.state_arrays())
    save_latent_table(out / "latents", latents, list(range(len(latents))))
    (out / "training_log.json").write_text(json.dumps(logs, sort_keys=True))
    manifest = {
        "bundle_version": BUNDLE_VERSION,
        "config": config.to_dict(),
        "corpus": str(corpus_dir),
        "seed": config.seed,
        "wall_seconds": round(wall_seconds, 3),
        "checkpoints": {
            name: ckpt.checkpoint_hash(out / name)
            for name in ("embedder", "stage1", "stage2")
        },
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))


class Bundle:
    """Loaded, immutable model bundle."""

    def __init__(self, root):
        from ..config import RunConfig

        self.root = Path(root)
        self.manifest = json.loads((self.root / "manifest.json").read_text())
        if self.manifest["bundle_version"] != BUNDLE_VERSION:
            raise ValueError(f"unsupported bundle version {self.manifest['bundle_version']}")
        self.config = RunConfig.from_dict(self.manifest["config"])

        emb_manifest, emb_arrays = ckpt.load_checkpoint(self.root / "embedder")
        hp = emb_manifest["hyperparameters"]
        tokenizer = Tokenizer.load(self.root / "embedder" / "vocab.json")
        self.embedder = JointEmbedder(
            tokenizer, embed_dim=hp["embed_dim"], image_size=hp["image_size"],
            seed_rng=np.random.default_rng(0),
            normalize_condition=hp["normalize_condition"])
        self.embedder.load_state_arrays(emb_arrays)
        self.embedder.freeze()

        s1_manifest, s1_arrays = ckpt.load_checkpoint(self.root / "stage1")
        hp1 = s1_manifest["hyperparameters"]
        self.autoencoder = ShapeAutoencoder(
            hp1["latent_dim"], hp1["resolution"], np.random.default_rng(0),
            encoder=hp1["encoder"], decoder=hp1["decoder"],
            channels=self.config.encoder_channels, width=hp1["width"],
            blocks=self.config.decoder_blocks)
        self.autoencoder.load_state_arrays(s1_arrays)
        self.autoencoder.eval()

        s2_manifest, s2_arrays = ckpt.load_checkpoint(self.root / "stage2")
        hp2 = s2_manifest["hyperparameters"]
        if hp2["family"] == "realnvp":
            self.flow = build_flow(hp2["dim"], hp2["cond_dim"],
                                   np.random.default_rng(0), family="realnvp",
                                   n_blocks=hp2["n_blocks"], hidden=hp2["hidden"],
                                   mask_kind=hp2["mask_kind"],
                                   conditioning=hp2["conditioning"],
                                   batch_norm=hp2["batch_norm"])
        else:
            self.flow = build_flow(hp2["dim"], hp2["cond_dim"],
                                   np.random.default_rng(0), family="maf",
                                   n_blocks=hp2["n_blocks"], hidden=hp2["hidden"],
                                   batch_norm=hp2["batch_norm"])
        self.flow.load_state_arrays(s2_arrays)
        self.flow.eval()

        self.latents, _ = load_latent_table(self.root / "latents")

    @property
    def bundle_hash(self):
        h = self.manifest["checkpoints"]
        return f"{h['embedder'][:8]}-{h['stage1'][:8]}-{h['stage2'][:8]}"

    def generate(self, request):
        from .generate import generate

        return generate(request, self.embedder, self.flow, self.autoencoder)

    def interpolate(self, prompt_a, prompt_b, steps, mode="slerp",
                    threshold=None, resolution=32, notices=None):
        from .generate import DEFAULT_THRESHOLD, interpolate

        return interpolate(prompt_a, prompt_b, steps, self.embedder, self.flow,
                           self.autoencoder, mode=mode,
                           threshold=DEFAULT_THRESHOLD if threshold is None else threshold,
                           resolution=resolution, notices=notices)
