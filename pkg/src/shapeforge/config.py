"""Run configuration: every hyperparameter with its published default.

`RunConfig()` carries the reference values (learning rate 1e-4, batch 32,
300/100 epochs, latent 128, 5 flow blocks, hidden 1024, resolution 32, 20
views, threshold 0.05, latent noise 0.1). `desk_config()` is the calibrated
small-corpus profile used by the acceptance run; it trades epochs/rates for
a laptop-scale wall clock while keeping every mechanism identical.
"""

import dataclasses
import json
import os
from dataclasses import dataclass, field

from .synthshape.dataset import DEFAULT_HELD_OUT

ENV_PREFIX = "FORGE_"


@dataclass
class RunConfig:
    # dataset
    shapes_per_category: int = 80
    resolution: int = 32
    views: int = 20
    queries: int = 2048
    image_size: int = 64
    test_fraction: float = 0.1
    held_out: tuple = DEFAULT_HELD_OUT
    render_resolution: int = 64

    # joint embedder
    embed_dim: int = 64
    embedder_epochs: int = 40
    embedder_batch: int = 32
    embedder_lr: float = 1e-3
    normalize_condition: bool = True

    # stage 1
    stage1_epochs: int = 300
    stage1_batch: int = 32
    stage1_lr: float = 1e-4
    latent_dim: int = 128
    latent_noise: float = 0.1
    encoder: str = "vox"
    stage1_decoder: str = "concat"
    encoder_channels: tuple = (8, 16, 32, 64)
    decoder_width: int = 128
    decoder_blocks: int = 5
    points_per_step: int = 512
    stage2_latents: str = "clean"

    # stage 2 flow
    stage2_epochs: int = 100
    stage2_batch: int = 32
    stage2_lr: float = 1e-4
    flow_family: str = "realnvp"
    flow_blocks: int = 5
    flow_hidden: int = 1024
    mask_kind: str = "dimension_wise"
    conditioning: str = "affine_coupling"
    flow_batch_norm: bool = True
    views_per_shape: int = 0  # 0 = all available views

    # classifier / evaluation
    classifier_epochs: int = 30
    classifier_lr: float = 1e-3
    classifier_channels: tuple = (8, 16, 32, 64)
    threshold: float = 0.05
    eval_resolution: int = 32
    recon_points: int = 2048
    recon_max_samples: int = 64

    seed: int = 0

    _RANGES = {
        "shapes_per_category": (1, 10_000),
        "resolution": (16, 64),
        "views": (1, 64),
        "queries": (16, 100_000),
        "image_size": (16, 128),
        "test_fraction": (0.01, 0.9),
        "embed_dim": (4, 1024),
        "stage1_epochs": (1, 100_000),
        "stage1_lr": (1e-6, 1.0),
        "stage2_lr": (1e-6, 1.0),
        "embedder_lr": (1e-6, 1.0),
        "classifier_lr": (1e-6, 1.0),
        "latent_dim": (2, 2048),
        "latent_noise": (0.0, 10.0),
        "flow_blocks": (1, 64),
        "flow_hidden": (4, 8192),
        "threshold": (1e-6, 1.0 - 1e-6),
        "points_per_step": (8, 100_000),
    }

    def validate(self):
        for name, (lo, hi) in self._RANGES.items():
            v = getattr(self, name)
            if not (lo <= v <= hi):
                raise ValueError(f"{name}: {v} outside [{lo}, {hi}]")
        if self.resolution % 16:
            raise ValueError(f"resolution: {self.resolution} must be divisible by 16")
        if self.encoder not in ("vox", "resvox", "pointnet"):
            raise ValueError(f"encoder: unknown kind {self.encoder!r}")
        if self.stage1_decoder not in ("concat", "cbn"):
            raise ValueError(f"stage1_decoder: unknown kind {self.stage1_decoder!r}")
        if self.flow_family not in ("realnvp", "maf"):
            raise ValueError(f"flow_family: unknown family {self.flow_family!r}")
        if self.mask_kind not in ("checkerboard", "dimension_wise"):
            raise ValueError(f"mask_kind: unknown kind {self.mask_kind!r}")
        if self.conditioning not in ("affine_coupling", "prior_network"):
            raise ValueError(f"conditioning: unknown mode {self.conditioning!r}")
        if self.stage2_latents not in ("clean", "noisy"):
            raise ValueError(f"stage2_latents: {self.stage2_latents!r} not clean|noisy")
        return self

    def corpus_config(self):
        from .synthshape.dataset import CorpusConfig

        return CorpusConfig(
            shapes_per_category=self.shapes_per_category,
            resolution=self.resolution, views=self.views, queries=self.queries,
            image_size=self.image_size, test_fraction=self.test_fraction,
            held_out=tuple(tuple(p) for p in self.held_out),
            render_resolution=self.render_resolution, seed=self.seed)

    def to_dict(self):
        d = dataclasses.asdict(self)
        d.pop("_RANGES", None)
        return d

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in dataclasses.fields(cls) if not f.name.startswith("_")}
        kwargs = {}
        for k, v in data.items():
            if k not in known:
                raise ValueError(f"unknown config key {k!r}")
            if isinstance(v, list):
                v = tuple(tuple(x) if isinstance(x, list) else x for x in v)
            kwargs[k] = v
        return cls(**kwargs).validate()

    @classmethod
    def load(cls, path):
        with open(path) as f:
            return cls.from_dict(json.load(f))

    def apply_env(self, env=None):
        """Override fields from FORGE_* environment variables."""
        env = os.environ if env is None else env
        for f in dataclasses.fields(self):
            if f.name.startswith("_"):
                continue
            key = ENV_PREFIX + f.name.upper()
            if key not in env:
                continue
            raw = env[key]
            current = getattr(self, f.name)
            if isinstance(current, bool):
                value = raw.lower() in ("1", "true", "yes")
            elif isinstance(current, int):
                value = int(raw)
            elif isinstance(current, float):
                value = float(raw)
            elif isinstance(current, tuple):
                value = tuple(json.loads(raw))
            else:
                value = raw
            setattr(self, f.name, value)
        return self


def desk_config(seed=0):
    """Laptop-scale profile for the end-to-end zero-shot run (~640 shapes)."""
    return RunConfig(
        shapes_per_category=80,
        embedder_epochs=40,
        embedder_batch=16,
        stage1_epochs=110,
        stage1_batch=16,
        stage1_lr=7e-4,
        points_per_step=256,
        stage2_epochs=60,
        stage2_batch=32,
        stage2_lr=5e-4,
        flow_hidden=512,
        classifier_epochs=16,
        recon_points=1024,
        recon_max_samples=48,
        seed=seed,
    ).validate()


def tiny_config(seed=0, **overrides):
    """Minutes-scale profile for smoke tests and ablation cells."""
    cfg = RunConfig(
        shapes_per_category=10,
        views=6,
        queries=512,
        image_size=32,
        render_resolution=32,
        test_fraction=0.2,
        embed_dim=32,
        embedder_epochs=25,
        embedder_batch=8,
        stage1_epochs=60,
        stage1_batch=8,
        stage1_lr=7e-4,
        encoder_channels=(4, 8, 16, 32),
        decoder_width=64,
        points_per_step=192,
        stage2_epochs=30,
        stage2_batch=16,
        stage2_lr=1e-3,
        flow_hidden=128,
        classifier_epochs=12,
        recon_points=512,
        recon_max_samples=16,
        seed=seed,
    )
    for k, v in overrides.items():
        setattr(cfg, k, v)
    return cfg.validate()
