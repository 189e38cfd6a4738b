"""Text -> condition -> flow inverse -> implicit decode -> voxel grid -> mesh."""

from dataclasses import dataclass

import numpy as np

from ..grad.rng import stream
from ..shapeae.train import decode_grid
from .mesh import Mesh, extract_mesh

DEFAULT_THRESHOLD = 0.05
VALID_RESOLUTIONS = (16, 32, 64)


@dataclass(frozen=True)
class GenerationRequest:
    prompt: str
    n_samples: int = 1
    mean_mode: bool = False
    threshold: float = DEFAULT_THRESHOLD
    resolution: int = 32
    seed: int = 0

    def validate(self):
        if not isinstance(self.prompt, str) or not self.prompt.strip():
            raise ValueError("prompt: must be a nonempty string")
        if not (0.0 < self.threshold < 1.0):
            raise ValueError(f"threshold: {self.threshold} outside (0, 1)")
        if self.resolution not in VALID_RESOLUTIONS:
            raise ValueError(f"resolution: {self.resolution} not in {VALID_RESOLUTIONS}")
        if self.n_samples < 1:
            raise ValueError(f"n_samples: {self.n_samples} < 1")
        return self


@dataclass
class GeneratedShape:
    grid: np.ndarray      # boolean (R, R, R)
    mesh: Mesh
    latent: np.ndarray    # (D,)
    probabilities: np.ndarray  # float32 (R, R, R)


def condition_for(embedder, prompt):
    c = embedder.embed_text(prompt)
    if not embedder.normalize_condition:
        return c
    return c / max(np.linalg.norm(c), 1e-12)


def generate(req, embedder, flow_model, autoencoder):
    """Run one GenerationRequest against loaded models."""
    req.validate()
    c = condition_for(embedder, req.prompt)
    if req.mean_mode:
        latents = flow_model.sample(c, mean_mode=True)
    else:
        latents = flow_model.sample(c, n=req.n_samples,
                                    rng=stream(req.seed, "generate", req.prompt))
    out = []
    for latent in latents:
        probs = decode_grid(autoencoder, latent, req.resolution)
        grid = probs >= req.threshold
        out.append(GeneratedShape(grid, extract_mesh(grid), latent, probs))
    return out


def slerp(u, v, alpha):
    """Spherical interpolation of unit vectors; falls back to lerp when the
    endpoints are (anti)parallel."""
    dot = float(np.clip(np.dot(u, v), -1.0, 1.0))
    if abs(dot) > 1.0 - 1e-6:
        w = (1 - alpha) * u + alpha * v
        n = np.linalg.norm(w)
        if n < 1e-8:  # antipodal midpoint has no shortest path
            return u.copy()
        return w / n
    omega = np.arccos(dot)
    s = np.sin(omega)
    return (np.sin((1 - alpha) * omega) * u + np.sin(alpha * omega) * v) / s


def interpolate(prompt_a, prompt_b, steps, embedder, flow_model, autoencoder,
                mode="slerp", threshold=DEFAULT_THRESHOLD, resolution=32,
                notices=None):
    """Mean-mode decodes along the condition-space path between two prompts.

    Endpoints reuse the exact single-prompt conditions, so step 0 and the
    last step match generate(prompt, mean_mode=True) bit for bit.
    """
    if steps < 2:
        raise ValueError("steps must be >= 2")
    if mode not in ("slerp", "lerp"):
        raise ValueError(f"unknown interpolation mode {mode!r}")
    ca = condition_for(embedder, prompt_a)
    cb = condition_for(embedder, prompt_b)
    if mode == "slerp" and float(np.dot(ca, cb)) < -1.0 + 1e-6:
        if notices is not None:
            notices.append("antipodal conditions: falling back to lerp")
        mode = "lerp"
    results = []
    for i in range(steps):
        alpha = i / (steps - 1)
        if i == 0:
            c = ca
        elif i == steps - 1:
            c = cb
        elif mode == "slerp":
            c = slerp(ca, cb, alpha)
        else:
            c = (1 - alpha) * ca + alpha * cb
            n = np.linalg.norm(c)
            if n > 1e-8 and embedder.normalize_condition:
                c = c / n
        latent = flow_model.sample(c, mean_mode=True)[0]
        probs = decode_grid(autoencoder, latent, resolution)
        grid = probs >= threshold
        results.append(GeneratedShape(grid, extract_mesh(grid), latent, probs))
    return results
