"""Conditional normalizing flows over shape latents (RealNVP stack and MAF)."""

from .masks import MASK_KINDS, build_mask, mask_stack
from .realnvp import (
    CONDITIONING_MODES,
    BatchNormFlow,
    CouplingBlock,
    FlowModel,
    GaussianPrior,
)
from .maf import MAFLayer, MAFModel, made_masks
from .train import build_flow, mean_nll, train_stage2

__all__ = [
    "MASK_KINDS", "build_mask", "mask_stack", "CONDITIONING_MODES",
    "BatchNormFlow", "CouplingBlock", "FlowModel", "GaussianPrior",
    "MAFLayer", "MAFModel", "made_masks", "build_flow", "mean_nll",
    "train_stage2",
]
