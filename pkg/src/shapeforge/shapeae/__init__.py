"""Stage-1 shape autoencoder: voxel/point encoders, implicit decoder, metrics."""

from .encoder import PointNetEncoder, VoxelEncoder
from .decoder import FoldingDecoder, ImplicitDecoder
from .chamfer import chamfer, chamfer_loss
from .train import (
    LATENT_NOISE_STD,
    PointAutoencoder,
    ShapeAutoencoder,
    decode_grid,
    grid_iou,
    latent_table,
    load_latent_table,
    reconstruction_metrics,
    save_latent_table,
    train_pointcloud_variant,
    train_stage1,
)

__all__ = [
    "PointNetEncoder", "VoxelEncoder", "FoldingDecoder", "ImplicitDecoder",
    "chamfer", "chamfer_loss", "LATENT_NOISE_STD", "PointAutoencoder",
    "ShapeAutoencoder", "decode_grid", "grid_iou", "latent_table",
    "load_latent_table", "reconstruction_metrics", "save_latent_table",
    "train_pointcloud_variant", "train_stage1",
]
