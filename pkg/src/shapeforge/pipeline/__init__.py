"""Inference pipeline: generation, interpolation, meshing, bundles."""

from .mesh import Mesh, exposed_face_count, exposed_faces, extract_mesh
from .generate import (
    DEFAULT_THRESHOLD,
    GeneratedShape,
    GenerationRequest,
    condition_for,
    generate,
    interpolate,
    slerp,
)
from .bundle import Bundle, StageFailure, condition_table, run_full_training, save_bundle

__all__ = [
    "Mesh", "exposed_face_count", "exposed_faces", "extract_mesh",
    "DEFAULT_THRESHOLD", "GeneratedShape", "GenerationRequest",
    "condition_for", "generate", "interpolate", "slerp", "Bundle",
    "StageFailure", "condition_table", "run_full_training", "save_bundle",
]
