"""Procedural shape corpus: analytic oracles, voxels, renders, captions."""

from .shapes import (
    ATTRIBUTES,
    CATEGORIES,
    ShapeSpec,
    bbox_extents,
    derive_attributes,
    occupancy,
    occupancy_oracle,
    sample_spec,
    voxelize,
)
from .sampling import sample_queries, surface_points
from .render import render, render_grid, render_views, view_directions, to_uint8
from .captions import PREFIXES, UnknownPrefix, caption, caption_set, prompt_for
from .dataset import Corpus, CorpusConfig, build_corpus, pack_grid, unpack_grid

__all__ = [
    "ATTRIBUTES", "CATEGORIES", "ShapeSpec", "bbox_extents",
    "derive_attributes", "occupancy", "occupancy_oracle", "sample_spec",
    "voxelize", "sample_queries", "surface_points", "render", "render_grid",
    "render_views", "view_directions", "to_uint8", "PREFIXES",
    "UnknownPrefix", "caption", "caption_set", "prompt_for", "Corpus",
    "CorpusConfig", "build_corpus", "pack_grid", "unpack_grid",
]
