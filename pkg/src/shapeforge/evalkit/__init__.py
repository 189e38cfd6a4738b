"""Quantitative evaluation: classifier features, FID, MMD-IOU, query runner,
ablations, and the supervised baseline."""

from .classifier import VoxelClassifier, cross_entropy, train_classifier, train_classifier_arrays
from .fid import feature_stats, frechet_distance, frechet_from_stats
from .mmd import mmd_iou, pairwise_iou
from .queries import QuerySet, build_query_set, held_out_query_set, observed_attributes
from .report import (
    EvalReport,
    generate_for_queries,
    prefix_sweep,
    reports_to_csv,
    run_query_set,
    write_report,
)
from .ablation import ablation_csv, run_ablation, run_cell, write_ablation
from .baseline import LinearTextToLatent, baseline_pairs, supervised_baseline

__all__ = [
    "VoxelClassifier", "cross_entropy", "train_classifier", "train_classifier_arrays", "feature_stats",
    "frechet_distance", "frechet_from_stats", "mmd_iou", "pairwise_iou",
    "QuerySet", "build_query_set", "held_out_query_set", "observed_attributes",
    "EvalReport", "generate_for_queries", "prefix_sweep", "reports_to_csv",
    "run_query_set", "write_report", "ablation_csv", "run_ablation",
    "run_cell", "write_ablation", "LinearTextToLatent", "baseline_pairs",
    "supervised_baseline",
]
