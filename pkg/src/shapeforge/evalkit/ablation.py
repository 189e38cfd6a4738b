"""Ablation driver: one axis per run, several seeds per cell, CSV + figure."""

import copy
import csv
import io
import json
from pathlib import Path

import numpy as np

from ..pipeline.bundle import run_full_training
from .classifier import train_classifier
from .queries import build_query_set
from .report import run_query_set


def run_cell(config, workdir, seed, log_fn=None):
    """Train the full pipeline for one config+seed and evaluate it."""
    cfg = copy.deepcopy(config)
    cfg.seed = seed
    workdir = Path(workdir)
    corpus_dir = workdir / "corpus"
    bundle = run_full_training(cfg, corpus_dir, workdir / f"bundle_s{seed}",
                               log_fn=log_fn)
    from ..synthshape.dataset import Corpus

    corpus = Corpus(corpus_dir)
    classifier, cls_acc = train_classifier(
        corpus, epochs=cfg.classifier_epochs, lr=cfg.classifier_lr,
        channels=cfg.classifier_channels, seed=seed, log_fn=log_fn)
    qs = build_query_set(categories=corpus.cfg.categories)
    report = run_query_set(qs, bundle, classifier, corpus,
                           resolution=cfg.eval_resolution,
                           threshold=cfg.threshold, seed=seed)
    report.extra["classifier_holdout_acc"] = cls_acc
    return report


def run_ablation(base_config, axis_name, values, workdir, seeds=(0, 1, 2),
                 log_fn=None):
    """{value: [EvalReport per seed]} over one config axis.

    Each (value, seed) cell retrains everything from scratch. Corpus data is
    shared across cells only when the axis does not change the dataset
    (different axis values get separate workdirs regardless).
    """
    workdir = Path(workdir)
    if len(set(map(str, values))) != len(values):
        raise ValueError(f"duplicate values on ablation axis {axis_name!r}")
    table = {}
    for value in values:
        cfg = copy.deepcopy(base_config)
        if not hasattr(cfg, axis_name):
            raise ValueError(f"unknown config axis {axis_name!r}")
        setattr(cfg, axis_name, value)
        cfg.validate()
        cell_reports = []
        for seed in seeds:
            if log_fn:
                log_fn(f"ablation {axis_name}={value} seed={seed}")
            cell_dir = workdir / f"{axis_name}_{value}"
            cell_reports.append(run_cell(cfg, cell_dir, seed, log_fn=log_fn))
        table[value] = cell_reports
    return table


def ablation_csv(table, axis_name):
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow([axis_name, "seed", "fid", "mmd", "acc"])
    for value, reports in table.items():
        for r in reports:
            writer.writerow([value, r.seed, f"{r.fid:.4f}", f"{r.mmd:.4f}",
                             f"{r.acc:.4f}"])
    for value, reports in table.items():
        writer.writerow([value, "median",
                         f"{np.median([r.fid for r in reports]):.4f}",
                         f"{np.median([r.mmd for r in reports]):.4f}",
                         f"{np.median([r.acc for r in reports]):.4f}"])
    return buf.getvalue()


def write_ablation(table, axis_name, out_dir):
    """CSV + JSON + figure; returns the summary dict (medians per value)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"ablation_{axis_name}.csv").write_text(ablation_csv(table, axis_name))
    summary = {
        str(value): {
            "fid_median": float(np.median([r.fid for r in reports])),
            "mmd_median": float(np.median([r.mmd for r in reports])),
            "acc_median": float(np.median([r.acc for r in reports])),
            "seeds": [r.seed for r in reports],
        }
        for value, reports in table.items()
    }
    (out / f"ablation_{axis_name}.json").write_text(
        json.dumps(summary, sort_keys=True, indent=2))
    from .figures import ablation_figure

    ablation_figure(table, axis_name, out / f"ablation_{axis_name}.png")
    return summary
