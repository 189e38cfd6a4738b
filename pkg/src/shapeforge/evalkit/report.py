"""Query-set evaluation producing EvalReport JSON/CSV plus figures."""

import csv
import io
import json
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from ..pipeline.generate import GenerationRequest
from .fid import frechet_distance
from .mmd import mmd_iou


@dataclass
class EvalReport:
    fid: float
    mmd: float
    acc: float
    per_category_acc: dict
    query_count: int
    seed: int
    checkpoint_hashes: dict
    prefix: str = "a"
    tag: str = "clip_forge_pipeline"
    timestamp: str = ""
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        assert self.fid >= 0.0
        assert 0.0 <= self.mmd <= 1.0
        assert 0.0 <= self.acc <= 100.0

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))

    def csv_row(self):
        return {"tag": self.tag, "prefix": self.prefix,
                "fid": f"{self.fid:.4f}", "mmd": f"{self.mmd:.4f}",
                "acc": f"{self.acc:.4f}", "query_count": self.query_count,
                "seed": self.seed}


def reports_to_csv(reports):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(reports[0].csv_row()))
    writer.writeheader()
    for r in reports:
        writer.writerow(r.csv_row())
    return buf.getvalue()


def generate_for_queries(query_set, bundle, resolution=32, threshold=0.05,
                         seed=0):
    """Mean-mode generation per prompt; returns the stacked boolean grids."""
    grids = []
    for prompt in query_set.prompts():
        req = GenerationRequest(prompt, mean_mode=True, threshold=threshold,
                                resolution=resolution, seed=seed)
        grids.append(bundle.generate(req)[0].grid)
    return np.stack(grids)


def run_query_set(query_set, bundle, classifier, corpus, resolution=32,
                  threshold=0.05, seed=0, tag="clip_forge_pipeline",
                  grids=None):
    """Evaluate one query set end to end -> EvalReport.

    FID compares classifier features of the generated grids against the test
    split; MMD-IOU matches generated grids to test grids; Acc scores the
    classifier's category prediction against each query's assigned label.
    """
    categories = corpus.cfg.categories
    for label in query_set.labels():
        if label not in categories:
            raise ValueError(f"unknown label {label!r} in query set")
    if grids is None:
        grids = generate_for_queries(query_set, bundle, resolution, threshold, seed)
    test_grids = np.stack([corpus.voxels("test", i)
                           for i in range(corpus.count("test"))])
    gen_feats = classifier.features(grids)
    test_feats = classifier.features(test_grids)
    fid = frechet_distance(gen_feats, test_feats)
    mmd = mmd_iou(grids, test_grids)
    preds = classifier.predict(grids)
    labels = np.asarray([categories.index(c) for c in query_set.labels()])
    correct = preds == labels
    acc = float(correct.mean() * 100.0)
    per_cat = {}
    for ci, cat in enumerate(categories):
        mask = labels == ci
        if mask.any():
            per_cat[cat] = float(correct[mask].mean() * 100.0)
    return EvalReport(
        fid=fid, mmd=mmd, acc=acc, per_category_acc=per_cat,
        query_count=len(query_set), seed=seed,
        checkpoint_hashes=bundle.manifest["checkpoints"], prefix=query_set.prefix,
        tag=tag, timestamp=time.strftime("%Y-%m-%dT%H:%M:%S"))


def write_report(report, out_dir, grids=None, query_set=None, figures=True):
    """Persist report.json + report.csv (+ figures) under out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json())
    (out / "report.csv").write_text(reports_to_csv([report]))
    if figures:
        from .figures import report_figures

        report_figures(report, out, grids=grids, query_set=query_set)
    return out / "report.json"


def prefix_sweep(prefixes, bundle, classifier, corpus, build_queries,
                 resolution=32, threshold=0.05, seed=0):
    """One report per prefix over identical query bodies (Table-2 mirror)."""
    reports = []
    for prefix in prefixes:
        qs = build_queries(prefix)
        reports.append(run_query_set(qs, bundle, classifier, corpus,
                                     resolution=resolution, threshold=threshold,
                                     seed=seed, tag=f"prefix:{prefix}"))
    return reports
