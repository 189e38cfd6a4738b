"""On-disk corpus: deterministic generation, fixed-stride binary records.

Layout: `manifest.json` plus, per split, one container file of fixed-size
records (`<split>.records`) and one JSON sidecar (`<split>.json`) holding
captions and provenance. A record packs, in order: the voxel grid as
little-endian bit-packed bits (R^3 bits padded to whole bytes), query points
and occupancies as little-endian binary32, and K raw 8-bit grayscale images.
"""

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from ..grad.rng import StreamPool
from .captions import caption_set
from .render import render_views, to_uint8
from .sampling import sample_queries, surface_points
from .shapes import CATEGORIES, ShapeSpec, sample_spec, voxelize

FORMAT_VERSION = 1

DEFAULT_HELD_OUT = (("box", "thin"), ("cylinder", "flat"))


@dataclass(frozen=True)
class CorpusConfig:
    shapes_per_category: int = 80
    categories: tuple = CATEGORIES
    resolution: int = 32
    views: int = 20
    queries: int = 2048
    image_size: int = 64
    test_fraction: float = 0.1
    held_out: tuple = DEFAULT_HELD_OUT
    caption_prefixes: tuple = ("a", "a photo of a")
    render_resolution: int = 64
    seed: int = 0


def pack_grid(grid):
    return np.packbits(np.asarray(grid, dtype=bool).reshape(-1),
                       bitorder="little").tobytes()


def unpack_grid(buf, resolution):
    bits = np.unpackbits(np.frombuffer(buf, dtype=np.uint8),
                         count=resolution**3, bitorder="little")
    return bits.astype(bool).reshape(resolution, resolution, resolution)


def record_stride(cfg):
    r, m, k, hw = cfg.resolution, cfg.queries, cfg.views, cfg.image_size
    return (r**3 + 7) // 8 + m * 3 * 4 + m * 4 + k * hw * hw


def _encode_record(cfg, grid, points, occs, images):
    parts = [
        pack_grid(grid),
        np.ascontiguousarray(points, dtype="<f4").tobytes(),
        np.ascontiguousarray(occs, dtype="<f4").tobytes(),
        np.ascontiguousarray(images, dtype=np.uint8).tobytes(),
    ]
    return b"".join(parts)


def build_corpus(cfg, out_dir):
    """Generate the full corpus under `out_dir`; byte-identical per seed."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OSError(f"cannot create corpus directory {out}: {e}") from e
    pool = StreamPool(cfg.seed)
    total = cfg.shapes_per_category * len(cfg.categories)
    records = {"train": [], "test": []}
    meta = {"train": [], "test": []}
    for i in range(total):
        category = cfg.categories[i // cfg.shapes_per_category]
        spec = sample_spec(category, pool.stream("spec", i), seed=i)
        split = "test" if pool.stream("split", i).random() < cfg.test_fraction else "train"
        grid = voxelize(spec, cfg.resolution)
        fine = voxelize(spec, cfg.render_resolution)
        images = to_uint8(render_views(fine, cfg.image_size, cfg.image_size, cfg.views))
        points, occs = sample_queries(spec, cfg.queries, pool.stream("queries", i))
        captions = caption_set(
            spec,
            excluded_pairs=cfg.held_out if split == "train" else (),
            prefixes=cfg.caption_prefixes)
        records[split].append(_encode_record(cfg, grid, points, occs, images))
        meta[split].append({
            "id": i,
            "category": category,
            "attributes": list(spec.attributes),
            "params": spec.params,
            "captions": captions,
            "spec_seed": spec.seed,
        })
    manifest = {
        "format_version": FORMAT_VERSION,
        "config": asdict(cfg),
        "record_stride": record_stride(cfg),
        "splits": {s: {"count": len(records[s])} for s in ("train", "test")},
    }
    try:
        for split in ("train", "test"):
            (out / f"{split}.records").write_bytes(b"".join(records[split]))
            (out / f"{split}.json").write_text(
                json.dumps(meta[split], sort_keys=True, indent=1))
        (out / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2))
    except OSError as e:
        raise OSError(f"corpus write failed under {out}: {e}") from e
    return Corpus(out)


@dataclass
class _SplitView:
    count: int
    meta: list
    raw: np.ndarray  # (count, stride) uint8 memmap


class Corpus:
    """Read access to a built corpus."""

    def __init__(self, root):
        self.root = Path(root)
        manifest = json.loads((self.root / "manifest.json").read_text())
        if manifest["format_version"] != FORMAT_VERSION:
            raise ValueError(f"unsupported corpus format {manifest['format_version']}")
        self.manifest = manifest
        c = manifest["config"]
        c["categories"] = tuple(c["categories"])
        c["held_out"] = tuple(tuple(p) for p in c["held_out"])
        c["caption_prefixes"] = tuple(c["caption_prefixes"])
        self.cfg = CorpusConfig(**c)
        stride = manifest["record_stride"]
        self.splits = {}
        for split in ("train", "test"):
            count = manifest["splits"][split]["count"]
            meta = json.loads((self.root / f"{split}.json").read_text())
            raw = np.memmap(self.root / f"{split}.records", dtype=np.uint8,
                            mode="r", shape=(count, stride)) if count else \
                np.zeros((0, stride), dtype=np.uint8)
            self.splits[split] = _SplitView(count, meta, raw)

    def count(self, split):
        return self.splits[split].count

    def meta(self, split, i):
        return self.splits[split].meta[i]

    def categories(self, split):
        return [m["category"] for m in self.splits[split].meta]

    def category_index(self, split, i):
        return self.cfg.categories.index(self.meta(split, i)["category"])

    def captions(self, split, i):
        return self.splits[split].meta[i]["captions"]

    def spec(self, split, i):
        m = self.meta(split, i)
        return ShapeSpec(m["category"], dict(m["params"]),
                         tuple(m["attributes"]), m["spec_seed"])

    def _offsets(self):
        cfg = self.cfg
        r, m, k, hw = cfg.resolution, cfg.queries, cfg.views, cfg.image_size
        vox = (r**3 + 7) // 8
        pts = m * 3 * 4
        occ = m * 4
        return vox, pts, occ, k * hw * hw

    def voxels(self, split, i):
        vox, _, _, _ = self._offsets()
        buf = self.splits[split].raw[i, :vox].tobytes()
        return unpack_grid(buf, self.cfg.resolution)

    def queries(self, split, i):
        vox, pts, occ, _ = self._offsets()
        raw = self.splits[split].raw[i]
        p = np.frombuffer(raw[vox:vox + pts].tobytes(), dtype="<f4").reshape(-1, 3)
        o = np.frombuffer(raw[vox + pts:vox + pts + occ].tobytes(), dtype="<f4")
        return p, o

    def images(self, split, i):
        vox, pts, occ, img = self._offsets()
        cfg = self.cfg
        raw = self.splits[split].raw[i, vox + pts + occ:vox + pts + occ + img]
        return np.asarray(raw).reshape(cfg.views, cfg.image_size, cfg.image_size)

    def surface_cloud(self, split, i, n, rng):
        """Regenerated surface point cloud (deterministic per rng stream)."""
        return surface_points(self.spec(split, i), n, rng).astype(np.float32)

    def all_voxels(self, split):
        return np.stack([self.voxels(split, i) for i in range(self.count(split))])
