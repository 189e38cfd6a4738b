"""Shared checkpoint format.

A checkpoint is a directory holding `manifest.json` (architecture name,
hyperparameters, parameter key -> shape map, format version) plus one raw
file per array: little-endian IEEE-754 binary32, row-major, no header.
"""

import hashlib
import json
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1


def _param_file(name):
    return name.replace("/", "_") + ".bin"


def save_checkpoint(path, architecture, hyperparameters, arrays):
    """Write `arrays` (name -> float32 ndarray) under `path`."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    manifest = {
        "format_version": FORMAT_VERSION,
        "architecture": architecture,
        "hyperparameters": hyperparameters,
        "params": {name: list(a.shape) for name, a in sorted(arrays.items())},
    }
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    for name, a in arrays.items():
        a = np.ascontiguousarray(a, dtype="<f4")
        (path / _param_file(name)).write_bytes(a.tobytes())
    return manifest


def load_checkpoint(path):
    """Read a checkpoint directory; returns (manifest, name -> ndarray)."""
    path = Path(path)
    manifest = json.loads((path / "manifest.json").read_text())
    if manifest["format_version"] != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format {manifest['format_version']}")
    arrays = {}
    for name, shape in manifest["params"].items():
        raw = (path / _param_file(name)).read_bytes()
        arrays[name] = np.frombuffer(raw, dtype="<f4").reshape(shape).copy()
    return manifest, arrays


def checkpoint_hash(path):
    """SHA-256 over the manifest and every parameter file, in sorted order."""
    path = Path(path)
    h = hashlib.sha256()
    h.update((path / "manifest.json").read_bytes())
    manifest = json.loads((path / "manifest.json").read_text())
    for name in sorted(manifest["params"]):
        h.update((path / _param_file(name)).read_bytes())
    return h.hexdigest()
