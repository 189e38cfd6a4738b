"""Best-match IOU metric: mean over generated shapes of the highest IOU
against the reference set."""

import numpy as np


def pairwise_iou(grids_a, grids_b):
    """(len(a), len(b)) IOU matrix between two stacks of boolean grids."""
    a = np.asarray(grids_a, bool).reshape(len(grids_a), -1)
    b = np.asarray(grids_b, bool).reshape(len(grids_b), -1)
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"resolution mismatch: {a.shape[1]} vs {b.shape[1]} cells")
    # float64 keeps the 0/1 dot products exact, so the matrix is permutation
    # invariant bit for bit
    af = a.astype(np.float64)
    bf = b.astype(np.float64)
    inter = af @ bf.T
    union = af.sum(axis=1)[:, None] + bf.sum(axis=1)[None, :] - inter
    out = np.zeros_like(inter)
    nz = union > 0
    out[nz] = inter[nz] / union[nz]  # IOU with two empty grids defined as 0
    return out


def mmd_iou(generated, reference):
    """Mean over generated grids of max-over-reference IOU, in [0, 1]."""
    if len(generated) == 0 or len(reference) == 0:
        raise ValueError("mmd_iou needs nonempty grid sets")
    return float(pairwise_iou(generated, reference).max(axis=1).mean())
