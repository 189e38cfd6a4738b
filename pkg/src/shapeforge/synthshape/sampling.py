"""Query-point and surface sampling against the analytic oracle."""

import numpy as np

from .shapes import occupancy

SURFACE_NOISE_STD = 0.05
_BISECT_ITERS = 30


class DegenerateShape(RuntimeError):
    """The shape fills the whole cube or is empty; it has no interior surface."""


def surface_points(spec, n, rng):
    """`n` points on the shape boundary.

    Uniform points are rejection-sampled into inside/outside pools; random
    inside-outside pairs are then bisected onto the boundary.
    """
    inside = np.empty((0, 3))
    outside = np.empty((0, 3))
    guard = 0
    while min(len(inside), len(outside)) < n:
        cand = rng.uniform(-0.5, 0.5, size=(max(4 * n, 4096), 3))
        occ = occupancy(spec, cand)
        inside = np.concatenate([inside, cand[occ]])
        outside = np.concatenate([outside, cand[~occ]])
        guard += 1
        if guard > 20 and min(len(inside), len(outside)) == 0:
            raise DegenerateShape(f"no boundary to sample for category {spec.category!r}")
        if guard > 400:
            raise RuntimeError(f"surface sampling failed for category {spec.category!r}")
    a = inside[rng.integers(0, len(inside), n)]   # stays inside
    b = outside[rng.integers(0, len(outside), n)]  # stays outside
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (a + b)
        occ = occupancy(spec, mid)
        a = np.where(occ[:, None], mid, a)
        b = np.where(occ[:, None], b, mid)
    return 0.5 * (a + b)


def sample_queries(spec, m, rng, mode="mixed"):
    """(P, O): `m` query points and exact occupancies.

    mixed mode: half uniform in the cube, half near-surface (a surface point
    plus N(0, 0.05^2) per-axis noise, clipped to the cube).
    """
    if m < 1:
        raise ValueError("need at least one query point")
    if mode == "uniform":
        pts = rng.uniform(-0.5, 0.5, size=(m, 3))
    elif mode == "mixed":
        n_uniform = m // 2
        n_near = m - n_uniform
        uniform = rng.uniform(-0.5, 0.5, size=(n_uniform, 3))
        try:
            surf = surface_points(spec, n_near, rng)
            near = np.clip(surf + rng.normal(0.0, SURFACE_NOISE_STD, size=(n_near, 3)),
                           -0.5, 0.5)
        except DegenerateShape:
            near = rng.uniform(-0.5, 0.5, size=(n_near, 3))
        pts = np.concatenate([uniform, near])
    else:
        raise ValueError(f"unknown sampling mode {mode!r}")
    occ = occupancy(spec, pts)
    return pts.astype(np.float32), occ.astype(np.float32)
