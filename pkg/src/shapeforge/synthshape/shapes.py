"""Parametric shape families with exact inside/outside tests.

Every shape lives in the unit cube [-0.5, 0.5]^3. Occupancy is an analytic
CSG test, so voxel grids, query labels, and surface samples all share one
ground truth.

Attribute semantics are analytic thresholds on the parameters (never
subjective):

    thin    feature thickness / largest bbox extent <= 0.25
    thick   feature thickness / largest bbox extent >= 0.50
    tall    vertical extent / largest horizontal extent >= 1.80
    flat    vertical extent / largest horizontal extent <= 0.35
    round   curved category (sphere, cylinder, cone, torus)
    square  footprint aspect |ex/ey - 1| <= 0.15 (box-like categories only)

"feature thickness" is the smallest structural dimension: the box's smallest
extent, a cylinder's min(diameter, height), the torus tube diameter, the
bracket/table/chair slab thickness.
"""

from dataclasses import dataclass, field

import numpy as np

CATEGORIES = (
    "box", "sphere", "cylinder", "cone", "torus",
    "ell_bracket", "table_like", "chair_like",
)

ATTRIBUTES = ("thin", "thick", "round", "square", "tall", "flat")

ROUND_CATEGORIES = frozenset({"sphere", "cylinder", "cone", "torus"})
SQUARE_CATEGORIES = frozenset({"box", "table_like", "chair_like"})

THIN_RATIO = 0.25
THICK_RATIO = 0.50
TALL_RATIO = 1.80
FLAT_RATIO = 0.35
SQUARE_TOL = 0.15


@dataclass(frozen=True)
class ShapeSpec:
    """One parametric shape: category, continuous params, derived attributes."""

    category: str
    params: dict = field(default_factory=dict)
    attributes: tuple = ()
    seed: int = 0


def _inside_box(p, cx, cy, cz, hx, hy, hz):
    return ((np.abs(p[:, 0] - cx) <= hx)
            & (np.abs(p[:, 1] - cy) <= hy)
            & (np.abs(p[:, 2] - cz) <= hz))


def occupancy(spec, points):
    """Vectorized oracle: (N, 3) points -> (N,) boolean occupancy."""
    p = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    c = spec.category
    q = spec.params
    if c == "empty":
        return np.zeros(len(p), dtype=bool)
    if c == "box":
        return _inside_box(p, 0, 0, 0, q["hx"], q["hy"], q["hz"])
    if c == "sphere":
        return (p * p).sum(axis=1) <= q["r"] ** 2
    if c == "cylinder":
        return (p[:, 0] ** 2 + p[:, 1] ** 2 <= q["r"] ** 2) & (np.abs(p[:, 2]) <= q["h"])
    if c == "cone":
        h, r = q["h"], q["r"]
        frac = (h - p[:, 2]) / (2.0 * h)  # 1 at base (z=-h), 0 at apex (z=+h)
        rad = r * frac
        return (np.abs(p[:, 2]) <= h) & (p[:, 0] ** 2 + p[:, 1] ** 2 <= rad**2)
    if c == "torus":
        ring = np.sqrt(p[:, 0] ** 2 + p[:, 1] ** 2) - q["R"]
        return ring**2 + p[:, 2] ** 2 <= q["r"] ** 2
    if c == "ell_bracket":
        a, b, t, d = q["a"], q["b"], q["t"], q["d"]
        upright = ((p[:, 0] >= -a) & (p[:, 0] <= -a + t)
                   & (np.abs(p[:, 2]) <= b) & (np.abs(p[:, 1]) <= d))
        foot = ((np.abs(p[:, 0]) <= a) & (p[:, 2] >= -b) & (p[:, 2] <= -b + t)
                & (np.abs(p[:, 1]) <= d))
        return upright | foot
    if c == "table_like":
        return _table_occupancy(p, q)
    if c == "chair_like":
        return _chair_occupancy(p, q)
    raise ValueError(f"unknown category {c!r}")


def _leg_positions(w, d, lw, legs):
    pos = [(w - lw, d - lw), (-(w - lw), d - lw),
           (w - lw, -(d - lw)), (-(w - lw), -(d - lw))]
    return pos[:legs] if legs < 4 else pos


def _table_occupancy(p, q):
    w, d, h, t, lw = q["w"], q["d"], q["h"], q["t"], q["lw"]
    legs = int(q.get("legs", 4))
    top = _inside_box(p, 0, 0, h - t / 2, w, d, t / 2)
    occ = top
    leg_h = (2 * h - t) / 2
    for lx, ly in _leg_positions(w, d, lw, legs):
        occ = occ | _inside_box(p, lx, ly, -h + leg_h, lw, lw, leg_h)
    return occ


def _chair_occupancy(p, q):
    w, d, h, s, t, lw, bt = q["w"], q["d"], q["h"], q["s"], q["t"], q["lw"], q["bt"]
    seat = _inside_box(p, 0, 0, s - t / 2, w, d, t / 2)
    occ = seat
    leg_h = (s - t + 0.5) / 2
    for lx, ly in _leg_positions(w, d, lw, 4):
        occ = occ | _inside_box(p, lx, ly, -0.5 + leg_h, lw, lw, leg_h)
    back_h = (h - s) / 2
    occ = occ | _inside_box(p, 0, d - bt / 2, s + back_h, w, bt / 2, back_h)
    return occ


def occupancy_oracle(spec, point):
    """Scalar inside/outside test -> 0 or 1."""
    pt = np.asarray(point, dtype=np.float64)
    if not np.all(np.isfinite(pt)):
        raise ValueError("non-finite query point")
    return int(occupancy(spec, pt.reshape(1, 3))[0])


def bbox_extents(spec):
    """(ex, ey, ez) of the tight axis-aligned bounding box."""
    q = spec.params
    c = spec.category
    if c == "empty":
        return (0.0, 0.0, 0.0)
    if c == "box":
        return (2 * q["hx"], 2 * q["hy"], 2 * q["hz"])
    if c == "sphere":
        return (2 * q["r"],) * 3
    if c in ("cylinder", "cone"):
        return (2 * q["r"], 2 * q["r"], 2 * q["h"])
    if c == "torus":
        return (2 * (q["R"] + q["r"]),) * 2 + (2 * q["r"],)
    if c == "ell_bracket":
        return (2 * q["a"], 2 * q["d"], 2 * q["b"])
    if c == "table_like":
        return (2 * q["w"], 2 * q["d"], 2 * q["h"])
    if c == "chair_like":
        return (2 * q["w"], 2 * q["d"], q["h"] + 0.5)
    raise ValueError(f"unknown category {c!r}")


def feature_thickness(spec):
    q = spec.params
    c = spec.category
    if c == "box":
        return 2 * min(q["hx"], q["hy"], q["hz"])
    if c == "sphere":
        return 2 * q["r"]
    if c in ("cylinder", "cone"):
        return min(2 * q["r"], 2 * q["h"])
    if c == "torus":
        return 2 * q["r"]
    if c == "ell_bracket":
        return q["t"]
    if c == "table_like":
        return q["t"]
    if c == "chair_like":
        return q["t"]
    return 0.0


def derive_attributes(category, params):
    """Attribute set implied by the parameters (analytic thresholds above)."""
    spec = ShapeSpec(category, params)
    ex, ey, ez = bbox_extents(spec)
    largest = max(ex, ey, ez)
    horiz = max(ex, ey)
    attrs = []
    ratio = feature_thickness(spec) / largest if largest > 0 else 1.0
    if ratio <= THIN_RATIO:
        attrs.append("thin")
    elif ratio >= THICK_RATIO:
        attrs.append("thick")
    if category in ROUND_CATEGORIES:
        attrs.append("round")
    if category in SQUARE_CATEGORIES and abs(ex / ey - 1.0) <= SQUARE_TOL:
        attrs.append("square")
    if ez / horiz >= TALL_RATIO:
        attrs.append("tall")
    elif ez / horiz <= FLAT_RATIO:
        attrs.append("flat")
    return tuple(attrs)


def _u(rng, lo, hi):
    return float(rng.uniform(lo, hi))


def sample_spec(category, rng, seed=0):
    """Draw one ShapeSpec with parameters in the documented ranges."""
    if category == "box":
        q = {"hx": _u(rng, 0.08, 0.48), "hy": _u(rng, 0.08, 0.48), "hz": _u(rng, 0.08, 0.48)}
    elif category == "sphere":
        q = {"r": _u(rng, 0.18, 0.48)}
    elif category == "cylinder":
        q = {"r": _u(rng, 0.08, 0.40), "h": _u(rng, 0.10, 0.48)}
    elif category == "cone":
        q = {"r": _u(rng, 0.14, 0.45), "h": _u(rng, 0.15, 0.48)}
    elif category == "torus":
        big = _u(rng, 0.20, 0.40)
        q = {"R": big, "r": _u(rng, 0.04, min(0.8 * big, 0.48 - big))}
    elif category == "ell_bracket":
        a = _u(rng, 0.22, 0.46)
        b = _u(rng, 0.22, 0.46)
        q = {"a": a, "b": b, "t": _u(rng, 0.07, 0.8 * min(a, b)), "d": _u(rng, 0.08, 0.40)}
    elif category == "table_like":
        q = {"w": _u(rng, 0.26, 0.48), "d": _u(rng, 0.26, 0.48), "h": _u(rng, 0.22, 0.48),
             "t": _u(rng, 0.05, 0.14), "lw": _u(rng, 0.03, 0.07),
             "legs": float(rng.choice([3, 4], p=[0.2, 0.8]))}
    elif category == "chair_like":
        q = {"w": _u(rng, 0.18, 0.34), "d": _u(rng, 0.18, 0.34), "h": _u(rng, 0.30, 0.48),
             "s": _u(rng, -0.10, 0.10), "t": _u(rng, 0.04, 0.10),
             "lw": _u(rng, 0.03, 0.06), "bt": _u(rng, 0.05, 0.10)}
    else:
        raise ValueError(f"unknown category {category!r}")
    return ShapeSpec(category, q, derive_attributes(category, q), seed)


def voxelize(spec, resolution):
    """Boolean grid: cell (i, j, k) holds the oracle at the cell center."""
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    r = resolution
    centers = (np.arange(r) + 0.5) / r - 0.5
    gx, gy, gz = np.meshgrid(centers, centers, centers, indexing="ij")
    pts = np.stack([gx, gy, gz], axis=-1).reshape(-1, 3)
    return occupancy(spec, pts).reshape(r, r, r)
