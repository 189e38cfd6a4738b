"""Orthographic depth renders of voxel grids.

Cameras sit on K fixed directions arranged on a deterministic spiral over the
sphere. Each pixel ray marches front to back through the grid; the pixel
value is a normalized depth shade of the first occupied cell (nearer =
brighter, in (0, 1]), background exactly 0. Rendering is a pure function of
(grid, view, H, W).
"""

import numpy as np

from .shapes import voxelize

_GOLDEN = np.pi * (3.0 - np.sqrt(5.0))
_RAY_START = 0.9          # camera plane distance from the origin
_RAY_SPAN = 1.8           # max march distance


def view_directions(k):
    """K unit vectors on a spiral from the +z pole to the -z pole."""
    if k == 1:
        return np.asarray([[0.0, 0.0, 1.0]])
    i = np.arange(k)
    z = 1.0 - 2.0 * i / (k - 1)
    rad = np.sqrt(np.clip(1.0 - z * z, 0.0, 1.0))
    phi = i * _GOLDEN
    return np.stack([rad * np.cos(phi), rad * np.sin(phi), z], axis=1)


def _camera_frame(d):
    aux = np.asarray([0.0, 0.0, 1.0]) if abs(d[2]) < 0.99 else np.asarray([1.0, 0.0, 0.0])
    right = np.cross(aux, d)
    right /= np.linalg.norm(right)
    up = np.cross(d, right)
    return right, up


_plan_cache = {}


def _ray_plan(direction, h, w, resolution):
    """Precomputed (flat voxel index, validity) per (step, pixel); cached.

    The grid is axis aligned and fixed in [-0.5, 0.5]^3, so the sampled cell
    indices depend only on the view geometry, not on grid contents.
    """
    key = (tuple(np.round(direction, 9)), h, w, resolution)
    plan = _plan_cache.get(key)
    if plan is not None:
        return plan
    d = np.asarray(direction, dtype=np.float64)
    right, up = _camera_frame(d)
    xs = (np.arange(w) + 0.5) / w - 0.5
    ys = (np.arange(h) + 0.5) / h - 0.5
    px, py = np.meshgrid(xs, ys)
    origins = (_RAY_START * d
               + px.reshape(-1, 1) * right
               - py.reshape(-1, 1) * up)
    step = 0.5 / resolution
    n_steps = int(np.ceil(_RAY_SPAN / step)) + 1
    t = (np.arange(n_steps) * step).reshape(-1, 1, 1)
    pts = origins[None, :, :] - t * d[None, None, :]  # (S, P, 3)
    idx = np.floor((pts + 0.5) * resolution).astype(np.int64)
    valid = np.all((idx >= 0) & (idx < resolution), axis=2)
    flat = (idx[..., 0] * resolution + idx[..., 1]) * resolution + idx[..., 2]
    flat[~valid] = 0
    plan = (flat, valid, step)
    _plan_cache[key] = plan
    return plan


def render_grid(grid, direction, h, w):
    """Depth-shaded orthographic image of a boolean grid from one direction."""
    grid = np.asarray(grid, dtype=bool)
    resolution = grid.shape[0]
    flat, valid, step = _ray_plan(direction, h, w, resolution)
    occ = grid.reshape(-1)[flat] & valid  # (S, P)
    hit = occ.any(axis=0)
    first = occ.argmax(axis=0)
    depth = first * step
    shade = np.where(hit, 1.0 - depth / _RAY_SPAN, 0.0)
    return shade.reshape(h, w).astype(np.float32)


def render(spec_or_grid, view_index, h=64, w=64, n_views=20, render_resolution=64):
    """Render view `view_index` of a ShapeSpec or a prebuilt boolean grid."""
    dirs = view_directions(n_views)
    if view_index >= len(dirs):
        raise ValueError(f"view_index {view_index} >= n_views {n_views}")
    if hasattr(spec_or_grid, "category"):
        grid = voxelize(spec_or_grid, render_resolution)
    else:
        grid = spec_or_grid
    return render_grid(grid, dirs[view_index], h, w)


def render_views(grid, h, w, n_views):
    """All K views of one grid, stacked (K, H, W) float32 in [0, 1]."""
    dirs = view_directions(n_views)
    return np.stack([render_grid(grid, d, h, w) for d in dirs])


def to_uint8(img):
    return np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
