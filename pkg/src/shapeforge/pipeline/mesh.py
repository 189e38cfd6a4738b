"""Boundary-face meshing of boolean voxel grids.

Every occupied-cell face adjacent to an empty cell (or the grid boundary)
emits one quad = two triangles with outward winding. The result is
watertight per connected component and has an exactly countable triangle
budget, unlike marching cubes.
"""

import numpy as np

# for each axis direction: the four corner offsets of the emitted face,
# ordered counter-clockwise seen from outside (+axis side), and the
# corresponding order for the -axis side
_FACE_CORNERS = {
    (0, +1): [(1, 0, 0), (1, 1, 0), (1, 1, 1), (1, 0, 1)],
    (0, -1): [(0, 0, 0), (0, 0, 1), (0, 1, 1), (0, 1, 0)],
    (1, +1): [(0, 1, 0), (0, 1, 1), (1, 1, 1), (1, 1, 0)],
    (1, -1): [(0, 0, 0), (1, 0, 0), (1, 0, 1), (0, 0, 1)],
    (2, +1): [(0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1)],
    (2, -1): [(0, 0, 0), (0, 1, 0), (1, 1, 0), (1, 0, 0)],
}


class Mesh:
    """Triangle mesh with deduplicated vertices."""

    def __init__(self, vertices, triangles):
        self.vertices = np.asarray(vertices, np.float32).reshape(-1, 3)
        self.triangles = np.asarray(triangles, np.int64).reshape(-1, 3)
        if self.triangles.size and self.triangles.max() >= len(self.vertices):
            raise ValueError("triangle index out of range")

    @property
    def n_triangles(self):
        return len(self.triangles)

    def is_watertight(self):
        """True when the surface is closed: every directed edge is matched by
        its reverse (the boundary operator vanishes). Non-manifold voxel
        contacts (two cells sharing only an edge) keep a closed surface but
        put four triangles on one undirected edge, so closedness is the
        property that holds for arbitrary grids."""
        if not len(self.triangles):
            return True
        directed = {}
        for tri in self.triangles:
            for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
                directed[(a, b)] = directed.get((a, b), 0) + 1
        return all(directed.get((b, a), 0) == n for (a, b), n in directed.items())

    def is_edge_manifold(self):
        """True when every undirected edge is shared by exactly two triangles
        (holds for grids without diagonal-only cell contacts)."""
        if not len(self.triangles):
            return True
        edges = {}
        for tri in self.triangles:
            for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
                key = (min(a, b), max(a, b))
                edges[key] = edges.get(key, 0) + 1
        return all(v == 2 for v in edges.values())

    def to_obj(self):
        lines = [f"v {v[0]:.6f} {v[1]:.6f} {v[2]:.6f}" for v in self.vertices]
        lines += [f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}" for t in self.triangles]
        return "\n".join(lines) + "\n"


def exposed_faces(grid):
    """(cell index, axis, sign) for every occupied face touching empty space."""
    g = np.asarray(grid, bool)
    padded = np.pad(g, 1)
    faces = []
    for axis in range(3):
        for sign in (+1, -1):
            shifted = np.roll(padded, -sign, axis=axis)
            exposed = g & ~shifted[1:-1, 1:-1, 1:-1]
            for idx in np.argwhere(exposed):
                faces.append((tuple(idx), axis, sign))
    return faces


def extract_mesh(grid):
    """Boundary-face mesh of a boolean grid mapped into [-0.5, 0.5]^3."""
    g = np.asarray(grid, bool)
    r = g.shape[0]
    verts = {}
    order = []
    tris = []

    def vid(corner):
        key = corner
        i = verts.get(key)
        if i is None:
            i = len(order)
            verts[key] = i
            order.append(key)
        return i

    for (cell, axis, sign) in exposed_faces(g):
        corners = _FACE_CORNERS[(axis, sign)]
        ids = [vid((cell[0] + c[0], cell[1] + c[1], cell[2] + c[2])) for c in corners]
        tris.append((ids[0], ids[1], ids[2]))
        tris.append((ids[0], ids[2], ids[3]))

    vertices = (np.asarray(order, np.float32) / r) - 0.5 if order else np.zeros((0, 3), np.float32)
    return Mesh(vertices, np.asarray(tris, np.int64) if tris else np.zeros((0, 3), np.int64))


def exposed_face_count(grid):
    """Brute-force census: occupied faces with an empty (or outside) neighbor."""
    g = np.asarray(grid, bool)
    r = g.shape
    count = 0
    offsets = [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]
    for i in range(r[0]):
        for j in range(r[1]):
            for k in range(r[2]):
                if not g[i, j, k]:
                    continue
                for dx, dy, dz in offsets:
                    x, y, z = i + dx, j + dy, k + dz
                    if not (0 <= x < r[0] and 0 <= y < r[1] and 0 <= z < r[2]) or not g[x, y, z]:
                        count += 1
    return count
