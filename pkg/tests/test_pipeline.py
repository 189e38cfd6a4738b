import numpy as np
import pytest

from shapeforge.grad.rng import stream
from shapeforge import pipeline as P


# ---------------------------------------------------------------------------
# mesh extraction
# ---------------------------------------------------------------------------

def test_single_voxel_12_triangles():
    g = np.zeros((4, 4, 4), bool)
    g[1, 2, 1] = True
    mesh = P.extract_mesh(g)
    assert mesh.n_triangles == 12
    assert mesh.is_watertight()


def test_two_adjacent_voxels_20_triangles():
    g = np.zeros((4, 4, 4), bool)
    g[1, 1, 1] = g[2, 1, 1] = True
    mesh = P.extract_mesh(g)
    assert mesh.n_triangles == 20
    assert mesh.is_watertight()


def test_empty_grid_empty_mesh():
    mesh = P.extract_mesh(np.zeros((3, 3, 3), bool))
    assert mesh.n_triangles == 0
    assert mesh.is_watertight()


def test_triangle_count_equals_bruteforce_on_100_random_grids():
    rng = stream(40, "grids")
    for case in range(100):
        g = rng.random((5, 5, 5)) < rng.uniform(0.15, 0.6)
        mesh = P.extract_mesh(g)
        assert mesh.n_triangles == 2 * P.exposed_face_count(g)


def test_random_grids_watertight():
    rng = stream(41, "water")
    for case in range(20):
        g = rng.random((6, 6, 6)) < 0.4
        assert P.extract_mesh(g).is_watertight()


def test_manifold_grids_have_exactly_two_triangles_per_edge():
    from shapeforge import synthshape as S

    g = np.zeros((4, 4, 4), bool)
    g[1:3, 1:3, 1:3] = True  # solid block
    assert P.extract_mesh(g).is_edge_manifold()
    sphere = S.voxelize(S.ShapeSpec("sphere", {"r": 0.4}), 16)
    mesh = P.extract_mesh(sphere)
    assert mesh.is_edge_manifold() and mesh.is_watertight()


def test_outward_winding_on_single_voxel():
    g = np.zeros((3, 3, 3), bool)
    g[1, 1, 1] = True
    mesh = P.extract_mesh(g)
    center = mesh.vertices.mean(axis=0)
    for tri in mesh.triangles:
        a, b, c = mesh.vertices[tri]
        normal = np.cross(b - a, c - a)
        outward = (a + b + c) / 3 - center
        assert np.dot(normal, outward) > 0


def test_obj_export_parses():
    g = np.zeros((3, 3, 3), bool)
    g[1, 1, 1] = True
    text = P.extract_mesh(g).to_obj()
    v_lines = [l for l in text.splitlines() if l.startswith("v ")]
    f_lines = [l for l in text.splitlines() if l.startswith("f ")]
    assert len(v_lines) == 8 and len(f_lines) == 12
    for line in f_lines:
        idx = [int(x) for x in line.split()[1:]]
        assert all(1 <= i <= len(v_lines) for i in idx)


def test_mesh_rejects_bad_indices():
    with pytest.raises(ValueError):
        P.Mesh(np.zeros((2, 3)), [[0, 1, 5]])


# ---------------------------------------------------------------------------
# request validation and thresholds
# ---------------------------------------------------------------------------

def test_request_validation():
    with pytest.raises(ValueError, match="threshold"):
        P.GenerationRequest("a box", threshold=1.5).validate()
    with pytest.raises(ValueError, match="prompt"):
        P.GenerationRequest("   ").validate()
    with pytest.raises(ValueError, match="resolution"):
        P.GenerationRequest("a box", resolution=48).validate()
    P.GenerationRequest("a box").validate()


def test_occupied_count_monotone_in_threshold():
    probs = stream(42, "probs").random((16, 16, 16)).astype(np.float32)
    counts = [(probs >= t).sum() for t in (0.05, 0.2, 0.5, 0.9, 0.99)]
    assert all(b <= a for a, b in zip(counts, counts[1:]))


# ---------------------------------------------------------------------------
# slerp closed forms
# ---------------------------------------------------------------------------

def test_slerp_endpoints_exact():
    rng = stream(43, "slerp")
    u = rng.standard_normal(8).astype(np.float32)
    v = rng.standard_normal(8).astype(np.float32)
    u /= np.linalg.norm(u)
    v /= np.linalg.norm(v)
    np.testing.assert_allclose(P.slerp(u, v, 0.0), u, atol=1e-6)
    np.testing.assert_allclose(P.slerp(u, v, 1.0), v, atol=1e-6)


def test_slerp_midpoint_of_orthogonal_vectors():
    u = np.asarray([1.0, 0.0], np.float32)
    v = np.asarray([0.0, 1.0], np.float32)
    np.testing.assert_allclose(P.slerp(u, v, 0.5),
                               np.asarray([1, 1]) / np.sqrt(2), atol=1e-6)


def test_slerp_stays_unit_norm():
    rng = stream(44, "unit")
    u = rng.standard_normal(16)
    v = rng.standard_normal(16)
    u /= np.linalg.norm(u)
    v /= np.linalg.norm(v)
    for a in np.linspace(0, 1, 7):
        assert abs(np.linalg.norm(P.slerp(u, v, a)) - 1.0) < 1e-6
