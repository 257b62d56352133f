import numpy as np
import pytest

from jsgraph.chart import builtin_scene
from jsgraph.domain import polyline_hausdorff
from jsgraph.mesh import (MeshError, load_mesh, mesh_quality, save_mesh,
                          triangulate)


def _scherk():
    return builtin_scene("flat-scherk")[1]


def test_structured_square_counts():
    d = _scherk()
    m = triangulate(d, 0.25 * np.pi)
    m.validate()
    assert m.n_vertices == 81
    assert m.n_triangles == 128
    assert m.euler_characteristic() == 1
    assert m.boundary_edges().shape[0] == 32
    assert m.periodic_pairs.shape[0] == 0


def test_structured_boundary_edges_double_when_h_halves():
    d = _scherk()
    n1 = triangulate(d, 0.25 * np.pi).boundary_edges().shape[0]
    n2 = triangulate(d, 0.125 * np.pi).boundary_edges().shape[0]
    assert n2 == 2 * n1


def test_structured_angles_are_exact():
    d = _scherk()
    q = mesh_quality(triangulate(d, 0.25 * np.pi))
    assert q["min_angle"] == pytest.approx(45.0, abs=1e-9)
    assert q["max_edge"] <= 0.25 * np.pi * (1 + 1e-12)


def test_markers_cover_arcs_and_corners():
    d = _scherk()
    m = triangulate(d, 0.25 * np.pi)
    n_arcs = len(d.arcs())
    got = set(np.unique(m.marker).tolist())
    assert -1 in got
    for k in range(n_arcs):
        assert k in got
    corner_markers = got - {-1} - set(range(n_arcs))
    assert len(corner_markers) == len(d.corner_table())


def test_band_mesh_on_cylinder():
    _, d = builtin_scene("flat-cylinder")
    m = triangulate(d, 0.2)
    m.validate()
    assert m.n_vertices == 1105
    assert m.n_triangles == 2048
    assert m.euler_characteristic() == 0
    assert m.periodic_pairs.shape[0] == 17
    assert m.period == pytest.approx(2 * np.pi)
    # seam slaves copy masters exactly
    sl, ma = m.periodic_pairs.T
    assert np.allclose(m.points[sl, 1], m.points[ma, 1], atol=1e-12)
    assert np.allclose(m.points[sl, 0] - m.period, m.points[ma, 0],
                       atol=1e-12)
    assert mesh_quality(m)["min_angle"] > 30.0


def test_band_boundary_doubles():
    _, d = builtin_scene("flat-cylinder")
    n1 = triangulate(d, 0.2).boundary_edges().shape[0]
    n2 = triangulate(d, 0.1).boundary_edges().shape[0]
    assert (n1, n2) == (128, 256)


def test_unstructured_quadrilateral():
    _, d = builtin_scene("rotational-r3")
    m = triangulate(d, 0.1)
    m.validate()
    assert m.euler_characteristic() == 1
    q = mesh_quality(m)
    assert q["min_angle_interior"] > 20.0
    assert q["max_edge"] <= 0.1 * (1 + 1e-9)
    loops = m.boundary_loops()
    assert len(loops) == 1
    ring = m.points[loops[0]]
    d_h = polyline_hausdorff(ring, d.loop_points(0))
    assert d_h < 1e-3


def test_mesh_error_when_h_too_large():
    d = _scherk()
    with pytest.raises(MeshError, match="too large"):
        triangulate(d, 5.0)


def test_save_load_roundtrip(tmp_path):
    _, d = builtin_scene("flat-cylinder")
    m = triangulate(d, 0.25)
    path = tmp_path / "mesh.txt"
    save_mesh(m, path)
    m2 = load_mesh(path)
    assert np.array_equal(m.tris, m2.tris)
    assert np.array_equal(m.marker, m2.marker)
    assert np.array_equal(m.points, m2.points)
    assert np.array_equal(m.periodic_pairs, m2.periodic_pairs)
    assert m2.period == m.period
    assert m2.h == m.h
    assert m2.n_arcs == m.n_arcs


def test_triangles_are_counterclockwise():
    _, d = builtin_scene("rotational-r3")
    m = triangulate(d, 0.15)
    p = m.points
    v1 = p[m.tris[:, 1]] - p[m.tris[:, 0]]
    v2 = p[m.tris[:, 2]] - p[m.tris[:, 0]]
    cross = v1[:, 0] * v2[:, 1] - v1[:, 1] * v2[:, 0]
    assert np.all(cross > 0.0)


def test_boundary_edges_reference_arc_markers():
    d = _scherk()
    m = triangulate(d, 0.25 * np.pi)
    be = m.boundary_edges()
    for v0, v1, _tri in be:
        assert m.marker[v0] != -1 and m.marker[v1] != -1
