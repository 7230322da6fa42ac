import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geodesic_bounds import surface_gen as g
from geodesic_bounds.errors import CurveOffMesh, DegenerateTriangle, EndMismatch, NonManifold
from geodesic_bounds.surface_core import (
    MeshPoint,
    PolylineCurve,
    build_mesh,
    concatenate,
    curve_length,
    euler_characteristic,
    make_point,
    point_curve,
    total_area,
)

S = 2 / math.sqrt(3)  # side of the equilateral triangle of height 1


def pillow():
    # one triangle on each side, glued along all three edges
    lengths = {(0, 1): S, (1, 2): S, (0, 2): S}
    return build_mesh(3, [[0, 1, 2], [0, 2, 1]], (), edge_lengths=lengths)


def strip(nx=6, nz=4, circ=1.0, height=2.0, tail=0.01):
    lengths = {}
    tris = []
    dx, dz = circ / nx, height / nz
    vid = lambda i, k: (i % nx) + nx * k
    for k in range(nz):
        for i in range(nx):
            a, b, c, d = vid(i, k), vid(i + 1, k), vid(i, k + 1), vid(i + 1, k + 1)
            tris += [[a, b, d], [a, d, c]]
            for u, v, L in ((a, b, dx), (a, c, dz), (a, d, math.hypot(dx, dz)), (b, d, dz), (c, d, dx)):
                lengths[(min(u, v), max(u, v))] = L
    ends = [{"tail_area": tail, "collar_depth": 1}, {"tail_area": tail, "collar_depth": 1}]
    return build_mesh(nx * (nz + 1), tris, ends, edge_lengths=lengths)


def test_pillow_area_and_ends():
    m = pillow()
    assert m.n_ends == 0
    assert total_area(m) == pytest.approx(2 / math.sqrt(3), rel=1e-12)
    assert euler_characteristic(m) == 2


def test_strip_area_adds_tails():
    m = strip()
    assert m.n_ends == 2
    assert m.total_area == pytest.approx(2.0 + 0.02, rel=1e-12)
    assert m.mesh_area == pytest.approx(2.0, rel=1e-12)


def test_euclidean_lengths_from_coordinates():
    V = np.array([[0, 0, 0], [3, 0, 0], [0, 4, 0], [0, 0, 5]], dtype=float)
    m = build_mesh(V, [[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]])
    e = m.edge_index[(1, 2)]
    assert m.edge_lengths[e] == pytest.approx(5.0)
    assert m.total_area == pytest.approx(6 + 7.5 + 10 + 0.5 * math.sqrt(3 ** 2 * 4 ** 2 + 4 ** 2 * 5 ** 2 + 3 ** 2 * 5 ** 2))


def test_nonmanifold_edge_rejected():
    V = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1]], dtype=float)
    with pytest.raises(NonManifold):
        build_mesh(V, [[0, 1, 2], [1, 0, 3], [0, 1, 4]], [{}])


def test_triangle_inequality_rejected():
    lengths = {(0, 1): 1.0, (1, 2): 1.0, (0, 2): 3.0}
    with pytest.raises(DegenerateTriangle):
        build_mesh(3, [[0, 1, 2], [0, 2, 1]], (), edge_lengths=lengths)


def test_repeated_vertex_rejected():
    with pytest.raises(DegenerateTriangle):
        build_mesh(np.eye(3), [[0, 0, 1]])


def test_end_count_mismatch():
    m = strip()
    with pytest.raises(EndMismatch):
        build_mesh(m.n_vertices, m.faces_l, [{"tail_area": 0.0}],
                   edge_lengths={tuple(e): float(L) for e, L in zip(m.edges.tolist(), m.edge_lengths)})


def test_meshpoint_validation():
    with pytest.raises(ValueError):
        MeshPoint(0, (0.5, 0.6, 0.0))
    with pytest.raises(ValueError):
        MeshPoint(0, (1.2, -0.2, 0.0))
    p = make_point(0, 1e-14, 0.5, 0.5)
    assert p.bary[0] == 0.0 and sum(p.bary) == pytest.approx(1.0, abs=1e-12)


def test_point_curve_has_zero_length():
    m = pillow()
    assert curve_length(m, point_curve(m.vertex_point(0))) == 0.0


def test_altitude_loop_is_2h(cc):
    loop = g.altitude_loop(cc)
    assert curve_length(cc, loop) == pytest.approx(2.0, rel=1e-9)
    # one half on each sheet
    half = cc.n_faces // 2
    assert any(f < half for f in loop.faces) and any(f >= half for f in loop.faces)


def test_equator_on_sphere(sphere2):
    from geodesic_bounds.geodesic_engine import distance_field, level_set

    pole = int(np.argmax(sphere2.coords[:, 0]))
    ls = level_set(distance_field(sphere2, sphere2.vertex_point(pole)), math.pi / 2)
    assert ls.total_length == pytest.approx(2 * math.pi, rel=0.01)


def test_curve_off_mesh():
    m = pillow()
    c = PolylineCurve([MeshPoint(0, (1.0, 0.0, 0.0)), MeshPoint(0, (0.0, 1.0, 0.0))], [7])
    with pytest.raises(CurveOffMesh):
        curve_length(m, c)


def test_segment_face_mismatch(torus):
    p = torus.face_centroid(0)
    q = torus.face_centroid(10)
    with pytest.raises(CurveOffMesh):
        curve_length(torus, PolylineCurve([p, q], [0]))


def test_mesh_hash_stable():
    assert pillow().mesh_hash() == pillow().mesh_hash()
    assert pillow().mesh_hash() != strip().mesh_hash()


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0.05, 0.95), st.floats(0.05, 1.9), st.floats(0.05, 1.9))
def test_length_additive_under_concatenation(torus, x0, x1, y0, y1):
    import helpers
    from geodesic_bounds.geodesic_engine import shortest_path

    p, q = helpers.grid_point(torus, x0, y0), helpers.grid_point(torus, x1, y1)
    mid = helpers.grid_point(torus, (x0 + x1) / 2, (y0 + y1) / 2)
    a, b = shortest_path(torus, p, mid), shortest_path(torus, mid, q)
    joined = concatenate(torus, [a, b])
    assert joined.length == pytest.approx(a.length + b.length, rel=1e-9)
    assert joined.reversed().length == joined.length


def test_area_stable_under_refinement():
    areas = [g.sphere(1.0, level=k).total_area for k in (2, 3)]
    assert abs(areas[1] - areas[0]) / areas[1] < 0.01
