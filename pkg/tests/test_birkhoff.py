import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import helpers
from geodesic_bounds.birkhoff import (
    Budget,
    Escape,
    Geodesic,
    Point,
    ShortenOpts,
    ShorteningTrace,
    classify_termination,
    containment_check,
    is_convex_region,
    is_monotone,
    max_turning,
    region_boundary_angles,
    shorten_closed,
    shorten_fixed_point,
    write_trace_csv,
)
from geodesic_bounds.curves import perturb
from geodesic_bounds.errors import BudgetExceeded, InvalidCertificate, RegionNotConvex
from geodesic_bounds.sweep import sweep_minmax
from geodesic_bounds.geodesic_engine import distance_field, end_ring, level_set, nudged_level_set, vertex_distance_field


def circle(mesh, v, r):
    return max(nudged_level_set(distance_field(mesh, mesh.vertex_point(v)), r).components, key=lambda c: c.length)


def horizontal(torus, y):
    return helpers.polygon(torus, [(0.0, y), (0.33, y), (0.66, y)])


def test_small_circle_contracts(sphere2):
    pole = int(np.argmax(sphere2.coords[:, 0]))
    c = circle(sphere2, pole, 1 / (2 * math.pi))
    assert c.length == pytest.approx(1.0, rel=0.05)
    tr = shorten_closed(sphere2, c)
    assert isinstance(tr.termination, Point)
    assert is_monotone(tr)


def test_perturbed_equator_converges(sphere2):
    pole = int(np.argmax(sphere2.coords[:, 0]))
    eq = level_set(distance_field(sphere2, sphere2.vertex_point(pole)), math.pi / 2).components[0]
    c = perturb(sphere2, eq, np.random.default_rng(3), 0.05)
    tr = shorten_closed(sphere2, c)
    assert isinstance(tr.termination, Geodesic)
    assert tr.termination.curve.length == pytest.approx(2 * math.pi, rel=0.01)
    assert max_turning(sphere2, tr.termination.curve) < 1e-3


def test_curve_in_funnel_escapes(cc_cusp):
    f = vertex_distance_field(cc_cusp, end_ring(cc_cusp, 0))
    c = max(nudged_level_set(f, 0.05).components, key=lambda c: c.length)
    tr = shorten_closed(cc_cusp, c)
    assert isinstance(tr.termination, Escape) and tr.termination.end_id == 0
    classify_termination(cc_cusp, tr)


def test_torus_generator_is_geodesic(torus):
    c = perturb(torus, horizontal(torus, 0.37), np.random.default_rng(0), 0.3)
    tr = shorten_closed(torus, c)
    assert isinstance(tr.termination, Geodesic)
    assert tr.termination.curve.length == pytest.approx(1.0, rel=1e-3)


def test_fixed_point_contracts_to_base(torus):
    c = helpers.polygon(torus, [(0.3, 0.3), (0.45, 0.3), (0.45, 0.45), (0.3, 0.45)])
    base = c.points[0]
    tr = shorten_fixed_point(torus, c, base)
    assert isinstance(tr.termination, Point)
    d = distance_field(torus, base).at(tr.termination.point)
    assert d < 1e-9 or tr.final.length < 1e-3


def test_fixed_point_generator_loop(torus):
    c = helpers.polygon(torus, [(0.1, 0.5), (0.4, 0.7), (0.7, 0.45)])
    base = c.points[0]
    tr = shorten_fixed_point(torus, c, base)
    assert isinstance(tr.termination, Geodesic)
    assert tr.termination.curve.length == pytest.approx(1.0, rel=1e-3)
    classify_termination(torus, tr)


def test_budget_termination(sphere2):
    pole = int(np.argmax(sphere2.coords[:, 0]))
    c = circle(sphere2, pole, 1.0)
    tr = shorten_closed(sphere2, c, ShortenOpts(max_iters=3))
    assert isinstance(tr.termination, Budget)
    with pytest.raises(BudgetExceeded):
        shorten_closed(sphere2, c, ShortenOpts(max_iters=3), raise_on_budget=True)


def test_forged_certificates_rejected(torus, sphere2):
    pole = int(np.argmax(sphere2.coords[:, 0]))
    c = circle(sphere2, pole, 1.0)
    with pytest.raises(InvalidCertificate):
        classify_termination(sphere2, ShorteningTrace([c], [c.length], Point(c.points[0])))
    with pytest.raises(InvalidCertificate):
        classify_termination(sphere2, ShorteningTrace([c], [c.length], Geodesic(c)))
    with pytest.raises(InvalidCertificate):
        classify_termination(sphere2, ShorteningTrace([c], [c.length], Escape(0)))


def test_parallel_at_neck_certified(lorentzian):
    # the neck is the widest parallel, hence unstable; the level-set sweep hangs on it
    sw = sweep_minmax(lorentzian, vertex_distance_field(lorentzian, end_ring(lorentzian, 0)))
    assert isinstance(classify_termination(lorentzian, sw.trace), Geodesic)
    assert sw.geodesic.length == pytest.approx(2 * math.pi, rel=0.02)
    assert is_monotone(sw.trace)


def test_trace_csv(tmp_path, torus):
    tr = shorten_closed(torus, horizontal(torus, 0.2))
    write_trace_csv(tmp_path / "t.csv", tr)
    rows = (tmp_path / "t.csv").read_text().splitlines()
    assert rows[0] == "iteration,length,termination"
    assert len(rows) == len(tr.lengths) + 1


# -- convex regions ---------------------------------------------------------------

def band(torus, j0, j1):
    return {f for f in range(torus.n_faces) if j0 <= helpers.grid_cell(torus, f)[1] < j1}


def test_flat_band_is_convex(torus):
    B = band(torus, 0, 8)
    angles = region_boundary_angles(torus, B)
    assert np.allclose(list(angles.values()), math.pi)
    assert is_convex_region(torus, B)


def test_curve_stays_in_band(torus):
    B = band(torus, 0, 8)  # y in [0, 0.5]
    c = perturb(torus, horizontal(torus, 0.25), np.random.default_rng(1), 0.3)
    tr = shorten_closed(torus, c)
    assert containment_check(torus, tr, B)


def test_hemisphere_latitude_circle(sphere2):
    # the cap above the last ring before the equator
    x0 = min(x for x in np.unique(np.round(sphere2.coords[:, 0], 12)) if x > 1e-9)
    cap = helpers.faces_beyond(sphere2, x0)
    assert is_convex_region(sphere2, cap)
    pole = int(np.argmax(sphere2.coords[:, 0]))
    c = circle(sphere2, pole, math.pi / 3)  # latitude 30 degrees
    tr = shorten_closed(sphere2, c)
    assert containment_check(sphere2, tr, cap)


def l_shape(torus):
    return {f for f in range(torus.n_faces)
            if (lambda i, j: i < 16 and j < 16 and not (i >= 8 and j >= 8))(*helpers.grid_cell(torus, f))}


def test_l_shape_negative_control(torus):
    L = l_shape(torus)
    assert not is_convex_region(torus, L)
    with pytest.raises(RegionNotConvex):
        containment_check(torus, ShorteningTrace([horizontal(torus, 0.2)]), L)
    c = helpers.polygon(torus, [(0.05, 0.05), (0.9, 0.05), (0.9, 0.45), (0.45, 0.45), (0.45, 0.9), (0.05, 0.9)])
    tr = shorten_closed(torus, c)
    assert not containment_check(torus, tr, L, check_convex=False)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10 ** 6), st.floats(0.05, 0.45), st.floats(0.02, 0.4))
def test_monotone_on_torus(torus, seed, r, scale):
    rng = np.random.default_rng(seed)
    v = int(rng.integers(torus.n_vertices))
    c = perturb(torus, circle(torus, v, r), rng, scale)
    tr = shorten_closed(torus, c, ShortenOpts(max_iters=300))
    assert is_monotone(tr, 1e-9)
    assert tr.lengths[-1] <= c.length + 1e-9
