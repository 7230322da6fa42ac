import math

import numpy as np
import pytest

import helpers
from geodesic_bounds import surface_gen as g
from geodesic_bounds.curves import crossings
from geodesic_bounds.errors import HypothesisViolated, NonSeparating
from geodesic_bounds.geodesic_engine import geodesic_line, geodesic_ray, shortest_path
from geodesic_bounds.loop_finder import (
    ScanContext,
    classify_convexity,
    dichotomy_scan,
    essential_curve_report,
    essential_curve_through,
    make_loop,
    shortest_essential_loop,
    write_scan_csv,
)
from geodesic_bounds.surface_core import same_location, segment_lengths
from geodesic_bounds.topology import cut_components, is_essential


def arclength_at_x(mesh, curve, x):
    xs = np.array([np.asarray(p.bary) @ mesh.coords[mesh.faces[p.face], 0] for p in curve.points])
    s = np.concatenate([[0.0], np.cumsum(segment_lengths(mesh, curve))])
    return float(np.interp(x, xs, s) if xs[0] < xs[-1] else np.interp(x, xs[::-1], s[::-1]))


@pytest.fixture(scope="module")
def lorentzian_line(lorentzian):
    return geodesic_line(lorentzian, 0, 1)


@pytest.fixture(scope="module")
def cusp_ray(cc_cusp):
    from geodesic_bounds.pipelines import _far_vertex

    return geodesic_ray(cc_cusp, cc_cusp.vertex_point(_far_vertex(cc_cusp, 0)), 0)


# -- essential curves -------------------------------------------------------------------

def test_sphere_violates_distance_hypothesis(sphere2):
    pole = int(np.argmax(sphere2.coords[:, 0]))
    anti = int(np.argmin(sphere2.coords[:, 0]))
    tau = shortest_path(sphere2, sphere2.vertex_point(pole), sphere2.vertex_point(anti))
    with pytest.raises(HypothesisViolated):
        essential_curve_through(sphere2, tau, math.pi / 2)


def test_cylinder_circle(cylinder):
    x, y = helpers.grid_point(cylinder, 0.0, 0.0), helpers.grid_point(cylinder, 0.0, 10.0)
    tau = shortest_path(cylinder, x, y)
    rep = essential_curve_report(cylinder, tau, 5.0)
    assert rep.curve.length == pytest.approx(0.5, rel=0.03)
    assert rep.curve.length <= math.sqrt(10)
    assert rep.essential["separating"]
    assert is_essential(cylinder, rep.curve, marked=[x, y])[0]


def test_revolution_neck_curve(lorentzian, lorentzian_line):
    t = arclength_at_x(lorentzian, lorentzian_line.curve, 0.0)
    rep = essential_curve_report(lorentzian, lorentzian_line, t)
    A = lorentzian.total_area
    assert rep.curve.length <= math.sqrt(2 * A) + 2 * lorentzian.max_edge
    assert is_essential(lorentzian, rep.curve, marked=[lorentzian_line.curve.points[0],
                                                        lorentzian_line.curve.points[-1]])[0]
    # the curve passes through w
    w = lorentzian_line.point_at(lorentzian, t)
    assert any(same_location(lorentzian, p, w, 1e-9) for p in rep.curve.points)


# -- shortest essential loops ---------------------------------------------------------------

def test_torus_loop(torus):
    base = helpers.grid_point(torus, 0.3, 0.8)
    seed = helpers.polygon(torus, [(0.3, 0.8), (0.6, 0.9), (0.9, 0.7)])
    loop = shortest_essential_loop(torus, base, [], seed)
    assert loop.length == pytest.approx(1.0, rel=1e-3)
    assert loop.simple


def test_cylinder_loop(cylinder):
    base = helpers.grid_point(cylinder, 0.1, 5.0)
    seed = helpers.polygon(cylinder, [(0.1, 5.0), (0.25, 5.3), (0.4, 4.8)])
    loop = shortest_essential_loop(cylinder, base, [], seed)
    assert loop.length == pytest.approx(0.5, rel=1e-3)
    assert loop.simple


def test_cusp_loop_meets_ray_once(cc_cusp, cusp_ray):
    h = math.sqrt(cc_cusp.total_area / 2)
    sample = ScanContext(cc_cusp, cusp_ray).loop_at(h)
    loop = sample.loop
    assert loop.length <= math.sqrt(2 * cc_cusp.total_area) + 2 * cc_cusp.max_edge
    assert loop.simple
    for p in crossings(cc_cusp, loop.curve, cusp_ray.curve):
        assert same_location(cc_cusp, p, loop.base, 1e-9)


# -- convexity ------------------------------------------------------------------------------

@pytest.mark.parametrize("z", [3.0, 3.01])
def test_circumferential_loop_is_closed_geodesic(cylinder, z):
    loop = make_loop(cylinder, helpers.polygon(cylinder, [(0.0, z), (0.2, z), (0.35, z)]))
    assert loop.vertex_angles == pytest.approx((math.pi, math.pi), abs=1e-9)
    cert = classify_convexity(cylinder, loop, 1)
    assert cert.closed_geodesic


def test_narrowing_and_widening_sides(lorentzian, lorentzian_line):
    t = arclength_at_x(lorentzian, lorentzian_line.curve, 2.0)
    sample = ScanContext(lorentzian, lorentzian_line).loop_at(t)
    end_far, end_near = lorentzian_line.end_id[1], lorentzian_line.end_id[0]
    xs_end = lorentzian.coords[lorentzian.ends[end_far].boundary[0], 0]
    # orient by the end beyond x = 2, where the funnel narrows
    ref = end_far if xs_end > 0 else end_near
    other = end_near if ref == end_far else end_far
    assert classify_convexity(lorentzian, sample.loop, ref).side == "toward_infinity"
    assert classify_convexity(lorentzian, sample.loop, other).side == "toward_base"


def test_nonseparating_loop_rejected(torus):
    loop = make_loop(torus, helpers.polygon(torus, [(0.0, 0.5), (0.33, 0.5), (0.66, 0.5)]))
    assert not cut_components(torus, loop.curve).separating
    with pytest.raises(NonSeparating):
        classify_convexity(torus, loop, helpers.grid_point(torus, 0.5, 1.5))


# -- scans ---------------------------------------------------------------------------------

def test_cylinder_scan(cylinder, tmp_path):
    res = dichotomy_scan(cylinder, geodesic_line(cylinder, 0, 1))
    assert res.candidates
    for s in res.candidates:
        assert s.loop.length == pytest.approx(0.5, rel=0.02)
    assert res.coarea_sum <= 1.05 * cylinder.total_area
    write_scan_csv(tmp_path / "scan.csv", res)
    rows = (tmp_path / "scan.csv").read_text().splitlines()
    assert len(rows) == len(res.samples) + 1


def test_scan_range_guard(cc_cusp, cusp_ray):
    with pytest.raises(HypothesisViolated):
        dichotomy_scan(cc_cusp, cusp_ray, t_range=(0.0, 0.1))


def test_line_needs_two_ends(torus, cc_cusp):
    with pytest.raises(ValueError):
        geodesic_line(torus, 0, 1)
    with pytest.raises(ValueError):
        geodesic_line(cc_cusp, 0, 0)
