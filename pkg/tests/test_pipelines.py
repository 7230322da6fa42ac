import dataclasses
import math

import numpy as np
import pytest

import helpers
from geodesic_bounds.errors import PreconditionFailed
from geodesic_bounds.loop_finder import Pair
from geodesic_bounds.pipelines import (
    GeodesicReport,
    apex_point,
    berger_segments,
    compactify,
    curvature_vertices,
    eight_seeds,
    make_loop_pair,
    one_end_pipeline,
    two_end_pipeline,
)
from geodesic_bounds.surface_core import euler_characteristic


# -- compactification ----------------------------------------------------------------

def test_compactify_cusp(cc_cusp):
    hat = compactify(cc_cusp, 0)
    assert hat.n_ends == 0
    assert euler_characteristic(hat) == 2
    assert hat.n_vertices == cc_cusp.n_vertices + 1
    assert np.array_equal(hat.faces[: cc_cusp.n_faces], cc_cusp.faces)
    # total area counts the tail; the cone takes its place with the same area
    assert hat.total_area == pytest.approx(cc_cusp.total_area, rel=1e-9)
    assert apex_point(hat).face >= cc_cusp.n_faces


def test_compactify_keeps_other_ends(lorentzian):
    hat = compactify(lorentzian, 1)
    assert hat.n_ends == 1
    assert list(hat.ends[0].boundary) == list(lorentzian.ends[0].boundary)


# -- Berger segments -------------------------------------------------------------------

def test_berger_segments_on_torus(torus):
    y, target = helpers.grid_point(torus, 0.0, 0.0), helpers.grid_point(torus, 0.5, 1.0)
    segs = berger_segments(torus, y, target)
    exact = math.hypot(0.5, 1.0)
    assert len(segs) >= 2
    assert min(s.length for s in segs) == pytest.approx(exact, rel=1e-9)
    # segments are minimizing up to the documented 1% tolerance
    for s in segs:
        assert exact - 1e-9 <= s.length <= exact * 1.01


# -- preconditions -------------------------------------------------------------------------

def test_pipelines_check_ends(torus, cc_cusp):
    with pytest.raises(PreconditionFailed):
        one_end_pipeline(torus)
    with pytest.raises(PreconditionFailed):
        two_end_pipeline(cc_cusp)


def test_loop_pair_needs_certificates(lorentzian):
    rep, _ = helpers.timed("two_end", "lorentzian")
    scan = rep.details["scan"]
    loops = [s.loop for s in scan.samples if s.loop is not None][:2]
    if len(loops) < 2:
        pytest.skip("scan kept fewer than two loops")
    with pytest.raises(PreconditionFailed):
        make_loop_pair(lorentzian, Pair(0.0, loops[0], loops[1], 0.1))


def test_loop_pair_regions(lorentzian):
    rep, _ = helpers.timed("two_end", "lorentzian")
    pair = rep.details.get("pair")
    if pair is None:
        pytest.skip("the scan offered a closed geodesic directly")
    assert not (pair.omega1 & pair.omega2)
    assert pair.omega1 | pair.omega2 | pair.omega3 == frozenset(range(lorentzian.n_faces))
    assert pair.eight.length == pytest.approx(pair.e1.curve.length + pair.e2.curve.length, rel=1e-9)
    bad = dataclasses.replace(rep.details["scan"].outcome, cert_plus=None)
    with pytest.raises(PreconditionFailed):
        make_loop_pair(lorentzian, bad)


# -- reports -----------------------------------------------------------------------------

def test_report_properties():
    rep = GeodesicReport(None, 3.0, 4.0, "test", area=4.0, delta_mesh=0.1)
    assert rep.ratio == pytest.approx(1.5)
    assert rep.within_bound
    rep.length = 4.05
    assert rep.within_bound
    rep.length = 4.2
    assert not rep.within_bound
    s = rep.summary()
    assert set(s) >= {"length", "bound_used", "ratio", "area", "n_ends", "within_bound", "provenance"}
    assert not GeodesicReport(None, None, 1.0, "none").within_bound


def test_closed_estimate_report(cc):
    rep, _ = helpers.timed("estimate", "cc")
    assert rep.n_ends == 0
    assert rep.bound_used == pytest.approx(4 * math.sqrt(2 * cc.total_area))
    assert rep.within_bound
    assert rep.turning < 1e-3
    assert rep.provenance


def test_two_end_report(lorentzian):
    rep, _ = helpers.timed("two_end", "lorentzian")
    assert rep.bound_used == pytest.approx(2 * math.sqrt(2 * lorentzian.total_area))
    assert rep.within_bound
    assert rep.geodesic.closed


def test_one_end_report(cc_cusp):
    rep, _ = helpers.timed("one_end", "cc_cusp")
    assert rep.bound_used == pytest.approx(4 * math.sqrt(2 * cc_cusp.total_area))
    assert rep.within_bound
    # the geodesic lives on the original surface, not on the cone cap
    assert all(f < cc_cusp.n_faces for f in rep.geodesic.faces)


# -- closed-surface seeds ------------------------------------------------------------------

def test_curvature_vertices_are_corners(cc):
    assert sorted(curvature_vertices(cc, 3)) == sorted(cc.meta["corner_vertices"])


def test_eight_seeds_are_closed(cc):
    seeds = eight_seeds(cc)
    assert seeds
    for c in seeds:
        assert c.closed
        assert c.length > 0
