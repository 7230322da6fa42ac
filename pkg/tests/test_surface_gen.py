import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geodesic_bounds import surface_gen as g
from geodesic_bounds.errors import InfiniteArea, NonPositiveProfile, TooManyCusps
from geodesic_bounds.surface_core import euler_characteristic


def test_calabi_croke_area(cc):
    assert cc.n_ends == 0
    assert cc.total_area == pytest.approx(2 / math.sqrt(3), rel=1e-12)
    assert euler_characteristic(cc) == 2


def test_calabi_croke_scales_with_h():
    m = g.gen_calabi_croke(2.0, refinement=3)
    assert m.total_area == pytest.approx(8 / math.sqrt(3), rel=1e-12)
    assert g.altitude_loop(m, 0).length == pytest.approx(4.0, rel=1e-9)


def test_calabi_croke_cone_angles(cc):
    corners = cc.meta["corner_vertices"]
    assert np.allclose(cc.cone_angle[corners], 2 * math.pi / 3)
    others = np.setdiff1d(np.arange(cc.n_vertices), corners)
    assert np.allclose(cc.cone_angle[others], 2 * math.pi)


def test_cusped_calabi_croke(cc_cusp):
    assert cc_cusp.n_ends == 1
    assert abs(cc_cusp.total_area - 2 / math.sqrt(3)) / (2 / math.sqrt(3)) <= 0.02
    assert cc_cusp.ends[0].tail_area == pytest.approx(0.005)
    assert cc_cusp.ends[0].tail_area < 0.05 * cc_cusp.total_area


def test_calabi_croke_needs_two_steps_per_side():
    with pytest.raises(ValueError):
        g.gen_calabi_croke(1.0, refinement=1)


def test_too_many_cusps():
    with pytest.raises(TooManyCusps):
        g.gen_calabi_croke(1.0, cusps=[0, 1, 2, 0], refinement=4)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_each_cusp_adds_an_end(k):
    m = g.gen_calabi_croke(1.0, cusps=list(range(k)), refinement=4)
    assert m.n_ends == k


@pytest.mark.parametrize("profile", ["lorentzian", "capped_gaussian", "exp_hemisphere"])
def test_revolution_area_matches_quadrature(profile):
    prof = g.PROFILES[profile]
    m = g.generate(g.SurfaceSpec("revolution", {"profile": profile}))
    A = g.revolution_area(prof["r"], prof["domain"], prof.get("dr"), prof.get("cap"))
    assert abs(m.total_area - A) / A < 0.01
    assert m.n_ends == sum(math.isinf(x) for x in prof["domain"])


def test_lorentzian_bound_exceeds_neck(lorentzian_area):
    assert 2 * math.sqrt(2 * lorentzian_area) > 2 * math.pi


def test_lorentzian_belt_rings(lorentzian):
    # rings sit symmetric about the neck; each polygon has perimeter 2*pi*r(x)
    X = np.round(lorentzian.coords[:, 0], 9)
    xs = np.unique(X)
    near = sorted(xs[np.argsort(np.abs(xs))[:2]])
    assert near[0] == pytest.approx(-near[1])
    for x in near:
        P = lorentzian.coords[X == x]
        ang = np.arctan2(P[:, 2], P[:, 1])
        P = P[np.argsort(ang)]
        perim = np.linalg.norm(P - np.roll(P, 1, axis=0), axis=1).sum()
        assert perim == pytest.approx(2 * math.pi * g.lorentzian(x), rel=1e-9)


def test_truncation_collar(lorentzian):
    A = lorentzian.total_area
    for end in lorentzian.ends:
        ring = lorentzian.coords[end.boundary]
        r = np.linalg.norm(ring[:, 1:], axis=1).mean()
        assert 2 * math.pi * r <= 0.05 * math.sqrt(A) * 1.5
        assert end.tail_area > 0


def test_infinite_area_rejected():
    with pytest.raises(InfiniteArea):
        g.gen_revolution(lambda x: 1.0)
    with pytest.raises(InfiniteArea):
        g.gen_revolution(lambda x: 1 / (1 + abs(x)))


def test_nonpositive_profile_rejected():
    with pytest.raises(NonPositiveProfile):
        g.gen_revolution(lambda x: -1.0, (0.0, 1.0))


def test_baselines(torus):
    assert torus.total_area == pytest.approx(2.0, rel=1e-12)
    assert euler_characteristic(torus) == 0
    sq = g.gen_baseline("flat_torus", {"a": 1.0, "b": 1.0})
    assert sq.total_area == pytest.approx(1.0, rel=1e-12)
    s = g.gen_baseline("sphere", {"radius": 1.0}, refinement=3)
    assert s.total_area == pytest.approx(4 * math.pi, rel=0.01)
    assert euler_characteristic(s) == 2


def test_icosphere_area_converges():
    errs = [abs(g.sphere(1.0, level=k, base="icosahedron").total_area - 4 * math.pi) for k in (2, 3, 4)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] / (4 * math.pi) < 0.005


def test_flat_cylinder(cylinder):
    assert cylinder.n_ends == 2
    assert cylinder.total_area == pytest.approx(5.0, rel=1e-12)


def test_spec_validation():
    with pytest.raises(ValueError):
        g.SurfaceSpec("klein_bottle")
    with pytest.raises(ValueError):
        g.SurfaceSpec("sphere", {"radius": -1.0})
    with pytest.raises(ValueError):
        g.SurfaceSpec("sphere", refinement=0)


@settings(max_examples=8, deadline=None)
@given(st.floats(0.3, 3.0), st.integers(2, 3))
def test_calabi_croke_area_property(h, refinement):
    m = g.gen_calabi_croke(h, refinement=refinement)
    assert m.total_area == pytest.approx(2 * h * h / math.sqrt(3), rel=1e-10)
    assert g.altitude_loop(m, 1).length == pytest.approx(2 * h, rel=1e-9)


@settings(max_examples=8, deadline=None)
@given(st.floats(0.3, 3.0), st.floats(0.3, 3.0))
def test_torus_area_property(a, b):
    assert g.flat_torus(a, b, refinement=1).total_area == pytest.approx(a * b, rel=1e-10)
