"""Small curve utilities shared by the loop and pipeline code: rotation,
products of loops, bridging, perturbation and intersection tests."""

from __future__ import annotations

import math

import numpy as np

from .errors import CurveOffMesh
from .surface_core import (
    MeshPoint,
    PolylineCurve,
    SurfaceMesh,
    bary_in,
    concatenate,
    curve_length,
    locate,
    make_point,
    same_location,
)


def as_open(curve: PolylineCurve) -> PolylineCurve:
    """A closed curve written as an open path that returns to its start."""
    if not curve.closed:
        return curve
    c = PolylineCurve(list(curve.points) + [curve.points[0]], list(curve.faces), False)
    c._length = curve._length
    return c


def rotate(curve: PolylineCurve, j: int) -> PolylineCurve:
    """Closed curve started at its ``j``-th point."""
    n = len(curve.points)
    j %= n
    pts = curve.points[j:] + curve.points[:j]
    fs = curve.faces[j:] + curve.faces[:j]
    return PolylineCurve(pts, fs, True, curve._length)


def close_open(mesh: SurfaceMesh, curve: PolylineCurve) -> PolylineCurve:
    """Closed curve from an open path whose two ends coincide."""
    return concatenate(mesh, [curve], closed=True)


def join_closed(mesh: SurfaceMesh, parts) -> PolylineCurve:
    """Concatenate open paths into one closed curve, dropping empty parts."""
    parts = [p for p in parts if p.faces]
    return concatenate(mesh, parts, closed=True)


def loop_product(mesh: SurfaceMesh, c1: PolylineCurve, c2: PolylineCurve, bridge: PolylineCurve | None = None,
                 reverse_second: bool = False) -> PolylineCurve:
    """``c1 * bridge * c2 * bridge^-1`` as one closed curve.

    ``bridge`` runs from ``c1.points[0]`` to ``c2.points[0]``; with
    ``reverse_second`` the second loop is traversed backwards.
    """
    from .geodesic_engine import shortest_path

    if reverse_second:
        c2 = c2.reversed()
    if bridge is None:
        if same_location(mesh, c1.points[0], c2.points[0], 1e-9):
            bridge = PolylineCurve([c1.points[0]], [])
        else:
            bridge = shortest_path(mesh, c1.points[0], c2.points[0])
    parts = [as_open(c1)]
    if bridge.faces:
        parts.append(bridge)
    parts.append(as_open(c2))
    if bridge.faces:
        parts.append(bridge.reversed())
    return concatenate(mesh, parts, closed=True)


def perturb(mesh: SurfaceMesh, curve: PolylineCurve, rng: np.random.Generator, scale: float = 0.15) -> PolylineCurve:
    """Jitter the curve's nodes without changing its faces.

    Face-interior nodes move inside their face and edge nodes slide along
    their edge; vertices and the first node stay put.
    """
    pts = list(curve.points)
    for i in range(1, len(pts)):
        p = pts[i]
        kind, _ = locate(mesh, p)
        if kind == "vertex":
            continue
        b = np.array(p.bary)
        nz = b > 0
        noise = rng.normal(0.0, scale, 3) * nz
        nb = np.clip(b + noise * b.min(initial=1.0, where=nz), 0.0, None) * nz
        if nb.sum() <= 0:
            continue
        nb = nb / nb.sum()
        # keep interior nodes interior and edge nodes strictly inside the edge
        if kind == "face" and nb.min() <= 1e-9:
            continue
        if kind == "edge" and nb[nz].min() <= 1e-9:
            continue
        pts[i] = make_point(p.face, *nb)
    c = PolylineCurve(pts, list(curve.faces), curve.closed)
    try:
        curve_length(mesh, c)
    except CurveOffMesh:
        return curve
    return c


# -- intersections ----------------------------------------------------------------

def loc_key(mesh: SurfaceMesh, p: MeshPoint, digits: int = 9):
    """Hashable description of where ``p`` sits, independent of its face."""
    kind, ent = locate(mesh, p)
    if kind == "vertex":
        return ("v", ent)
    if kind == "edge":
        f0, s0 = mesh.edge_faces[ent][0]
        b = bary_in(mesh, p, f0)
        return ("e", ent, round(b[(s0 + 1) % 3], digits))
    return ("f", p.face) + tuple(round(x, digits) for x in p.bary)


def _segments_by_face(mesh, curve, tag):
    out = {}
    for k in range(curve.n_segments):
        a, b, f = curve.segment(k)
        xa = complex(*mesh.local_xy(a, f))
        xb = complex(*mesh.local_xy(b, f))
        if xa != xb:
            out.setdefault(f, []).append((tag, k, xa, xb))
    return out


def _cumulative(mesh, curve):
    from .surface_core import segment_lengths

    return np.concatenate([[0.0], np.cumsum(segment_lengths(mesh, curve))])


def crossing_params(mesh: SurfaceMesh, c1: PolylineCurve, c2: PolylineCurve | None = None, ignore=()):
    """Meetings of two curves (or of one curve with itself) as
    ``(s1, s2, point)`` with arclength positions along each curve.

    Meetings at the locations in ``ignore`` and joins between consecutive
    segments of the same curve do not count.
    """
    self_test = c2 is None
    other_c = c1 if self_test else c2
    ign = {loc_key(mesh, p) for p in ignore}
    cum1 = _cumulative(mesh, c1)
    cum2 = cum1 if self_test else _cumulative(mesh, other_c)
    hits = {}

    def adjacent(c, i, j):
        n = len(c.points)
        if not c.closed:
            return abs(i - j) <= 1
        return (i - j) % n in (0, 1, n - 1)

    # shared nodes
    keys1 = [loc_key(mesh, p) for p in c1.points]
    if self_test:
        seen = {}
        for i, key in enumerate(keys1):
            if key in seen and not adjacent(c1, seen[key], i) and key not in ign:
                hits.setdefault(key, (float(cum1[seen[key]]), float(cum1[i]), c1.points[i]))
            seen.setdefault(key, i)
    else:
        first = {}
        for i, key in enumerate(keys1):
            first.setdefault(key, i)
        for j, p in enumerate(other_c.points):
            key = loc_key(mesh, p)
            if key in first and key not in ign:
                hits.setdefault(key, (float(cum1[first[key]]), float(cum2[j]), p))
    # transversal crossings inside faces
    tol = 1e-10
    seg1 = _segments_by_face(mesh, c1, 0)
    seg2 = seg1 if self_test else _segments_by_face(mesh, other_c, 1)
    n1 = c1.n_segments
    for f, lst in seg1.items():
        other = seg2.get(f, [])
        for ia, (_, ka, a0, a1) in enumerate(lst):
            for ib, (_, kb, b0, b1) in enumerate(other):
                if self_test and (ib <= ia or (ka - kb) % n1 in (0, 1, n1 - 1)):
                    continue
                hit = _seg_hit_params(a0, a1, b0, b1, tol)
                if hit is None:
                    continue
                sa, ub = hit
                p = _point_in_face(mesh, f, a0 + sa * (a1 - a0))
                key = loc_key(mesh, p)
                if key in ign or key in hits:
                    continue
                s1 = float(cum1[ka] + sa * (cum1[ka + 1] - cum1[ka]))
                s2 = float(cum2[kb] + ub * (cum2[kb + 1] - cum2[kb]))
                if self_test and s2 < s1:
                    s1, s2 = s2, s1
                hits[key] = (s1, s2, p)
    return sorted(hits.values(), key=lambda h: (h[0], h[1]))


def _seg_hit_params(a0, a1, b0, b1, tol):
    d1, d2 = a1 - a0, b1 - b0
    den = d1.real * d2.imag - d1.imag * d2.real
    if abs(den) < tol * abs(d1) * abs(d2):
        return None  # parallel: overlaps are caught by shared nodes
    w = b0 - a0
    s = (w.real * d2.imag - w.imag * d2.real) / den
    u = (w.real * d1.imag - w.imag * d1.real) / den
    if -tol <= s <= 1 + tol and -tol <= u <= 1 + tol:
        return min(max(s, 0.0), 1.0), min(max(u, 0.0), 1.0)
    return None


def crossings(mesh: SurfaceMesh, c1: PolylineCurve, c2: PolylineCurve | None = None, ignore=()) -> list[MeshPoint]:
    """Points where two curves meet (or where one curve meets itself)."""
    return [h[2] for h in crossing_params(mesh, c1, c2, ignore)]


def _point_in_face(mesh, f, z):
    (x0, y0), (x1, y1), (x2, y2) = mesh.layout_l[f]
    det = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
    b1 = ((z.real - x0) * (y2 - y0) - (x2 - x0) * (z.imag - y0)) / det
    b2 = ((x1 - x0) * (z.imag - y0) - (z.real - x0) * (y1 - y0)) / det
    b = np.clip([1 - b1 - b2, b1, b2], 0.0, 1.0)
    return make_point(f, *(b / b.sum()))


def is_simple(mesh: SurfaceMesh, curve: PolylineCurve) -> bool:
    """No self-intersections (the closing join of a loop is allowed)."""
    if curve.n_segments < 2:
        return True
    return not crossings(mesh, curve)


def min_spacing(mesh: SurfaceMesh, c1: PolylineCurve, c2: PolylineCurve) -> float:
    """Smallest distance between node positions of two curves sharing a face."""
    best = math.inf
    by_face = {}
    for p in c2.points:
        for f in mesh.faces_of_point(p):
            by_face.setdefault(f, []).append(complex(*mesh.local_xy(p, f)))
    for p in c1.points:
        for f in mesh.faces_of_point(p):
            z = complex(*mesh.local_xy(p, f))
            for w in by_face.get(f, []):
                best = min(best, abs(z - w))
    return best
