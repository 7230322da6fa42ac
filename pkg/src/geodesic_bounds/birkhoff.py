"""Birkhoff curve shortening for closed curves, free or with a fixed base.

Each phase splits the curve at ``N`` points equally spaced in arclength
(every arc shorter than ``rho``) and pulls every arc taut within its strip.
Consecutive phases start half an arc apart, so the corners left by one phase
sit in the middle of the arcs of the next.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetExceeded, CurveOffMesh, InvalidCertificate, RegionNotConvex
from .geodesic_engine import wedge_angles
from .surface_core import (
    MeshPoint,
    PolylineCurve,
    SurfaceMesh,
    bary_in,
    curve_length,
    locate,
    make_point,
    same_location,
    segment_lengths,
)
from .unfolding import strip_along, straighten


@dataclass
class ShortenOpts:
    max_iters: int = 10_000
    eps_point: float | None = None  # default 1e-4 * sqrt(A)
    tol_angle: float = 1e-3
    rho: float | None = None  # default 0.1 * sqrt(A)
    stall_iters: int = 200
    record_every: int = 1

    def resolved(self, mesh: SurfaceMesh) -> "ShortenOpts":
        o = ShortenOpts(**self.__dict__)
        sa = math.sqrt(mesh.total_area)
        if o.eps_point is None:
            o.eps_point = 1e-4 * sa
        if o.rho is None:
            o.rho = 0.1 * sa
        return o


@dataclass(frozen=True)
class Point:
    point: MeshPoint
    kind: str = "point"


@dataclass(frozen=True)
class Geodesic:
    curve: PolylineCurve
    kind: str = "geodesic"


@dataclass(frozen=True)
class Escape:
    end_id: int
    kind: str = "escape"


@dataclass(frozen=True)
class Budget:
    reason: str = "max_iters"
    kind: str = "budget"


@dataclass
class ShorteningTrace:
    snapshots: list = field(default_factory=list)
    lengths: list = field(default_factory=list)
    termination: object = None
    t_f: int = 0
    base: MeshPoint | None = None
    opts: ShortenOpts | None = None

    @property
    def final(self) -> PolylineCurve:
        return self.snapshots[-1]

    @property
    def kind(self) -> str:
        return self.termination.kind if self.termination is not None else "none"


# -- arcs ----------------------------------------------------------------------

def _interp(mesh, a, b, f, lam):
    ba, bb = bary_in(mesh, a, f), bary_in(mesh, b, f)
    return make_point(f, *[(1 - lam) * x + lam * y for x, y in zip(ba, bb)])


def split_closed(mesh: SurfaceMesh, curve: PolylineCurve, svals):
    """Arcs of a closed curve between the break points at arclengths
    ``svals`` (increasing, in ``[0, L)``).  Returns a list of
    ``(points, faces)``; arc ``i`` runs from break ``i`` to break ``i+1``."""
    lens = segment_lengths(mesh, curve)
    nseg = len(lens)
    cum = np.concatenate([[0.0], np.cumsum(lens)])
    P, Fc = curve.points, curve.faces
    breaks = []
    for s in svals:
        k = int(np.searchsorted(cum, s, side="right") - 1)
        k = min(max(k, 0), nseg - 1)
        L = lens[k]
        lam = 0.0 if L == 0 else (s - cum[k]) / L
        if lam >= 1 - 1e-12:
            k, lam = (k + 1) % nseg, 0.0
        if lam <= 1e-12:
            breaks.append((k, 0.0, P[k]))
        else:
            a, b, f = curve.segment(k)
            breaks.append((k, lam, _interp(mesh, a, b, f, lam)))
    n = len(breaks)
    arcs = []
    for i in range(n):
        k0, l0, p0 = breaks[i]
        k1, l1, p1 = breaks[(i + 1) % n]
        if n > 1 and k1 == k0 and l1 > l0:
            arcs.append(([p0, p1], [Fc[k0]]))
            continue
        pts, fs = [p0], []

        def push(q, f):
            if same_location(mesh, pts[-1], q):
                return
            pts.append(q)
            fs.append(f)

        push(P[(k0 + 1) % nseg], Fc[k0])
        k = (k0 + 1) % nseg
        while k != k1:
            push(P[(k + 1) % nseg], Fc[k])
            k = (k + 1) % nseg
        if l1 > 0:
            push(p1, Fc[k1])
        if fs:
            pts[-1] = p1 if same_location(mesh, pts[-1], p1) else pts[-1]
        arcs.append((pts, fs))
    return arcs


def _straighten_arc(mesh, pts, fs):
    if len(fs) <= 1:
        return pts, fs
    strip = strip_along(mesh, pts, fs)
    out, of = straighten(mesh, pts[0], pts[-1], strip)
    return out, of


def _join(mesh, arcs):
    pts, fs = [], []
    for a_pts, a_fs in arcs:
        if not a_fs:
            continue
        pts.extend(a_pts[:-1])
        fs.extend(a_fs)
    return pts, fs


def birkhoff_step(mesh: SurfaceMesh, curve: PolylineCurve, n_arcs: int, offset: float, fixed: bool):
    """One phase: break at ``(k + offset) L / n``; with ``fixed`` the start
    point is kept as an additional break point."""
    L = curve.length
    step = L / n_arcs
    svals = [(k + offset) * step for k in range(n_arcs)]
    if fixed and offset > 0:
        svals = [0.0] + svals
    svals = [s for s in svals if s < L]
    if fixed or offset == 0:
        svals[0] = 0.0
    arcs = split_closed(mesh, curve, svals)
    new = [_straighten_arc(mesh, p, f) for p, f in arcs]
    pts, fs = _join(mesh, new)
    if not fs:
        return PolylineCurve([curve.points[0]], [], True)
    c = PolylineCurve(pts, fs, True)
    curve_length(mesh, c)
    return c


# -- termination tests -----------------------------------------------------------

def max_turning(mesh: SurfaceMesh, curve: PolylineCurve, skip_base: bool = False) -> float:
    """Largest deviation from straightness at the nodes of a closed curve:
    ``pi - min(left, right)``; inf at boundary vertices."""
    n = curve.n_segments
    worst = 0.0
    for k in range(n):
        if skip_base and k == 0:
            continue
        prev, at, f_in = curve.segment((k - 1) % n)
        _, nxt, f_out = curve.segment(k)
        at = curve.points[k]
        if same_location(mesh, prev, at) or same_location(mesh, at, nxt):
            continue
        try:
            left, right = wedge_angles(mesh, prev, f_in, at, nxt, f_out)
        except CurveOffMesh:
            return math.inf
        worst = max(worst, math.pi - min(left, right))
    return worst


def _collar_end(mesh: SurfaceMesh, curve: PolylineCurve):
    for e_id, end in enumerate(mesh.ends):
        if not end.collar_faces:
            continue
        if all(any(f in end.collar_faces for f in mesh.faces_of_point(p)) for p in curve.points) and \
                all(f in end.collar_faces for f in curve.faces):
            return e_id
    return None


def _star_vertex(mesh: SurfaceMesh, curve: PolylineCurve):
    """Positively curved vertex whose star holds the whole (short) curve.

    A flat cone of angle below ``2 pi`` carries no closed geodesic, so a
    free curve trapped there can only contract to the cone point.
    """
    common = None
    for f in curve.faces:
        vs = set(mesh.faces_l[f])
        common = vs if common is None else common & vs
        if not common:
            return None
    for v in common or ():
        if mesh.boundary_vertex[v] or mesh.cone_l[v] >= 2 * math.pi - 1e-9:
            continue
        reach = min(mesh.side_lengths[f].min() for f, _ in mesh.vertex_corners[v])
        if curve.length < 0.5 * reach:
            return v
    return None


def _classify(mesh, curve, opts, fixed, angles=True):
    if curve.length < opts.eps_point:
        return Point(curve.points[0])
    if not fixed:
        v = _star_vertex(mesh, curve)
        if v is not None:
            return Point(mesh.vertex_point(v))
    e = _collar_end(mesh, curve)
    if e is not None:
        return Escape(e)
    if angles and max_turning(mesh, curve, skip_base=fixed) < opts.tol_angle:
        return Geodesic(curve)
    return None


def _run(mesh, curve, opts, base, monitor=None):
    if not curve.closed:
        raise ValueError("shortening needs a closed curve")
    o = (opts or ShortenOpts()).resolved(mesh)
    fixed = base is not None
    cur = curve
    curve_length(mesh, cur)
    trace = ShorteningTrace([cur], [cur.length], None, 0, base, o)
    term = _classify(mesh, cur, o, fixed)
    offset = 0.0
    best = cur.length
    stall = 0
    it = 0
    while term is None and it < o.max_iters:
        it += 1
        n_arcs = max(4, 2 * math.ceil(cur.length / (2 * o.rho)))
        prev_len = cur.length
        nxt = birkhoff_step(mesh, cur, n_arcs, offset, fixed)
        if nxt.length > cur.length + 1e-12 * max(1.0, cur.length):
            # never accept an increase (numerical guard); keep the old curve
            nxt = cur
        # a free curve restarts at its first break, so a constant half-arc
        # offset alternates the partition; a based curve restarts at the
        # base, so its offset must alternate explicitly
        offset = (0.5 - offset) if fixed else 0.5
        cur = nxt
        if it % o.record_every == 0:
            trace.snapshots.append(cur)
            trace.lengths.append(cur.length)
        # a stationary curve barely shortens, so the angle test only runs
        # once the relative decrease per phase is small
        slow = prev_len - cur.length <= 1e-5 * prev_len
        term = _classify(mesh, cur, o, fixed, angles=slow)
        if cur.length < best * (1 - 1e-13):
            best = cur.length
            stall = 0
        else:
            stall += 1
            if term is None and stall >= o.stall_iters:
                term = Budget("stalled")
        if term is None and monitor is not None:
            reason = monitor(it, cur)
            if reason:
                term = Budget(reason)
    if trace.snapshots[-1] is not cur:
        trace.snapshots.append(cur)
        trace.lengths.append(cur.length)
    if term is None:
        term = Budget("max_iters")
    if fixed and isinstance(term, Point):
        term = Point(base)
    trace.termination = term
    trace.t_f = len(trace.snapshots) - 1
    return trace


def shorten_closed(mesh: SurfaceMesh, curve: PolylineCurve, opts: ShortenOpts | None = None,
                   raise_on_budget: bool = False, monitor=None) -> ShorteningTrace:
    """Free Birkhoff shortening of a closed curve.

    ``monitor(iteration, curve)`` may return a reason string to stop early;
    the run then ends with ``Budget(reason)``.
    """
    trace = _run(mesh, curve, opts, None, monitor)
    if raise_on_budget and isinstance(trace.termination, Budget):
        raise BudgetExceeded("shortening did not terminate", trace)
    return trace


def rebase(mesh: SurfaceMesh, curve: PolylineCurve, base: MeshPoint) -> PolylineCurve:
    """Rotate a closed curve so that it starts at ``base`` (inserted if it
    lies in the middle of a segment)."""
    n = curve.n_segments
    pts, fs = list(curve.points), list(curve.faces)
    hit = None
    for k in range(n):
        a, b, f = curve.segment(k)
        if same_location(mesh, a, base, 1e-9):
            hit = (k, None)
            break
        try:
            bary_in(mesh, base, f)
        except CurveOffMesh:
            continue
        xa, xb = np.array(mesh.local_xy(a, f)), np.array(mesh.local_xy(b, f))
        xp = np.array(mesh.local_xy(base, f))
        d = xb - xa
        dd = float(np.dot(d, d))
        if dd == 0:
            continue
        t = float(np.dot(xp - xa, d) / dd)
        off = abs(d[0] * (xp - xa)[1] - d[1] * (xp - xa)[0]) / math.sqrt(dd)
        if -1e-9 <= t <= 1 + 1e-9 and off < 1e-7 * math.sqrt(dd):
            hit = (k, t)
            break
    if hit is None:
        raise CurveOffMesh("base does not lie on the curve")
    k, t = hit
    if t is not None and t >= 1 - 1e-9:
        k, t = (k + 1) % n, None
    if t is None:
        order = list(range(k, n)) + list(range(k))
        return _closed(mesh, [pts[i] for i in order], [fs[i] for i in order])
    f = fs[k]
    bp = MeshPoint(f, bary_in(mesh, base, f))
    new_pts = [bp] + [pts[(k + 1 + j) % n] for j in range(n)]
    new_fs = [f] + [fs[(k + 1 + j) % n] for j in range(n - 1)] + [f]
    return _closed(mesh, new_pts, new_fs)


def _closed(mesh, pts, fs):
    out_p, out_f = [pts[0]], []
    for i, f in enumerate(fs):
        q = pts[(i + 1) % len(pts)]
        if same_location(mesh, out_p[-1], q) and i + 1 < len(pts):
            continue
        out_f.append(f)
        if i + 1 < len(pts):
            out_p.append(q)
    c = PolylineCurve(out_p, out_f, True)
    curve_length(mesh, c)
    return c


def shorten_fixed_point(mesh: SurfaceMesh, curve: PolylineCurve, base: MeshPoint,
                        opts: ShortenOpts | None = None, raise_on_budget: bool = False) -> ShorteningTrace:
    """Birkhoff shortening keeping ``base`` as a break point: ends at the
    point curve ``base`` or at a geodesic loop based there."""
    c = rebase(mesh, curve, base)
    trace = _run(mesh, c, opts, c.points[0])
    if raise_on_budget and isinstance(trace.termination, Budget):
        raise BudgetExceeded("shortening did not terminate", trace)
    return trace


def classify_termination(mesh: SurfaceMesh, trace: ShorteningTrace):
    """Re-check the certificate claimed by a finished trace."""
    o = (trace.opts or ShortenOpts()).resolved(mesh)
    final = trace.final
    term = trace.termination
    fixed = trace.base is not None
    if isinstance(term, Point):
        if final.length >= o.eps_point:
            raise InvalidCertificate(f"point termination with length {final.length:g}")
    elif isinstance(term, Escape):
        if _collar_end(mesh, final) != term.end_id:
            raise InvalidCertificate("escape termination outside the end collar")
    elif isinstance(term, Geodesic):
        turn = max_turning(mesh, term.curve, skip_base=fixed)
        if turn >= o.tol_angle:
            raise InvalidCertificate(f"geodesic termination with turning {turn:g}")
    elif isinstance(term, Budget):
        pass
    else:
        raise InvalidCertificate("unknown termination")
    return term


def is_monotone(trace: ShorteningTrace, tol: float = 1e-9) -> bool:
    L = trace.lengths
    return all(L[i + 1] <= L[i] + tol for i in range(len(L) - 1))


# -- convex regions ---------------------------------------------------------------

def region_boundary_angles(mesh: SurfaceMesh, region) -> dict:
    """Inside angle of a face set at each of its boundary vertices."""
    region = set(region)
    bverts = set()
    for f in region:
        for s in range(3):
            g, _ = mesh.twin_l[f][s]
            if g < 0 or g not in region:
                bverts.add(mesh.faces_l[f][s])
                bverts.add(mesh.faces_l[f][(s + 1) % 3])
    out = {}
    for v in bverts:
        out[v] = sum(mesh.corner_l[g][i] for g, i in mesh.vertex_corners[v] if g in region)
    return out


def is_convex_region(mesh: SurfaceMesh, region, tol: float = 1e-6) -> bool:
    angles = region_boundary_angles(mesh, region)
    region = set(region)
    for v, a in angles.items():
        if mesh.boundary_vertex[v] and all(g in region for g, _ in mesh.vertex_corners[v]):
            continue  # a truncation boundary, not a region wall
        if a > math.pi + tol:
            return False
    return True


def point_in_region(mesh, p, region) -> bool:
    return any(f in region for f in mesh.faces_of_point(p))


def _segment_in_region(mesh, a, b, f, region):
    if f in region:
        return True
    # a segment along an edge shared with a region face
    ka, ea = locate(mesh, a)
    kb, eb = locate(mesh, b)
    common = set(mesh.faces_of_point(a)) & set(mesh.faces_of_point(b)) & set(region)
    if not common:
        return False
    for g in common:
        xa, xb = np.array(mesh.local_xy(a, g)), np.array(mesh.local_xy(b, g))
        for s in range(3):
            L = mesh.layout_l[g]
            p0, p1 = np.array(L[s]), np.array(L[(s + 1) % 3])
            d = p1 - p0
            n = math.hypot(*d)
            if all(abs(d[0] * (x - p0)[1] - d[1] * (x - p0)[0]) / n < 1e-9 * n for x in (xa, xb)):
                return True
    return False


def curve_in_region(mesh: SurfaceMesh, curve: PolylineCurve, region) -> bool:
    region = set(region)
    if not all(point_in_region(mesh, p, region) for p in curve.points):
        return False
    return all(_segment_in_region(mesh, *curve.segment(k), region) for k in range(curve.n_segments))


def containment_check(mesh: SurfaceMesh, trace: ShorteningTrace, region, check_convex: bool = True) -> bool:
    """True iff every snapshot stays in the closed region."""
    region = set(region)
    if check_convex and not is_convex_region(mesh, region):
        raise RegionNotConvex("region boundary has an inside angle above pi")
    return all(curve_in_region(mesh, c, region) for c in trace.snapshots)


# -- export ------------------------------------------------------------------------

def write_trace_csv(path, trace: ShorteningTrace) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "length", "termination"])
        for i, L in enumerate(trace.lengths):
            w.writerow([i, repr(L), trace.kind if i == len(trace.lengths) - 1 else ""])


def write_snapshots_csv(path, trace: ShorteningTrace, every: int = 10) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "index", "face", "b0", "b1", "b2"])
        for i, c in enumerate(trace.snapshots):
            if i % every and i != len(trace.snapshots) - 1:
                continue
            for j, p in enumerate(c.points):
                w.writerow([i, j, p.face, repr(p.bary[0]), repr(p.bary[1]), repr(p.bary[2])])
