"""End-to-end searches for a short closed geodesic.

* ``two_end_pipeline``: a line between two ends, the dichotomy scan along it
  and, at the side change, shortening of the resulting loop pair.
* ``one_end_pipeline``: the same scan along a ray; when every loop is convex
  toward the end, the Berger construction and its sweepout of the
  compactified surface, followed by min-max extraction at the widest slice.
* ``estimate_l``: dispatch on the number of ends, with a multi-seed search
  on closed surfaces.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .birkhoff import (
    Escape,
    Geodesic,
    Point,
    ShortenOpts,
    _classify,
    birkhoff_step,
    curve_in_region,
    is_convex_region,
    max_turning,
    shorten_closed,
)
from .curves import as_open, crossing_params, loop_product, perturb
from .errors import (
    AngleGapUncovered,
    BudgetExceeded,
    CurveOffMesh,
    Inconclusive,
    Inconsistent,
    LengthBudgetExceeded,
    LineScanInconclusive,
    PreconditionFailed,
    SingularLevel,
)
from .geodesic_engine import (
    _dir_in_face,
    angular_coordinate,
    distance_field,
    end_ring,
    geodesic_line,
    geodesic_ray,
    graph_path,
    nudged_level_set,
    point_at_length,
    shortest_path,
    sub_curve,
    taut_path,
    vertex_distance_field,
)
from .loop_finder import (
    ConvexityCert,
    GeodesicLoop,
    Pair,
    ScanContext,
    _default_range,
    _ref_side,
    dichotomy_scan,
)
from .surface_core import (
    MeshPoint,
    PolylineCurve,
    SurfaceMesh,
    bary_in,
    concatenate,
    curve_length,
    locate,
    point_curve,
)
from .sweep import sweep_minmax
from .topology import cut_components, side_faces
from .unfolding import trace_straight

log = logging.getLogger(__name__)

TOL_ANGLE = 1e-3


# -- reports --------------------------------------------------------------------------

@dataclass
class GeodesicReport:
    geodesic: PolylineCurve | None
    length: float | None
    bound_used: float
    provenance: str
    traces: dict = field(default_factory=dict)
    area: float = 0.0
    n_ends: int = 0
    delta_mesh: float = 0.0
    turning: float | None = None
    warnings: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def ratio(self) -> float | None:
        return None if self.length is None else self.length / math.sqrt(self.area)

    @property
    def within_bound(self) -> bool:
        return self.length is not None and self.length <= self.bound_used + self.delta_mesh

    def summary(self) -> dict:
        return {
            "length": self.length,
            "bound_used": self.bound_used,
            "ratio": self.ratio,
            "area": self.area,
            "n_ends": self.n_ends,
            "delta_mesh": self.delta_mesh,
            "within_bound": self.within_bound,
            "turning": self.turning,
            "provenance": self.provenance,
            "warnings": list(self.warnings),
        }


def _report(mesh, curve, bound, provenance, **kw) -> GeodesicReport:
    turn = max_turning(mesh, curve) if curve is not None else None
    length = curve.length if curve is not None else None
    return GeodesicReport(curve, length, bound, provenance, area=mesh.total_area, n_ends=mesh.n_ends,
                          delta_mesh=2 * mesh.max_edge, turning=turn, **kw)


def _best_geodesic(traces):
    best = None
    for tr in traces:
        if tr is not None and isinstance(tr.termination, Geodesic):
            if best is None or tr.termination.curve.length < best.termination.curve.length:
                best = tr
    return best


# -- loop pairs -----------------------------------------------------------------------

@dataclass
class LoopPair:
    e1: GeodesicLoop
    e2: GeodesicLoop  # oriented so that e1 * e2 crosses itself transversally at the base
    omega1: frozenset
    omega2: frozenset
    e3: PolylineCurve  # e1 * e2^-1
    omega3: frozenset
    eight: PolylineCurve  # e1 * e2
    transverse: bool = True


@dataclass
class PairShortenTrace:
    pair_trace: list = field(default_factory=list)  # (iteration, e1_t, e2_t)
    lengths: list = field(default_factory=list)  # L(e1_t) + L(e2_t) per iteration
    sigma: dict = field(default_factory=dict)  # iteration -> (trace e1, trace e2, trace e3)
    V: frozenset = frozenset()
    V_convex: bool = True
    sphere_log: list = field(default_factory=list)
    t_f: int | None = None
    eight_termination: object = None
    sweep_log: list = field(default_factory=list)


def _loop_dirs(mesh, curve):
    # outgoing and backward directions at the base, in its polar chart
    base = curve.points[0]
    _, nxt, f_out = curve.segment(0)
    prev, _, f_in = curve.segment(curve.n_segments - 1)
    th_o, total = angular_coordinate(mesh, base, f_out, _dir_in_face(mesh, base, nxt, f_out))
    th_b, _ = angular_coordinate(mesh, base, f_in, _dir_in_face(mesh, base, prev, f_in))
    return th_o, th_b, total


def _chord_separates(a, b, x, y, total):
    def inside(z):
        return 0 < (z - a) % total < (b - a) % total
    return inside(x) != inside(y)


def _join_loops(mesh, c1, c2):
    return concatenate(mesh, [as_open(c1), as_open(c2)], closed=True)


def _region_of(mesh, loop: GeodesicLoop, cert: ConvexityCert):
    sep = cut_components(mesh, loop.curve)
    if not sep.separating:
        raise PreconditionFailed("loop of the pair does not separate")
    conv = cert.ref_side if cert.side == "toward_infinity" else ("right" if cert.ref_side == "left" else "left")
    return frozenset(side_faces(mesh, sep, conv))


def make_loop_pair(mesh: SurfaceMesh, pair: Pair) -> LoopPair:
    """Loop pair from a scan ``Pair``: the regions the loops are convex to,
    the figure-eight ``e1 * e2`` and ``e3 = e1 * e2^-1``."""
    if pair.cert_minus is None or pair.cert_plus is None:
        raise PreconditionFailed("pair loops carry no convexity certificates")
    e1, e2 = pair.loop_minus, pair.loop_plus
    om1 = _region_of(mesh, e1, pair.cert_minus)
    om2 = _region_of(mesh, e2, pair.cert_plus)
    if om1 & om2:
        raise PreconditionFailed(f"regions of the pair overlap in {len(om1 & om2)} faces")
    o1, b1, total = _loop_dirs(mesh, e1.curve)
    o2, b2, _ = _loop_dirs(mesh, e2.curve)
    # pass one arrives along e1 and leaves along e2, pass two the reverse
    fwd = _chord_separates(b1, o2, b2, o1, total)
    rev = _chord_separates(b1, b2, o2, o1, total)
    c2 = e2.curve if (fwd or not rev) else e2.curve.reversed()
    if c2 is not e2.curve:
        e2 = GeodesicLoop(c2, e2.base, e2.vertex_angles[::-1], e2.simple, e2.essential_wrt, e2.trace)
    eight = _join_loops(mesh, e1.curve, c2)
    e3 = _join_loops(mesh, e1.curve, c2.reversed())
    om3 = frozenset(range(mesh.n_faces)) - om1 - om2
    return LoopPair(e1, e2, om1, om2, e3, om3, eight, fwd or rev)


def _arc(mesh, curve, a, b):
    """Open piece of a closed curve from arclength ``a`` forward to ``b``."""
    oc = as_open(curve)
    L = curve.length
    if a <= b:
        return sub_curve(mesh, oc, a, b)
    parts = [p for p in (sub_curve(mesh, oc, a, L), sub_curve(mesh, oc, 0.0, b)) if p.faces]
    return concatenate(mesh, parts) if parts else sub_curve(mesh, oc, a, L)


def _close_at(mesh, arc, p):
    pts = list(arc.points)
    try:
        pts[0] = MeshPoint(arc.faces[0], bary_in(mesh, p, arc.faces[0]))
        pts[-1] = MeshPoint(arc.faces[-1], bary_in(mesh, p, arc.faces[-1]))
    except (CurveOffMesh, IndexError):
        pass
    return concatenate(mesh, [PolylineCurve(pts, list(arc.faces))], closed=True)


def _split_eight(mesh, curve, pred):
    """The two loops at the self-crossing best matching the predicted
    arclengths ``pred`` of the two passes."""
    hits = crossing_params(mesh, curve)
    if not hits:
        return None
    L = curve.length

    def cd(x, y):
        d = abs(x - y) % L
        return min(d, L - d)

    best = None
    for s1, s2, p in hits:
        for a, b in ((s1, s2), (s2, s1)):
            cost = cd(a, pred[0]) + cd(b, pred[1])
            if best is None or cost < best[0]:
                best = (cost, a, b, p)
    _, a, b, p = best
    try:
        l1 = _close_at(mesh, _arc(mesh, curve, a, b), p)
        l2 = _close_at(mesh, _arc(mesh, curve, b, a), p)
    except CurveOffMesh:
        return None
    if l1.length == 0 or l2.length == 0:
        return None
    return a, b, l1, l2


def _end_region(mesh, omega):
    """Collar faces of the ends lying in ``omega``: the locally convex set V."""
    out = set()
    for end in mesh.ends:
        if end.collar_faces and set(end.collar_faces) <= set(omega):
            out |= set(end.collar_faces)
    return frozenset(out)


def _sample_indices(marks, max_samples):
    if len(marks) <= max_samples:
        return marks
    pick = np.linspace(0, len(marks) - 1, max_samples).round().astype(int)
    return [marks[i] for i in sorted(set(pick.tolist()))]


def _eight_trace(mesh, pair: LoopPair, V, opts, max_iters):
    """Free shortening of the figure-eight, split at its crossing into the
    two loops at every iteration."""
    o = (opts or ShortenOpts()).resolved(mesh)
    cur = pair.eight
    L1 = pair.e1.curve.length
    pt = PairShortenTrace(V=V)
    pt.pair_trace.append((0, pair.e1.curve, pair.e2.curve))
    pt.lengths.append(cur.length)
    marks = [0]
    pred = (0.0, L1)
    offset = 0.0
    best, stall = cur.length, 0
    term = None
    for it in range(1, max_iters + 1):
        n_arcs = max(4, 2 * math.ceil(cur.length / (2 * o.rho)))
        shift = offset * cur.length / n_arcs
        nxt = birkhoff_step(mesh, cur, n_arcs, offset, False)
        if nxt.length > cur.length + 1e-12 * max(1.0, cur.length):
            nxt = cur
            shift = 0.0
        ratio = nxt.length / cur.length if cur.length > 0 else 1.0
        Ln = nxt.length
        pred = (((pred[0] - shift) * ratio) % max(Ln, 1e-300), ((pred[1] - shift) * ratio) % max(Ln, 1e-300))
        offset = 0.5
        prev_len = cur.length
        cur = nxt
        slow = prev_len - cur.length <= 1e-5 * prev_len
        term = _classify(mesh, cur, o, False, angles=slow)
        split = _split_eight(mesh, cur, pred)
        if split is None:
            # the crossing was lost: the eight untwisted or collapsed
            break
        a, b, l1, l2 = split
        pred = (a, b)
        pt.pair_trace.append((it, l1, l2))
        pt.lengths.append(cur.length)
        if prev_len - cur.length > 1e-3 * prev_len or it % 10 == 0:
            marks.append(len(pt.pair_trace) - 1)
        if pt.t_f is None and V and curve_in_region(mesh, cur, V):
            pt.t_f = len(pt.pair_trace) - 1
        if cur.length < best * (1 - 1e-13):
            best, stall = cur.length, 0
        else:
            stall += 1
        if term is not None or stall >= o.stall_iters:
            break
    last = len(pt.pair_trace) - 1
    if marks[-1] != last:
        marks.append(last)
    pt.eight_termination = term
    if pt.t_f is None:
        pt.t_f = last
    return pt, marks, cur


def loop_pair_shorten(mesh: SurfaceMesh, pair: LoopPair, opts: ShortenOpts | None = None, max_samples: int = 8,
                      max_iters: int = 1500, use_sweep: bool = True) -> GeodesicReport:
    """Closed geodesic of length at most ``L(e1) + L(e2)`` from a loop pair.

    The figure-eight ``e1 * e2`` is shortened while tracking its two
    sub-loops; at sampled times the loops ``e1_t``, ``e2_t`` and
    ``e1_t * e2_t^-1`` are shortened freely and their terminations logged.
    The first certified geodesic wins.  If none appears, a level-set
    min-max sweep from the end region of ``e1`` locates the obstruction;
    failing that the contradiction branch raises ``Inconsistent``.
    """
    bound = pair.e1.curve.length + pair.e2.curve.length
    if not pair.e1.base or pair.omega1 & pair.omega2:
        raise PreconditionFailed("loop pair invariants do not hold")
    V = _end_region(mesh, pair.omega1) | _end_region(mesh, pair.omega2)
    pt, marks, last_eight = _eight_trace(mesh, pair, V, opts, max_iters)
    pt.V_convex = is_convex_region(mesh, V) if V else True
    warnings = [] if pair.transverse else ["loops do not cross transversally at the base"]
    if isinstance(pt.eight_termination, Geodesic) and last_eight.length <= bound + 1e-9:
        return _report(mesh, last_eight, bound, "loop pair: figure-eight shortening",
                       traces={"pair": pt}, warnings=warnings)
    run_opts = opts or ShortenOpts(max_iters=3000)
    for idx in _sample_indices(marks, max_samples):
        it, l1, l2 = pt.pair_trace[idx]
        l3 = _join_loops(mesh, l1, l2.reversed())
        trs = tuple(shorten_closed(mesh, c, run_opts) for c in (l1, l2, l3))
        pt.sigma[it] = trs
        pt.sphere_log.append({
            "iteration": it,
            "kinds": [t.kind for t in trs],
            "lengths": [t.final.length for t in trs],
            "ends": [getattr(t.termination, "end_id", None) for t in trs],
        })
        best = _best_geodesic(trs)
        if best is not None and best.final.length <= bound + 1e-9:
            return _report(mesh, best.termination.curve, bound,
                           f"loop pair: shortening of the sub-loops at iteration {it}",
                           traces={"pair": pt, "sigma": best}, warnings=warnings)
    if use_sweep:
        # the family of spheres cannot retract: find the hang-up by min-max
        ring = sorted({v for e in mesh.ends if e.collar_faces and set(e.collar_faces) <= pair.omega1
                       for v in e.boundary})
        if ring:
            field_ = vertex_distance_field(mesh, ring)
        else:
            first = pt.sigma[min(pt.sigma)][0] if pt.sigma else None
            src = first.final.points[0] if first is not None else pair.e1.base
            field_ = distance_field(mesh, src)
        sw = sweep_minmax(mesh, field_, opts=opts)
        pt.sweep_log = sw.log
        if sw.trace is not None and sw.geodesic.length <= bound + 1e-9:
            return _report(mesh, sw.geodesic, bound, "loop pair: min-max sweep at the obstruction",
                           traces={"pair": pt, "sweep": sw.trace}, warnings=warnings)
    raise Inconsistent("every shortening of the loop pair family ended in a point or an end", pt)


# -- Berger construction ----------------------------------------------------------------

@dataclass
class BergerConstruction:
    gamma: GeodesicLoop
    omega_gamma: frozenset
    y: MeshPoint
    sigma: object  # Ray from y
    eta: GeodesicLoop
    taus: list  # tau_1, tau_2, tau_3 cut at eta (tau_3 may be tau_1)
    t_params: list  # eta parameters t_1 = 0 <= t_2 <= t_3
    T: list  # closed curves T_1, T_2, T_3
    omega_eta: frozenset = frozenset()
    s_gamma: float = 0.0
    clamped: bool = False
    degenerate: bool = False  # tau_3 = tau_1
    d_y: float = 0.0
    d_x: float = 0.0
    angles: list = field(default_factory=list)
    notes: list = field(default_factory=list)


def _vertex_neighbors(mesh, v):
    out = set()
    for f, _ in mesh.vertex_corners[v]:
        out.update(mesh.faces_l[f])
    out.discard(v)
    return out


def _direction(mesh, y, theta):
    """Face and in-face direction of the ray at polar angle ``theta`` at ``y``."""
    kind, ent = locate(mesh, y)
    if kind == "face":
        return y.face, complex(math.cos(theta), math.sin(theta))
    if kind != "vertex":
        raise ValueError("directions are only charted at vertices and face points")
    acc = 0.0
    fan = mesh.fan(ent)
    for g, i in fan:
        c = mesh.corner_l[g][i]
        if theta < acc + c or (g, i) == fan[-1]:
            L = mesh.layout_l[g]
            e = complex(L[(i + 1) % 3][0] - L[i][0], L[(i + 1) % 3][1] - L[i][1])
            rel = min(max(theta - acc, 1e-9), c - 1e-9)
            return g, e / abs(e) * complex(math.cos(rel), math.sin(rel))
        acc += c
    raise ValueError("angle outside the chart")


def _segment_candidates(mesh, y, target, ft, n_dirs, rel_tol):
    kind, v = locate(mesh, y)
    if kind == "vertex":
        total = mesh.cone_l[v]
        eps = 0.45 * min(mesh.side_lengths[f].min() for f, _ in mesh.vertex_corners[v])
        yv = mesh.vertex_point(v)
    else:
        total = 2 * math.pi
        eps = 0.2 * mesh.max_edge
        yv = y
    d_target = ft.at(y)
    out = []
    for k in range(n_dirs):
        theta = total * (k + 0.5) / n_dirs
        f, d = _direction(mesh, yv, theta)
        try:
            pts, fs, _, _, stopped = trace_straight(mesh, MeshPoint(f, bary_in(mesh, yv, f)), d, eps, face=f)
        except CurveOffMesh:
            continue
        if stopped:
            continue
        q = pts[-1]
        (gp, gf), _ = graph_path(ft, q)
        back = PolylineCurve(gp, gf).reversed()
        all_pts = list(pts) + list(back.points[1:])
        all_fs = list(fs) + list(back.faces)
        try:
            c = taut_path(mesh, all_pts[0], target, all_pts, all_fs)
        except CurveOffMesh:
            continue
        if c.length > d_target * (1 + rel_tol) + 1e-3 * mesh.mean_edge:
            continue
        _, nxt, f0 = c.segment(0)
        th, _ = angular_coordinate(mesh, c.points[0], f0, _dir_in_face(mesh, c.points[0], nxt, f0))
        out.append((th, c))
    return out, total


def _berger_segments(mesh, y, target, n_dirs=48, tol_angle=TOL_ANGLE, rel_tol=1e-2, field_=None):
    ft = distance_field(mesh, target) if field_ is None else field_
    kind, v = locate(mesh, y)
    dy = ft.at(y)
    nbrs = _vertex_neighbors(mesh, v) if kind == "vertex" else set(mesh.faces_l[y.face])
    worse = [u for u in nbrs if ft.values[u] > dy + 1e-9 * max(1.0, dy)]
    if worse:
        raise PreconditionFailed(f"y is not a local maximum of the distance ({len(worse)} larger neighbours)")
    cands, total = _segment_candidates(mesh, y, target, ft, n_dirs, rel_tol)
    cands.sort(key=lambda r: r[0])
    merged = []
    for th, c in cands:
        if merged and min(abs(th - merged[-1][0]), total - abs(th - merged[-1][0])) < 0.05:
            if c.length < merged[-1][1].length:
                merged[-1] = (th, c)
            continue
        merged.append((th, c))
    if len(merged) > 1 and total - abs(merged[-1][0] - merged[0][0]) < 0.05:
        merged.pop() if merged[-1][1].length >= merged[0][1].length else merged.pop(0)
    if len(merged) < 2:
        raise AngleGapUncovered(f"only {len(merged)} minimizing direction(s) found at y")
    angles = [th for th, _ in merged]
    gaps = [(angles[(i + 1) % len(angles)] - angles[i]) % total for i in range(len(angles))]
    if max(gaps) > math.pi + tol_angle:
        raise AngleGapUncovered(f"largest gap between minimizing directions is {max(gaps):.4f}")
    return [c for _, c in merged], angles, total


def berger_segments(mesh: SurfaceMesh, y: MeshPoint, target: MeshPoint, n_dirs: int = 48,
                    tol_angle: float = TOL_ANGLE) -> list[PolylineCurve]:
    """Minimizing segments from ``y`` to ``target`` whose directions at
    ``y`` leave no gap wider than ``pi``.

    Seeds leave ``y`` in ``n_dirs`` directions and continue along the
    distance field; each is pulled taut and kept when minimizing.
    """
    segs, _, _ = _berger_segments(mesh, y, target, n_dirs, tol_angle)
    return segs


def _choose_taus(th1, angles, total, tol_angle):
    """Indices of tau_2, tau_3 among the segments (equal when tau_3 = tau_1)."""
    best = None
    n = len(angles)
    for i in range(n):
        for j in range(i, n):
            ths = sorted({th1 % total, angles[i], angles[j]})
            gaps = [(ths[(k + 1) % len(ths)] - ths[k]) % total or total for k in range(len(ths))]
            g = max(gaps)
            key = (g > math.pi + tol_angle, i == j, g)
            if best is None or key < best[0]:
                best = (key, i, j)
    return best[1], best[2], best[0][0]


def _first_crossing(mesh, tau, eta):
    hits = crossing_params(mesh, tau, eta)
    hits = [h for h in hits if h[0] > 1e-9]
    if not hits:
        return None
    return min(hits, key=lambda h: h[0])


def berger_construction(mesh: SurfaceMesh, tau, opts: ShortenOpts | None = None, seed: int = 0,
                        ctx: ScanContext | None = None) -> BergerConstruction:
    """Loops, farthest point and segments of the one-end sweepout."""
    A = mesh.total_area
    h = math.sqrt(A / 2)
    ctx = ctx or ScanContext(mesh, tau, opts, seed)
    lo, hi = _default_range(mesh, tau, False)
    s_gamma = 6 * h
    clamped = s_gamma > hi
    notes = []
    if clamped:
        notes.append(f"tau(6 sqrt(A/2)) = tau({s_gamma:.4f}) lies past the truncation; using t = {hi:.4f}")
        s_gamma = hi
    gamma = ctx.loop_at(s_gamma).loop
    sep = cut_components(mesh, gamma.curve)
    end_side = _ref_side(mesh, gamma.curve, sep, tau.end_id)
    if end_side is None:
        raise PreconditionFailed("the loop at tau(s) does not separate the end")
    inner = "right" if end_side == "left" else "left"
    omega_g = frozenset(side_faces(mesh, sep, inner))
    fg = distance_field(mesh, gamma.base)
    cand = [v for v in range(mesh.n_vertices) if sep.side_of_vertex(v) == inner]
    if not cand:
        raise PreconditionFailed("precompact side of the loop holds no vertex")
    yv = max(cand, key=lambda v: fg.values[v])
    y = mesh.vertex_point(yv)
    d_y, d_x = fg.values[yv], fg.at(tau.base)
    sigma = geodesic_ray(mesh, y, tau.end_id)
    eta = ScanContext(mesh, sigma, opts, seed).loop_at(max(h, _default_range(mesh, sigma, False)[0])).loop
    sep_e = cut_components(mesh, eta.curve)
    e_side = _ref_side(mesh, eta.curve, sep_e, tau.end_id)
    omega_e = frozenset(side_faces(mesh, sep_e, "right" if e_side == "left" else "left")) if e_side else frozenset()
    if not omega_e < omega_g:
        notes.append("region of eta is not strictly inside the region of gamma")
    segs, angles, total = _berger_segments(mesh, y, gamma.base, field_=fg)
    tau1 = sub_curve(mesh, sigma.curve, 0.0, eta_base_s(mesh, sigma, eta))
    _, nxt, f0 = tau1.segment(0)
    th1, _ = angular_coordinate(mesh, tau1.points[0], f0, _dir_in_face(mesh, tau1.points[0], nxt, f0))
    i, j, uncovered = _choose_taus(th1, angles, total, TOL_ANGLE)
    if uncovered:
        notes.append("no choice of segments keeps every angle at y below pi")
    degenerate = i == j
    cuts = []
    for k in sorted({i, j}):
        hit = _first_crossing(mesh, segs[k], eta.curve)
        if hit is None:
            raise PreconditionFailed("a segment from y misses eta")
        cuts.append((hit[1], sub_curve(mesh, segs[k], 0.0, hit[0]), hit[2]))
    cuts.sort(key=lambda c: c[0])
    taus = [tau1] + [c[1] for c in cuts]
    ts = [0.0] + [c[0] for c in cuts]
    Le = eta.curve.length
    ec = eta.curve
    T = []
    for k in range(len(taus)):
        a, b = ts[k], (ts[k + 1] if k + 1 < len(ts) else Le)
        arc = _arc(mesh, ec, a, b) if b > a else None
        parts = [taus[k]]
        if arc is not None and arc.faces:
            parts.append(_retarget(mesh, arc, taus[k].points[-1], None))
        nxt_tau = taus[(k + 1) % len(taus)]
        parts.append(nxt_tau.reversed())
        parts = _stitch(mesh, parts)
        T.append(concatenate(mesh, parts, closed=True))
    if degenerate:
        notes.append("tau_3 = tau_1: two segments only; T_3 bounds the complement")
    return BergerConstruction(gamma, omega_g, y, sigma, eta, taus, ts, T, omega_e, s_gamma, clamped, degenerate,
                              d_y, d_x, angles, notes)


def eta_base_s(mesh, sigma, eta):
    """Arclength along ``sigma`` of the base of ``eta``."""
    f = distance_field(mesh, sigma.base, limit=math.inf)
    return f.at(eta.base)


def _retarget(mesh, c, start, end):
    pts = list(c.points)
    if start is not None:
        try:
            pts[0] = MeshPoint(c.faces[0], bary_in(mesh, start, c.faces[0]))
        except CurveOffMesh:
            pass
    if end is not None:
        try:
            pts[-1] = MeshPoint(c.faces[-1], bary_in(mesh, end, c.faces[-1]))
        except CurveOffMesh:
            pass
    out = PolylineCurve(pts, list(c.faces))
    curve_length(mesh, out)
    return out


def _stitch(mesh, parts):
    """Snap consecutive pieces onto each other's endpoints (they meet up to
    interpolation round-off)."""
    out = [parts[0]]
    for p in parts[1:]:
        out.append(_retarget(mesh, p, out[-1].points[-1], None))
    out[-1] = _retarget(mesh, out[-1], None, out[0].points[0])
    return out


# -- compactification and the cycle family ------------------------------------------------

def compactify(mesh: SurfaceMesh, end_id: int = 0) -> SurfaceMesh:
    """Cone the truncation boundary of an end to one added apex.

    Existing vertex and face ids are kept, so curves on ``mesh`` stay
    valid.  The slant length is chosen so that the cone's area matches the
    end's tail area where possible.
    """
    end = mesh.ends[end_id]
    ring = list(end.boundary)
    side_len = {}
    for e in np.flatnonzero(mesh.boundary_edge):
        (f, i), = mesh.edge_faces[e]
        u, v = mesh.faces_l[f][i], mesh.faces_l[f][(i + 1) % 3]
        side_len[(u, v)] = mesh.side_lengths[f, i]
    apex = mesh.n_vertices
    lens = []
    new_faces = []
    for k, v in enumerate(ring):
        w = ring[(k + 1) % len(ring)]
        ell = side_len.get((w, v), side_len.get((v, w)))
        lens.append(ell)
        new_faces.append((v, w, apex))
    lens = np.array(lens)
    lo = 0.5 * lens.max() * (1 + 1e-3)

    def area(a):
        return float(np.sum(0.25 * lens * np.sqrt(np.maximum(4 * a * a - lens ** 2, 0.0))))

    a = lo
    if area(lo) < end.tail_area:
        hi = lo * 2
        while area(hi) < end.tail_area:
            hi *= 2
        a = brentq(lambda s: area(s) - end.tail_area, lo, hi)
    sides = [[ell, a, a] for ell in lens]
    faces = np.vstack([mesh.faces, np.array(new_faces)])
    side_lengths = np.vstack([mesh.side_lengths, np.array(sides)])
    ends = [e for k, e in enumerate(mesh.ends) if k != end_id]
    meta = dict(mesh.meta)
    meta["apex"] = apex
    meta["apex_slant"] = a
    return SurfaceMesh(mesh.n_vertices + 1, faces, side_lengths, ends, None, meta)


def apex_point(mesh_hat: SurfaceMesh) -> MeshPoint:
    return mesh_hat.vertex_point(int(mesh_hat.meta["apex"]))


@dataclass
class CycleFamily:
    slices: list  # tuples of one or two curves
    step_labels: list
    lengths: list
    max_length: float
    max_index: int
    notes: list = field(default_factory=list)

    @property
    def closes(self) -> bool:
        first, last = self.slices[0], self.slices[-1]
        return len(first) == len(last) and all(a is b for a, b in zip(first, last))


def _snap_lengths(trace):
    return [c for c in trace.snapshots]


def build_cycle_family(mesh_hat: SurfaceMesh, berger: BergerConstruction, traces: dict,
                       n_moves: int = 8) -> CycleFamily:
    """The five-step loop of 1-cycles through ``T1 u T2``.

    ``traces`` holds the shortening traces of ``T1``, ``T2``, ``T3`` (each
    ending in a point ``q_i``) and of ``eta`` (ending in the end, i.e. the
    apex of ``mesh_hat``).
    """
    for key in ("T1", "T2", "T3", "eta"):
        if key not in traces:
            raise PreconditionFailed(f"missing trace {key}")
    for key in ("T1", "T2", "T3"):
        if not isinstance(traces[key].termination, Point):
            raise PreconditionFailed(f"{key} does not shorten to a point ({traces[key].kind})")
    if not isinstance(traces["eta"].termination, (Escape, Point)):
        raise PreconditionFailed(f"eta does not leave through the end ({traces['eta'].kind})")
    A = mesh_hat.total_area
    q = [point_curve(traces[k].termination.point) for k in ("T1", "T2", "T3")]
    et = traces["eta"].termination
    inf = point_curve(et.point if isinstance(et, Point) else apex_point(mesh_hat))
    slices, labels = [], []

    def add(sl, lab):
        slices.append(tuple(sl))
        labels.append(lab)

    # step 1: reverse shortening of T1 and T2 from (q1, q2)
    s1, s2 = _snap_lengths(traces["T1"]), _snap_lengths(traces["T2"])
    m = max(len(s1), len(s2))
    add((q[0], q[1]), "start")
    for k in range(m - 1, -1, -1):
        i1 = min(len(s1) - 1, round(k * (len(s1) - 1) / max(m - 1, 1)))
        i2 = min(len(s2) - 1, round(k * (len(s2) - 1) / max(m - 1, 1)))
        add((s1[i1], s2[i2]), "1: reverse shortening")
    tau1, tau2 = berger.taus[0], berger.taus[1]
    tau3 = berger.taus[2] if len(berger.taus) > 2 else berger.taus[0]
    eta = berger.eta.curve
    Le = eta.length
    t2 = berger.t_params[1]
    t3 = berger.t_params[2] if len(berger.t_params) > 2 else Le
    head = _arc(mesh_hat, eta, 0.0, t2)
    mid = _arc(mesh_hat, eta, t2, t3) if t3 > t2 else None
    # step 2: retract the spur -tau2 u tau2 to its foot eta(t2)
    L2 = tau2.length
    for r in np.linspace(0.0, L2, n_moves + 1):
        spur = sub_curve(mesh_hat, tau2, r, L2) if r < L2 else None
        parts = [tau1, head]
        if spur is not None and spur.faces:
            parts += [spur.reversed(), spur]
        if mid is not None and mid.faces:
            parts.append(mid)
        parts.append(tau3.reversed())
        add((concatenate(mesh_hat, _stitch(mesh_hat, [p for p in parts if p.faces]), closed=True),),
            "2: spur retraction")
    # step 3: extend eta|[t3, L] u -eta|[t3, L] from eta(t3)
    tail_len = Le - t3
    base_parts = [tau1, _arc(mesh_hat, eta, 0.0, t3)] if t3 > 0 else [tau1]
    for r in np.linspace(0.0, tail_len, n_moves + 1):
        parts = list(base_parts)
        if r > 0:
            ext = _arc(mesh_hat, eta, t3, t3 + r) if t3 + r <= Le else _arc(mesh_hat, eta, t3, Le)
            if ext.faces:
                parts += [ext, ext.reversed()]
        parts.append(tau3.reversed())
        add((concatenate(mesh_hat, _stitch(mesh_hat, [p for p in parts if p.faces]), closed=True),),
            "3: arc extension")
    # the same segments regrouped as the 2-cycle eta u -T3
    T3 = berger.T[2] if len(berger.T) > 2 else berger.T[-1]
    add((eta, T3.reversed()), "3: regroup")
    # step 4: forward shortening of eta (to the apex) and of T3 (to q3)
    se, s3 = _snap_lengths(traces["eta"]), _snap_lengths(traces["T3"])
    m = max(len(se), len(s3))
    for k in range(m):
        ie = min(len(se) - 1, round(k * (len(se) - 1) / max(m - 1, 1)))
        i3 = min(len(s3) - 1, round(k * (len(s3) - 1) / max(m - 1, 1)))
        add((se[ie], s3[i3].reversed()), "4: shortening")
    add((inf, q[2]), "4: limit")
    # step 5: move the two points back to (q1, q2) along shortest paths
    p1 = shortest_path(mesh_hat, inf.points[0], q[0].points[0])
    p2 = shortest_path(mesh_hat, q[2].points[0], q[1].points[0])
    for lam in np.linspace(0.0, 1.0, n_moves + 1)[1:-1]:
        a = point_curve(point_at_length(mesh_hat, p1, lam * p1.length))
        b = point_curve(point_at_length(mesh_hat, p2, lam * p2.length))
        add((a, b), "5: point motion")
    add((q[0], q[1]), "end")
    lengths = [math.fsum(c.length for c in sl) for sl in slices]
    imax = int(np.argmax(lengths))
    fam = CycleFamily(slices, labels, lengths, lengths[imax], imax)
    limit = 4 * math.sqrt(2 * A) + 2 * mesh_hat.max_edge
    if fam.max_length > limit:
        raise LengthBudgetExceeded(f"slice {imax} has length {fam.max_length:.4f} > {limit:.4f}", imax)
    return fam


def minmax_extract(mesh: SurfaceMesh, family: CycleFamily, n_perturb: int = 4, seed: int = 0,
                   opts: ShortenOpts | None = None):
    """Shorten the widest slice (its longest component, jittered copies and,
    for a 2-cycle, both products of its components); returns the shortest
    certified geodesic trace found and all traces."""
    rng = np.random.default_rng(seed)
    comps = [c for c in family.slices[family.max_index] if c.n_segments >= 2 and c.length > 0]
    if not comps:
        return None, []
    longest = max(comps, key=lambda c: c.length)
    seeds = [longest] + [perturb(mesh, longest, rng) for _ in range(n_perturb)]
    if len(comps) == 2:
        for rev in (False, True):
            try:
                seeds.append(loop_product(mesh, comps[0], comps[1], reverse_second=rev))
            except CurveOffMesh:
                pass
    traces = [shorten_closed(mesh, c, opts) for c in seeds]
    return _best_geodesic(traces), traces


# -- pipelines --------------------------------------------------------------------------

def _scan_shortcuts(mesh, scan, opts):
    """Closed geodesics offered directly by a scan: candidates with both
    wedges at most pi and loops that do not separate."""
    traces = []
    for s in scan.candidates:
        traces.append(shorten_closed(mesh, s.loop.curve, opts))
    for _, loop in scan.nonseparating:
        traces.append(shorten_closed(mesh, loop.curve, opts))
    return _best_geodesic(traces)


def two_end_pipeline(mesh: SurfaceMesh, opts: ShortenOpts | None = None, seed: int = 0,
                     dt: float | None = None) -> GeodesicReport:
    """Closed geodesic of length at most ``2 sqrt(2A)`` on a surface with two
    or more ends."""
    if mesh.n_ends < 2:
        raise PreconditionFailed("two_end_pipeline needs at least two ends")
    A = mesh.total_area
    bound = 2 * math.sqrt(2 * A)
    line = geodesic_line(mesh, 0, 1)
    try:
        scan = dichotomy_scan(mesh, line, dt=dt, opts=opts, seed=seed)
    except LineScanInconclusive as exc:
        raise Inconclusive(str(exc), exc.scan) from exc
    except BudgetExceeded as exc:
        raise Inconclusive(f"scan budget: {exc}") from exc
    details = {"scan": scan, "line": line}
    hit = _scan_shortcuts(mesh, scan, opts)
    if hit is not None:
        return _report(mesh, hit.termination.curve, bound, "scan: loop already a closed geodesic",
                       traces={"shortcut": hit}, details=details, warnings=list(scan.warnings))
    if not isinstance(scan.outcome, Pair):
        raise Inconclusive("line scan ended without a pair", scan)
    pair = make_loop_pair(mesh, scan.outcome)
    details["pair"] = pair
    try:
        rep = loop_pair_shorten(mesh, pair, opts)
    except Inconsistent as exc:
        raise Inconclusive(f"loop pair: {exc}", exc.dump) from exc
    rep.bound_used = bound
    rep.details.update(details)
    rep.details["pair_bound"] = pair.e1.curve.length + pair.e2.curve.length
    rep.warnings = list(scan.warnings) + rep.warnings
    return rep


def _far_vertex(mesh, end_id):
    f = vertex_distance_field(mesh, end_ring(mesh, end_id))
    return int(np.argmax(f.values))


def one_end_pipeline(mesh: SurfaceMesh, opts: ShortenOpts | None = None, seed: int = 0,
                     dt: float | None = None, base: MeshPoint | None = None) -> GeodesicReport:
    """Closed geodesic of length at most ``4 sqrt(2A)`` on a one-ended surface."""
    if mesh.n_ends != 1:
        raise PreconditionFailed("one_end_pipeline needs exactly one end")
    A = mesh.total_area
    bound1, bound2 = 4 * math.sqrt(2 * A), 2 * math.sqrt(2 * A)
    x = base if base is not None else mesh.vertex_point(_far_vertex(mesh, 0))
    tau = geodesic_ray(mesh, x, 0)
    ctx = ScanContext(mesh, tau, opts, seed)
    try:
        scan = dichotomy_scan(mesh, tau, dt=dt, opts=opts, seed=seed)
    except BudgetExceeded as exc:
        raise Inconclusive(f"scan budget: {exc}") from exc
    details = {"scan": scan, "ray": tau}
    hit = _scan_shortcuts(mesh, scan, opts)
    if hit is not None:
        return _report(mesh, hit.termination.curve, bound1, "scan: loop already a closed geodesic",
                       traces={"shortcut": hit}, details=details, warnings=list(scan.warnings))
    if isinstance(scan.outcome, Pair):
        pair = make_loop_pair(mesh, scan.outcome)
        details["pair"] = pair
        try:
            rep = loop_pair_shorten(mesh, pair, opts)
        except Inconsistent as exc:
            raise Inconclusive(f"loop pair: {exc}", exc.dump) from exc
        rep.bound_used = bound2
        rep.details.update(details)
        return rep
    # every loop is convex toward the end: sweep out the compactified surface
    berger = berger_construction(mesh, tau, opts, seed, ctx)
    details["berger"] = berger
    # the end becomes a point: shortening runs on the coned surface, where
    # curves escaping into the end contract to the apex instead
    mesh_hat = compactify(mesh, 0)
    details["mesh_hat"] = mesh_hat
    traces = {f"T{k + 1}": shorten_closed(mesh_hat, c, opts) for k, c in enumerate(berger.T)}
    if "T3" not in traces:
        traces["T3"] = traces[f"T{len(berger.T)}"]
    traces["eta"] = shorten_closed(mesh_hat, berger.eta.curve, opts)
    hit = _best_geodesic(t for t in traces.values() if _off_cap(mesh, t))
    if hit is not None:
        return _report(mesh, hit.termination.curve, bound1, "Berger construction: incidental geodesic",
                       traces=traces, details=details, warnings=list(berger.notes))
    family = build_cycle_family(mesh_hat, berger, traces)
    details["family"] = family
    best, ext = minmax_extract(mesh_hat, family, seed=seed, opts=opts)
    traces["extraction"] = ext
    best = best if best is not None and _off_cap(mesh, best) else _best_geodesic(t for t in ext if _off_cap(mesh, t))
    provenance = "min-max extraction at the widest slice"
    warnings = list(berger.notes)
    if best is None:
        # the slice components all contract; look for the hang-up with
        # figure-eights around the curved vertices instead
        seeds = eight_seeds(mesh)
        extra = [shorten_closed(mesh_hat, c, opts) for c in seeds]
        traces["extraction_eights"] = extra
        best = _best_geodesic(t for t in extra if _off_cap(mesh, t))
        if best is not None and best.termination.curve.length > family.max_length + 2 * mesh.max_edge:
            best = None
        provenance = "figure-eight search below the widest slice"
        warnings.append("max-slice seeds contracted; used figure-eight seeds")
    if best is None:
        raise Inconclusive("every max-slice shortening contracted or reached the cap", family)
    rep = _report(mesh, best.termination.curve, bound1, provenance, traces=traces, details=details,
                  warnings=warnings)
    rep.details["family_max"] = family.max_length
    return rep


def _off_cap(mesh, trace):
    """Geodesic of a coned-surface run that stays on the original mesh."""
    if trace is None or not isinstance(trace.termination, Geodesic):
        return False
    c = trace.termination.curve
    return all(f < mesh.n_faces for f in c.faces)


# -- closed surfaces ----------------------------------------------------------------------

def curvature_vertices(mesh: SurfaceMesh, k: int = 3) -> list[int]:
    """The ``k`` interior vertices with the largest angle defect."""
    defect = 2 * math.pi - mesh.cone_angle
    defect[mesh.boundary_vertex] = -np.inf
    order = np.argsort(-defect, kind="stable")
    return [int(v) for v in order[:k]]


def vertex_loop(mesh: SurfaceMesh, v: int, r: float) -> PolylineCurve | None:
    """Small level loop of the distance to vertex ``v``."""
    try:
        ls = nudged_level_set(distance_field(mesh, mesh.vertex_point(v), limit=2 * r + mesh.max_edge), r)
    except SingularLevel:
        return None
    comps = [c for c, op in zip(ls.components, ls.open_flags) if not op and c.n_segments >= 3]
    return max(comps, key=lambda c: c.length) if comps else None


def eight_seeds(mesh: SurfaceMesh, k: int = 3) -> list[PolylineCurve]:
    """Figure-eights made of small loops around pairs of the most curved vertices."""
    vs = curvature_vertices(mesh, k)
    out = []
    for a in range(len(vs)):
        for b in range(a + 1, len(vs)):
            fa = distance_field(mesh, mesh.vertex_point(vs[a]))
            r = 0.3 * fa.values[vs[b]]
            ca, cb = vertex_loop(mesh, vs[a], r), vertex_loop(mesh, vs[b], r)
            if ca is None or cb is None:
                continue
            for rev in (True, False):
                try:
                    out.append(loop_product(mesh, ca, cb, reverse_second=rev))
                except CurveOffMesh:
                    pass
    return out


def level_seeds(mesh: SurfaceMesh, sources, fractions=(0.2, 0.4, 0.6, 0.8)) -> list[PolylineCurve]:
    out = []
    for v in sources:
        f = distance_field(mesh, mesh.vertex_point(int(v)))
        for fr in fractions:
            try:
                ls = nudged_level_set(f, fr * f.max_value)
            except SingularLevel:
                continue
            out += [c for c, op in zip(ls.components, ls.open_flags) if not op and c.n_segments >= 3]
    return out


def compact_search(mesh: SurfaceMesh, opts: ShortenOpts | None = None, seed: int = 0, n_sweeps: int = 2):
    """Shortest certified geodesic over level-set seeds, figure-eight seeds
    around curved vertices and level-set min-max sweeps."""
    rng = np.random.default_rng(seed)
    srcs = curvature_vertices(mesh, 2) + [int(v) for v in rng.integers(0, mesh.n_vertices, 2)]
    seeds = eight_seeds(mesh) + level_seeds(mesh, srcs)
    traces = [shorten_closed(mesh, c, opts) for c in seeds]
    best = _best_geodesic(traces)
    provenance = "multi-seed shortening"
    sweeps = []
    for v in srcs[:n_sweeps]:
        sw = sweep_minmax(mesh, distance_field(mesh, mesh.vertex_point(v)), opts=opts)
        sweeps.append(sw)
        if sw.trace is not None and (best is None or sw.geodesic.length < best.termination.curve.length):
            best = sw.trace
            provenance = "level-set min-max sweep"
    return best, provenance, traces, sweeps


def estimate_l(mesh: SurfaceMesh, opts: ShortenOpts | None = None, seed: int = 0) -> GeodesicReport:
    """Short closed geodesic with the bound that applies to the number of ends."""
    A = mesh.total_area
    if mesh.n_ends >= 2:
        rep = two_end_pipeline(mesh, opts, seed)
    elif mesh.n_ends == 1:
        rep = one_end_pipeline(mesh, opts, seed)
    else:
        best, prov, traces, sweeps = compact_search(mesh, opts, seed)
        if best is None:
            raise Inconclusive(f"no seed of {len(traces)} and no sweep found a closed geodesic",
                               {"kinds": [t.kind for t in traces]})
        rep = _report(mesh, best.termination.curve, 4 * math.sqrt(2 * A), prov,
                      traces={"best": best}, details={"n_seeds": len(traces), "sweeps": len(sweeps)})
    if not rep.within_bound:
        rep.warnings.append(f"length {rep.length:.5f} exceeds the bound {rep.bound_used:.5f}")
    return rep
