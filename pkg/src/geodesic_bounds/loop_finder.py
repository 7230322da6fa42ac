"""Short essential curves and geodesic loops along rays and lines.

``essential_curve_through`` follows the co-area argument: among the level
sets of ``d(x, .)`` in a window around ``t0`` one is short enough, and its
component through the ray, joined to ``w`` along the ray, is a short
essential curve.  ``dichotomy_scan`` walks along a ray or a line, computes
the shortest essential loop at each sample and records the side it is
convex to.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .birkhoff import Geodesic, ShortenOpts, ShorteningTrace, shorten_fixed_point
from .curves import as_open, crossings, is_simple, perturb, rotate
from .errors import (
    AllContracted,
    BudgetExceeded,
    CurveOffMesh,
    HypothesisViolated,
    LineScanInconclusive,
    NoAdmissibleT,
    NonSeparating,
    SingularLevel,
)
from .geodesic_engine import (
    DistanceField,
    Ray,
    distance_field,
    nudged_level_set,
    point_at_length,
    shortest_path,
    sub_curve,
    vertex_distance_field,
    wedge_angles,
)
from .surface_core import MeshPoint, PolylineCurve, SurfaceMesh, concatenate, same_location
from .topology import cut_components, is_essential, point_side

log = logging.getLogger(__name__)

TOL_ANGLE = 1e-3


@dataclass
class GeodesicLoop:
    curve: PolylineCurve
    base: MeshPoint
    vertex_angles: tuple[float, float]  # (left, right) of the oriented loop
    simple: bool
    essential_wrt: str
    trace: ShorteningTrace | None = field(default=None, repr=False)

    @property
    def length(self) -> float:
        return self.curve.length


@dataclass
class ConvexityCert:
    loop: GeodesicLoop
    side: str  # "toward_base" or "toward_infinity"
    wedge_angle: float
    eps_margin: float
    closed_geodesic: bool = False  # both wedges within tol of pi or less
    ref_side: str = "left"  # side of the loop holding the orientation reference


@dataclass
class ScanSample:
    t: float
    loop: GeodesicLoop
    cert: ConvexityCert


@dataclass
class Pair:
    t0: float
    loop_minus: GeodesicLoop
    loop_plus: GeodesicLoop
    t_gap: float
    cert_minus: ConvexityCert | None = None
    cert_plus: ConvexityCert | None = None
    disjoint: bool = True


@dataclass
class AllConvexToInfinity:
    pass


@dataclass
class ScanResult:
    samples: list
    outcome: object
    candidates: list = field(default_factory=list)  # closed-geodesic candidates
    coarea_sum: float = 0.0
    dt: float = 0.0
    warnings: list = field(default_factory=list)
    nonseparating: list = field(default_factory=list)  # (t, GeodesicLoop)

    @property
    def lengths(self) -> list[float]:
        return [s.loop.length for s in self.samples]


@dataclass
class EssentialCurve:
    curve: PolylineCurve
    t: float
    t0: float
    sigma: PolylineCurve
    delta_mesh: float
    essential: dict


# -- level-set loops ------------------------------------------------------------------

def _nearest_on(mesh, comps, p):
    """Component and node index closest to ``p`` (intrinsic distance)."""
    radius = 4 * mesh.max_edge
    fp = distance_field(mesh, p, limit=radius)
    best = (math.inf, None, None)
    for ci, c in enumerate(comps):
        for j, q in enumerate(c.points):
            d = fp.at(q)
            if d < best[0]:
                best = (d, ci, j)
    if best[1] is None:
        fp = distance_field(mesh, p)
        for ci, c in enumerate(comps):
            for j, q in enumerate(c.points):
                d = fp.at(q)
                if d < best[0]:
                    best = (d, ci, j)
    return best


def loop_through(mesh: SurfaceMesh, sigma: PolylineCurve, p: MeshPoint, j: int) -> PolylineCurve:
    """Closed curve starting at ``p``: out to node ``j`` of ``sigma``, once
    around, and back."""
    s = rotate(sigma, j)
    q = s.points[0]
    if same_location(mesh, p, q, 1e-9):
        return s
    bridge = shortest_path(mesh, p, q)
    return concatenate(mesh, [bridge, as_open(s), bridge.reversed()], closed=True)


def _closed_comps(ls):
    return [c for c, op in zip(ls.components, ls.open_flags) if not op and c.n_segments >= 3]


def level_loop_at(mesh: SurfaceMesh, field_: DistanceField, tau: PolylineCurve, t: float,
                  level: float | None = None):
    """Level-set component of ``field_`` at ``level`` (default ``t``) nearest
    ``tau(t)``, as a closed curve based at ``tau(t)``; also returns the
    component."""
    ls = nudged_level_set(field_, t if level is None else level)
    comps = _closed_comps(ls)
    if not comps:
        raise SingularLevel(f"no closed level component at t={t:.6g}")
    p = point_at_length(mesh, tau, t)
    _, ci, j = _nearest_on(mesh, comps, p)
    return loop_through(mesh, comps[ci], p, j), comps[ci], ls


# -- lemma: short essential curve through w -------------------------------------------

def _as_curve(tau):
    return tau.curve if isinstance(tau, Ray) else tau


def essential_curve_report(mesh: SurfaceMesh, tau, w, x: MeshPoint | None = None, y: MeshPoint | None = None,
                           grid: int = 16, max_refine: int = 3) -> EssentialCurve:
    """Short essential curve through ``w`` with its construction details.

    ``tau`` is a minimizing segment (or ray or line) from ``x`` to ``y``;
    ``w`` is a point on it or its arclength.
    """
    tc = _as_curve(tau)
    x = tc.points[0] if x is None else x
    y = (tc.points[-1]) if y is None else y
    A = mesh.total_area
    h = math.sqrt(A / 2)
    fx = distance_field(mesh, x)
    fy = distance_field(mesh, y)
    if isinstance(w, MeshPoint):
        t0 = fx.at(w)
        wp = w
    else:
        t0 = float(w)
        wp = point_at_length(mesh, tc, t0)
    dx, dy = fx.at(wp), fy.at(wp)
    if not (dx > h and dy > h):
        raise HypothesisViolated(f"need d(x,w), d(y,w) > sqrt(A/2) = {h:.4f}; got {dx:.4f}, {dy:.4f}")
    bound = math.sqrt(2 * A)
    delta = 2 * mesh.max_edge
    lo = max(t0 - h, 1e-6)
    hi = min(t0 + h, fx.max_value, tc.length)
    tried = {}
    n = grid
    for _ in range(max_refine + 1):
        ts = [t0] + list(np.linspace(lo, hi, n + 2)[1:-1])
        for t in ts:
            t = float(t)
            key = round(t, 12)
            if key in tried:
                continue
            try:
                ls = nudged_level_set(fx, t)
            except SingularLevel:
                continue
            tried[key] = (ls.total_length, ls)
        ok = [(bound - 2 * abs(t - t0) - L, t, ls) for t, (L, ls) in tried.items()
              if L <= bound - 2 * abs(t - t0)]
        ok.sort(key=lambda r: -r[0])
        for margin, t, ls in ok:
            comps = _closed_comps(ls)
            if not comps:
                continue
            p = point_at_length(mesh, tc, t)
            _, ci, j = _nearest_on(mesh, comps, p)
            sigma = comps[ci]
            ess, info = is_essential(mesh, sigma, marked=[x, y])
            if not ess:
                continue
            head = loop_through(mesh, sigma, p, j)
            if abs(t - t0) * 1e6 < tc.length:
                gamma = rebase_curve(mesh, head, wp)
            else:
                seg = sub_curve(mesh, tc, min(t0, t), max(t0, t))
                if t < t0:
                    seg = seg.reversed()
                seg_from_w = seg
                gamma = concatenate(mesh, [seg_from_w, as_open(head), seg_from_w.reversed()], closed=True)
            return EssentialCurve(gamma, t, t0, sigma, delta, info)
        n *= 2
    raise NoAdmissibleT(f"no admissible level in ({lo:.4f}, {hi:.4f}); finest grid {n // 2} points")


def rebase_curve(mesh, curve, base):
    from .birkhoff import rebase

    try:
        return rebase(mesh, curve, base)
    except Exception:
        return curve


def essential_curve_through(mesh: SurfaceMesh, tau, w, x: MeshPoint | None = None, y: MeshPoint | None = None,
                            **kw) -> PolylineCurve:
    """Closed curve through ``w`` of length about ``sqrt(2A)`` that is
    essential in the surface punctured at ``x`` and ``y``."""
    return essential_curve_report(mesh, tau, w, x, y, **kw).curve


# -- shortest essential loop ----------------------------------------------------------

def _loop_angles(mesh, curve):
    n = curve.n_segments
    prev, at, f_in = curve.segment(n - 1)
    _, nxt, f_out = curve.segment(0)
    return wedge_angles(mesh, prev, f_in, curve.points[0], nxt, f_out)


def make_loop(mesh: SurfaceMesh, curve: PolylineCurve, essential_wrt: str = "M", trace=None) -> GeodesicLoop:
    return GeodesicLoop(curve, curve.points[0], _loop_angles(mesh, curve), is_simple(mesh, curve),
                        essential_wrt, trace)


def shortest_essential_loop(mesh: SurfaceMesh, base: MeshPoint, marked, seed_curve: PolylineCurve,
                            n_perturb: int = 2, seed: int = 0, opts: ShortenOpts | None = None,
                            extra_seeds=()) -> GeodesicLoop:
    """Shortest geodesic loop at ``base`` found by fixed-base shortening of
    the seed, a few jittered copies of it and any ``extra_seeds``."""
    marked = list(marked)
    rng = np.random.default_rng(seed)
    seeds = [seed_curve] + list(extra_seeds)
    seeds += [perturb(mesh, seed_curve, rng) for _ in range(n_perturb)]
    best = None
    n_budget = 0
    wrt = "M minus marked points" if marked else "M"
    for c in seeds:
        tr = shorten_fixed_point(mesh, c, base, opts)
        if not isinstance(tr.termination, Geodesic):
            n_budget += tr.kind == "budget"
            continue
        fin = tr.final
        ess, _ = is_essential(mesh, fin, marked=marked)
        if not ess:
            continue
        if best is None or fin.length < best.curve.length:
            best = make_loop(mesh, fin, wrt, tr)
    if best is None:
        if n_budget:
            raise BudgetExceeded(f"{n_budget} of {len(seeds)} loop seeds hit the budget")
        raise AllContracted("every seed shortened to the base point")
    return best


# -- convexity ------------------------------------------------------------------------

def _ref_side(mesh, curve, sep, ref):
    if isinstance(ref, MeshPoint):
        s = point_side(mesh, sep, curve, ref)
        return s
    end = mesh.ends[int(ref)]
    votes = {"left": 0, "right": 0}
    for v in end.boundary:
        s = sep.side_of_vertex(v)
        if s in votes:
            votes[s] += 1
    if votes["left"] == votes["right"]:
        return None
    return "left" if votes["left"] > votes["right"] else "right"


def classify_convexity(mesh: SurfaceMesh, loop: GeodesicLoop, orientation_ref, tol_angle: float = TOL_ANGLE) -> ConvexityCert:
    """Which of the two regions bounded by the loop it is convex to.

    ``orientation_ref`` (an end id or a marked point) names the
    ``toward_infinity`` side.
    """
    sep = cut_components(mesh, loop.curve)
    if not sep.separating:
        raise NonSeparating("loop does not separate; shorten it freely instead")
    rs = _ref_side(mesh, loop.curve, sep, orientation_ref)
    if rs is None:
        raise NonSeparating("orientation reference is not on either side of the loop")
    left, right = loop.vertex_angles
    w_ref = left if rs == "left" else right
    w_other = right if rs == "left" else left
    both = w_ref <= math.pi + tol_angle and w_other <= math.pi + tol_angle
    if w_ref <= math.pi + tol_angle and (not both or w_ref <= w_other):
        side, w = "toward_infinity", w_ref
    else:
        side, w = "toward_base", w_other
    return ConvexityCert(loop, side, w, math.pi - w, both, rs)


# -- scan -------------------------------------------------------------------------------

class ScanContext:
    """Loops along one ray or line, computed on demand and cached."""

    def __init__(self, mesh, tau, opts=None, seed=0):
        self.mesh = mesh
        self.tau = tau
        self.curve = tau.curve
        self.is_line = isinstance(tau.end_id, tuple)
        self.opts = opts
        self.seed = seed
        if self.is_line:
            from .geodesic_engine import end_ring

            ea, eb = tau.end_id
            self.field = vertex_distance_field(mesh, end_ring(mesh, ea))
            self.ref = eb
            self.marked = []
        else:
            self.field = distance_field(mesh, tau.base)
            self.ref = tau.end_id
            self.marked = [tau.base]
            from .geodesic_engine import end_ring

            self.end_field = vertex_distance_field(mesh, end_ring(mesh, tau.end_id))
        self.cache = {}
        self.nonseparating = []  # loops that failed the separation test

    def loop_at(self, t):
        key = round(t, 12)
        if key in self.cache:
            return self.cache[key]
        mesh = self.mesh
        seed_curve, _, _ = level_loop_at(mesh, self.field, self.curve, t)
        base = seed_curve.points[0]
        extra = []
        if not self.is_line:
            # loops around the base point and around the end need not be
            # connected by shortening; seed from both sides
            try:
                lvl = self.end_field.at(base)
                c, _, _ = level_loop_at(mesh, self.end_field, self.curve, t, level=lvl)
                extra.append(rebase_curve(mesh, c, base))
            except (SingularLevel, CurveOffMesh):
                pass
        loop = shortest_essential_loop(mesh, base, self.marked, seed_curve, seed=self.seed, opts=self.opts,
                                       n_perturb=1, extra_seeds=extra)
        try:
            cert = classify_convexity(mesh, loop, self.ref)
        except NonSeparating:
            self.nonseparating.append((t, loop))
            raise
        s = ScanSample(t, loop, cert)
        self.cache[key] = s
        return s

    def rebased_loop(self, loop, t_from, t0):
        """Seed through ``tau(t0)`` made of the loop at ``tau(t_from)`` and the
        piece of ``tau`` between them; re-shortened with the new base."""
        mesh = self.mesh
        seg = sub_curve(mesh, self.curve, min(t0, t_from), max(t0, t_from))
        if t_from < t0:
            seg = seg.reversed()
        base = point_at_length(mesh, self.curve, t0)
        if seg.faces:
            base = seg.points[0]
            seed = concatenate(mesh, [seg, as_open(loop.curve), seg.reversed()], closed=True)
        else:
            seed = loop.curve
        return shortest_essential_loop(mesh, base, self.marked, seed, seed=self.seed, opts=self.opts, n_perturb=0)


def _default_range(mesh, tau, is_line):
    c = tau.curve
    L = c.length
    collar = set()
    for e in mesh.ends:
        collar |= set(e.collar_faces)
    # keep samples off the truncation collars
    from .surface_core import segment_lengths

    lens = segment_lengths(mesh, c)
    acc, first, last = 0.0, None, None
    for k, ln in enumerate(lens):
        if c.faces[k] not in collar:
            if first is None:
                first = acc
            last = acc + ln
        acc += ln
    first = 0.0 if first is None else first
    last = L if last is None else last
    pad = mesh.max_edge
    lo = first + pad if is_line else max(math.sqrt(mesh.total_area / 2), first + pad)
    return lo, last - pad


def dichotomy_scan(mesh: SurfaceMesh, tau: Ray, t_range=None, dt: float | None = None, tol_t: float | None = None,
                   opts: ShortenOpts | None = None, seed: int = 0, stop_on_candidate: bool = False) -> ScanResult:
    """Shortest essential loops along ``tau`` and the side each is convex to.

    Returns ``Pair`` at the first side change (refined by bisection to
    ``tol_t``), otherwise ``AllConvexToInfinity`` for a ray.  A line scan
    with no side change raises ``LineScanInconclusive`` unless a
    closed-geodesic candidate turned up.
    """
    sa = math.sqrt(mesh.total_area)
    dt = 0.05 * sa if dt is None else dt
    tol_t = 1e-3 * sa if tol_t is None else tol_t
    ctx = ScanContext(mesh, tau, opts, seed)
    lo, hi = _default_range(mesh, tau, ctx.is_line) if t_range is None else t_range
    if not ctx.is_line and lo < math.sqrt(mesh.total_area / 2) - 1e-12:
        raise HypothesisViolated(f"ray scans start at sqrt(A/2) = {math.sqrt(mesh.total_area / 2):.4f}")
    if hi <= lo:
        raise ValueError(f"empty scan range ({lo:.4f}, {hi:.4f})")
    n = max(2, int(math.floor((hi - lo) / dt)) + 1)
    ts = [lo + i * dt for i in range(n)]
    samples, candidates, warnings = [], [], []
    outcome = None
    prev = None
    for t in ts:
        try:
            s = ctx.loop_at(t)
        except (AllContracted, BudgetExceeded, NonSeparating, SingularLevel) as exc:
            warnings.append(f"t={t:.5f}: {type(exc).__name__}: {exc}")
            continue
        samples.append(s)
        if s.cert.closed_geodesic:
            candidates.append(s)
            if stop_on_candidate:
                break
        if prev is not None and s.cert.side != prev.cert.side and not (s.cert.closed_geodesic or prev.cert.closed_geodesic):
            outcome = _bisect(ctx, prev, s, tol_t, warnings)
            break
        if not s.cert.closed_geodesic:
            prev = s
    coarea = math.fsum(s.loop.length for s in samples) * dt
    _check_monotone(samples, warnings)
    if outcome is None:
        sides = {s.cert.side for s in samples if not s.cert.closed_geodesic}
        if not ctx.is_line and sides <= {"toward_infinity"}:
            outcome = AllConvexToInfinity()
        elif not candidates:
            res = ScanResult(samples, None, candidates, coarea, dt, warnings, ctx.nonseparating)
            if not ctx.nonseparating:
                raise LineScanInconclusive("no side change along the scan", res)
            return res
    return ScanResult(samples, outcome, candidates, coarea, dt, warnings, ctx.nonseparating)


def _bisect(ctx, a, b, tol_t, warnings):
    while b.t - a.t > tol_t:
        mid = 0.5 * (a.t + b.t)
        try:
            m = ctx.loop_at(mid)
        except (AllContracted, BudgetExceeded, NonSeparating, SingularLevel) as exc:
            warnings.append(f"bisection t={mid:.5f}: {type(exc).__name__}")
            break
        if m.cert.closed_geodesic:
            break
        if m.cert.side == a.cert.side:
            a = m
        else:
            b = m
    t0 = 0.5 * (a.t + b.t)
    minus, plus = (a, b) if a.cert.side == "toward_base" else (b, a)
    lm, lp = minus.loop, plus.loop
    cm, cp = minus.cert, plus.cert
    try:
        lm2 = ctx.rebased_loop(minus.loop, minus.t, t0)
        lp2 = ctx.rebased_loop(plus.loop, plus.t, t0)
        cm2 = classify_convexity(ctx.mesh, lm2, ctx.ref)
        cp2 = classify_convexity(ctx.mesh, lp2, ctx.ref)
        if cm2.side == "toward_base" and cp2.side == "toward_infinity":
            lm, lp, cm, cp = lm2, lp2, cm2, cp2
        else:
            warnings.append("re-based loops changed sides; keeping the flanking loops")
    except Exception as exc:  # noqa: BLE001 - reported, flanking loops kept
        warnings.append(f"re-basing failed: {type(exc).__name__}: {exc}")
    disjoint = _only_base(ctx.mesh, lm, lp)
    return Pair(t0, lm, lp, abs(b.t - a.t), cm, cp, disjoint)


def _only_base(mesh, l1, l2):
    if not same_location(mesh, l1.base, l2.base, 1e-9):
        return not crossings(mesh, l1.curve, l2.curve)
    return not crossings(mesh, l1.curve, l2.curve, ignore=[l1.base])


def _check_monotone(samples, warnings):
    run = []
    for s in samples + [None]:
        if s is not None and s.cert.side == "toward_base" and not s.cert.closed_geodesic:
            run.append(s)
            continue
        for a, b in zip(run, run[1:]):
            if b.loop.length < a.loop.length * 0.98:
                msg = f"loop length drops from {a.loop.length:.4f} to {b.loop.length:.4f} on a toward_base run"
                warnings.append(msg)
                log.warning("mesh resolution: %s", msg)
        run = []


def write_scan_csv(path, result: ScanResult) -> None:
    """Rows ``t, length, side, wedge_angle, base_face``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "length", "side", "wedge_angle", "base_face"])
        for s in result.samples:
            w.writerow([repr(s.t), repr(s.loop.length), s.cert.side, repr(s.cert.wedge_angle), s.loop.base.face])
