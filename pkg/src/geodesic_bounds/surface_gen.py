"""Benchmark surfaces: Calabi-Croke pillows (optionally cusped), surfaces of
revolution with cusped ends, and closed baselines (round sphere, flat torus,
flat cylinder)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, optimize

from .errors import InfiniteArea, NonPositiveProfile, TooManyCusps
from .surface_core import SurfaceMesh, build_mesh

COLLAR_FRACTION = 0.05  # truncation where the cross-section drops below 0.05*sqrt(A)


@dataclass
class SurfaceSpec:
    kind: str
    params: dict = field(default_factory=dict)
    cusps: list = field(default_factory=list)
    refinement: int = 3

    def __post_init__(self):
        if self.kind not in ("calabi_croke", "revolution", "sphere", "flat_torus", "flat_cylinder"):
            raise ValueError(f"unknown surface kind {self.kind!r}")
        if self.refinement < 1:
            raise ValueError("refinement must be >= 1")
        for k, v in self.params.items():
            if isinstance(v, (int, float)) and not isinstance(v, bool) and v <= 0 and k not in ("x0", "x1"):
                raise ValueError(f"parameter {k} must be positive")


def generate(spec: SurfaceSpec) -> SurfaceMesh:
    p = spec.params
    if spec.kind == "calabi_croke":
        return gen_calabi_croke(p.get("h", 1.0), spec.cusps, spec.refinement)
    if spec.kind == "revolution":
        name = p.get("profile", "lorentzian")
        prof = PROFILES[name]
        return gen_revolution(prof["r"], prof["domain"], spec.refinement, dr=prof.get("dr"),
                              cap=prof.get("cap"), name=name)
    return gen_baseline(spec.kind, p, spec.refinement)


# -- Calabi-Croke --------------------------------------------------------------

def gen_calabi_croke(h: float = 1.0, cusps=(), refinement: int = 4, tail_area: float | None = None) -> SurfaceMesh:
    """Two congruent equilateral triangles of height ``h`` glued along their
    boundary, each split into ``4**refinement`` sub-triangles.

    ``cusps`` lists corners (0, 1 or 2, or dicts ``{"vertex": i,
    "tail_area": a}``) that get a thin exponential funnel instead of the
    cone point.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    if refinement < 2:
        # with two steps per side the three corner flips share the middle face
        raise ValueError("Calabi-Croke meshes need refinement >= 2")
    cusps = [c if isinstance(c, dict) else {"vertex": int(c)} for c in (cusps or [])]
    if len(cusps) > 3:
        raise TooManyCusps("at most three corners can carry a cusp")
    if len({c["vertex"] for c in cusps}) != len(cusps):
        raise ValueError("duplicate cusp corner")
    n = 2 ** refinement
    kc = max(2, n // 8) if cusps else 0
    if cusps and n < 2 * kc + 2:
        raise ValueError("refinement too coarse for cusps")
    s = 2 * h / math.sqrt(3)
    corner_xy = np.array([[0.0, 0.0], [s, 0.0], [s / 2, h]])  # B, C, A

    def xy(i, j):
        return corner_xy[0] + (i / n) * (corner_xy[1] - corner_xy[0]) + (j / n) * (corner_xy[2] - corner_xy[0])

    def lam(i, j):
        return (n - i - j, i, j)  # weights of corners 0, 1, 2

    removed_corners = {c["vertex"] for c in cusps}

    def keep_vertex(i, j):
        return all(lam(i, j)[c] <= n - kc for c in removed_corners)

    index: dict = {}
    pos2d: list = []

    def vid(sheet, i, j):
        on_seam = i == 0 or j == 0 or i + j == n
        key = (0 if on_seam else sheet, i, j)
        if key not in index:
            index[key] = len(pos2d)
            pos2d.append(xy(i, j))
        return index[key]

    tris = []
    for sheet in (0, 1):
        for j in range(n):
            for i in range(n - j):
                cand = [((i, j), (i + 1, j), (i, j + 1))]
                if i + j + 2 <= n:
                    cand.append(((i + 1, j), (i + 1, j + 1), (i, j + 1)))
                for tri in cand:
                    if not all(keep_vertex(*v) for v in tri):
                        continue
                    # drop faces touching the removed corner region entirely
                    if any(min(lam(*v)[c] for v in tri) >= n - kc for c in removed_corners):
                        continue
                    ids = [vid(sheet, *v) for v in tri]
                    tris.append(ids if sheet == 0 else ids[::-1])
    # the two corner triangles of a cone point share all three vertices; flip
    # the edge opposite the corner in the second sheet to avoid a double edge
    for c, (p_, q_) in enumerate((((1, 0), (0, 1)), ((n - 1, 0), (n - 1, 1)), ((0, n - 1), (1, n - 1)))):
        if c not in removed_corners:
            _flip_edge(tris, vid(1, *p_), vid(1, *q_), sheet_faces=range(len(tris) // 2, len(tris)))
    lengths = {}
    for t in tris:
        for a, b in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
            lengths[(min(a, b), max(a, b))] = float(np.linalg.norm(pos2d[a] - pos2d[b]))
    nv = len(pos2d)
    area0 = 2 * h * h / math.sqrt(3)
    end_spec = []
    a_edge = s / n
    for c in cusps:
        corner = c["vertex"]
        ring = _cc_ring(n, kc, corner, vid)
        tail = c.get("tail_area", tail_area if tail_area is not None else 0.005 * h * h)
        eps = COLLAR_FRACTION * math.sqrt(area0)
        nv, new_tris, new_len, boundary = _attach_funnel(nv, ring, a_edge, tail, eps)
        tris.extend(new_tris)
        lengths.update(new_len)
        end_spec.append({"tail_area": tail, "collar_depth": 2, "boundary": boundary[0]})
    mesh = build_mesh(nv, tris, end_spec, edge_lengths=lengths,
                      meta={"kind": "calabi_croke", "h": h, "refinement": refinement,
                            "cusps": [c["vertex"] for c in cusps]})
    mesh.meta["corner_vertices"] = [index.get((0, 0, 0)), index.get((0, n, 0)), index.get((0, 0, n))]
    mesh.meta["grid"] = {"n": n, "index": {f"{k[0]},{k[1]},{k[2]}": v for k, v in index.items()}}
    return mesh


def altitude_loop(mesh: SurfaceMesh, corner: int = 2):
    """Closed curve down the altitude from ``corner`` on one sheet and back
    up on the other; its length is ``2h``."""
    from .geodesic_engine import shortest_path
    from .surface_core import concatenate

    grid = mesh.meta.get("grid")
    if grid is None or corner in mesh.meta.get("cusps", []):
        raise ValueError("altitude loops need an uncusped Calabi-Croke corner")
    n = grid["n"]
    if corner == 0:
        path = [(t, t) for t in range(n // 2 + 1)]
    elif corner == 1:
        path = [(n - 2 * t, t) for t in range(n // 2 + 1)]
    else:
        path = [((n - j) // 2, j) for j in range(n, -1, -2)]

    def vid(sheet, i, j):
        idx = grid["index"]
        return idx.get(f"{sheet},{i},{j}", idx.get(f"0,{i},{j}"))

    down = [vid(0, i, j) for i, j in path]
    up = [vid(1, i, j) for i, j in path[::-1]]
    verts = down + up[1:-1]
    pts = [mesh.vertex_point(v) for v in verts]
    parts = [shortest_path(mesh, pts[k], pts[(k + 1) % len(pts)]) for k in range(len(pts))]
    return concatenate(mesh, parts, closed=True)


def _flip_edge(tris, a, b, sheet_faces):
    idx = [k for k in sheet_faces if a in tris[k] and b in tris[k]]
    if len(idx) != 2:
        raise ValueError("edge to flip is not interior to one sheet")
    f1, f2 = idx
    x = next(v for v in tris[f1] if v not in (a, b))
    y = next(v for v in tris[f2] if v not in (a, b))
    tris[f1] = [x, a, y]
    tris[f2] = [y, b, x]


def _cc_ring(n, kc, corner, vid):
    """Boundary loop left after cutting corner ``corner``: sheet 0 then sheet 1."""
    m = n - kc
    if corner == 0:
        path = [(kc - t, t) for t in range(kc + 1)]  # from (kc,0) to (0,kc)
    elif corner == 1:
        path = [(m, t) for t in range(kc + 1)]  # lam1 = i = m
    else:
        path = [(t, m) for t in range(kc + 1)]
    front = [vid(0, i, j) for i, j in path]
    back = [vid(1, i, j) for i, j in path[::-1]]
    return front + back[1:-1]


def _attach_funnel(nv, ring, side, tail_area, eps):
    """Exponential tube glued to ``ring`` (a loop of equal sides ``side``)."""
    m = len(ring)
    c0 = m * side
    lam_ = tail_area / eps
    R0 = side / (2 * math.sin(math.pi / m))
    rings = [list(ring)]
    radii = [R0]
    zs = [0.0]
    c = c0
    z = 0.0
    while c > eps:
        dz = 0.9 * c / m
        z += dz
        c = c0 * math.exp(-z / lam_)
        radii.append(c / (2 * m * math.sin(math.pi / m)))
        zs.append(z)
        rings.append(list(range(nv, nv + m)))
        nv += m
    # at least two bands so the collar sits on the tube
    while len(rings) < 4:
        z += 0.9 * c / m
        c = c0 * math.exp(-z / lam_)
        radii.append(c / (2 * m * math.sin(math.pi / m)))
        zs.append(z)
        rings.append(list(range(nv, nv + m)))
        nv += m
    pos = {}
    for k, rg in enumerate(rings):
        off = 0.5 * k * 2 * math.pi / m
        for t, v in enumerate(rg):
            th = 2 * math.pi * t / m + off
            pos[v] = np.array([radii[k] * math.cos(th), radii[k] * math.sin(th), zs[k]])
    tris = []
    for k in range(len(rings) - 1):
        A, B = rings[k], rings[k + 1]
        for t in range(m):
            tris.append([A[t], A[(t + 1) % m], B[t]])
            tris.append([A[(t + 1) % m], B[(t + 1) % m], B[t]])
    lengths = {}
    for t in tris:
        for a, b in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
            key = (min(a, b), max(a, b))
            if a in ring and b in ring:
                continue  # ring sides keep the pillow metric
            lengths[key] = float(np.linalg.norm(pos[a] - pos[b]))
    return nv, tris, lengths, rings[-1]


# -- surfaces of revolution ------------------------------------------------------

def lorentzian(x):
    return 1.0 / (1.0 + x * x)


def lorentzian_dr(x):
    return -2.0 * x / (1.0 + x * x) ** 2


def capped_gaussian(x):
    """Unit hemisphere-like cap for x in [0, 1], Gaussian funnel after."""
    if x <= 1.0:
        return math.sqrt(max(0.0, 1.0 - (1.0 - x) ** 2))
    return math.exp(-((x - 1.0) ** 2))


def capped_gaussian_dr(x):
    if x <= 1.0:
        r = math.sqrt(max(1e-300, 1.0 - (1.0 - x) ** 2))
        return (1.0 - x) / r
    return -2.0 * (x - 1.0) * math.exp(-((x - 1.0) ** 2))


def exp_profile(x):
    return math.exp(-x)


PROFILES = {
    "lorentzian": {"r": lorentzian, "dr": lorentzian_dr, "domain": (-math.inf, math.inf)},
    "capped_gaussian": {"r": capped_gaussian, "dr": capped_gaussian_dr, "domain": (0.0, math.inf)},
    "exp_hemisphere": {"r": exp_profile, "dr": lambda x: -math.exp(-x), "domain": (0.0, math.inf),
                       "cap": "hemisphere"},
}


def _deriv(r, dr):
    if dr is not None:
        return dr
    return lambda x: (r(x + 1e-6) - r(x - 1e-6)) / 2e-6


def revolution_area(r, domain, dr=None, cap=None) -> float:
    """2*pi * integral of r*sqrt(1 + r'^2) by adaptive quadrature."""
    d = _deriv(r, dr)
    f = lambda x: 2 * math.pi * r(x) * math.sqrt(1 + d(x) ** 2)
    a, b = domain
    total = 0.0
    pieces = []
    if math.isinf(a) and math.isinf(b):
        pieces = [(-math.inf, 0.0), (0.0, math.inf)]
    else:
        pieces = [(a, b)]
    for lo, hi in pieces:
        val, err = _quad_checked(f, lo, hi)
        total += val
    if cap == "hemisphere":
        total += 2 * math.pi * r(a) ** 2
    return total


def _quad_checked(f, lo, hi):
    with np.errstate(all="ignore"):
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            val, err = integrate.quad(f, lo, hi, limit=400)
    if not math.isfinite(val) or err > 1e-6 * max(1.0, abs(val)) + 1e-8:
        raise InfiniteArea(f"area integral does not converge (value {val}, error {err})")
    # divergence check: successive decades of an unbounded side must shrink
    for far in ([hi] if math.isinf(hi) else []) + ([lo] if math.isinf(lo) else []):
        sign = 1.0 if far > 0 else -1.0
        slab = lambda u, v: abs(integrate.quad(f, min(sign * u, sign * v), max(sign * u, sign * v), limit=200)[0])
        s1, s2 = slab(1e2, 1e3), slab(1e3, 1e4)
        if s2 > 1e-9 * max(1.0, abs(val)) and s2 > 0.5 * s1:
            raise InfiniteArea("profile tail carries non-vanishing area")
    return val, err


def gen_revolution(r: Callable[[float], float], domain=(-math.inf, math.inf), refinement: int = 3,
                   dr=None, cap=None, name=None) -> SurfaceMesh:
    """Mesh of the surface swept by the profile ``r`` around the x axis.

    Unbounded sides of ``domain`` become cusp ends truncated where the
    circumference drops below ``0.05*sqrt(A)``.  A finite side must either
    have ``r = 0`` there (a pole) or be closed off with ``cap="hemisphere"``.
    """
    a, b = domain
    probe = [x for x in np.linspace(max(a, -50), min(b, 50), 401)]
    vals = [r(x) for x in probe if x not in (a, b) or not math.isfinite(x)]
    if min(vals) <= 0 and not any(math.isfinite(e) for e in domain):
        raise NonPositiveProfile("profile must be positive")
    if any(v < 0 for v in vals):
        raise NonPositiveProfile("profile must be nonnegative")
    d = _deriv(r, dr)
    A = revolution_area(r, domain, dr, cap)
    eps = COLLAR_FRACTION * math.sqrt(A)
    n_ends = sum(math.isinf(e) for e in domain)
    # truncation points
    lo, hi = a, b
    rmax = max(vals)
    if math.isinf(b):
        x = max(probe[int(np.argmax(vals))], 0.0 if math.isinf(a) else a)
        hi = optimize.brentq(lambda t: 2 * math.pi * r(t) - eps, x, _far(r, x, eps, +1))
    if math.isinf(a):
        x = min(probe[int(np.argmax(vals))], 0.0)
        lo = optimize.brentq(lambda t: 2 * math.pi * r(t) - eps, _far(r, x, eps, -1), x)
    tails = []
    f = lambda x: 2 * math.pi * r(x) * math.sqrt(1 + d(x) ** 2)
    if math.isinf(a):
        tails.append(("lo", integrate.quad(f, -math.inf, lo, limit=400)[0]))
    if math.isinf(b):
        tails.append(("hi", integrate.quad(f, hi, math.inf, limit=400)[0]))
    m_max = 8 * 2 ** refinement
    hstep = 2 * math.pi * rmax / m_max
    # meridian arclength parametrisation
    xs = _ring_positions(r, d, lo, hi, hstep, symmetric=(a == -b) and cap is None)
    pole_lo = math.isfinite(a) and cap is None and r(a) <= 1e-12
    pole_hi = math.isfinite(b) and r(b) <= 1e-12
    coords = []
    rings = []
    offsets = []
    if cap == "hemisphere":
        r0 = r(a)
        # hemisphere of radius r0 before x = a, parametrised by polar angle
        nphi = max(2, int(math.ceil(0.5 * math.pi * r0 / hstep)))
        cap_x = [a - r0 * math.cos(0.5 * math.pi * k / nphi) for k in range(nphi)]
        xs = cap_x + [x for x in xs if x >= a - 1e-12]
        radius_at = lambda x: math.sqrt(max(0.0, r0 * r0 - (x - a) ** 2)) if x < a else r(x)
        pole_lo = True
    else:
        radius_at = r
    for k, x in enumerate(xs):
        rad = radius_at(x)
        if rad <= 1e-12:
            rings.append([len(coords)])
            coords.append([x, 0.0, 0.0])
            offsets.append(0.0)
            continue
        m = int(min(m_max, max(12, round(2 * math.pi * rad / hstep))))
        off = (0.5 if k % 2 else -0.5) * math.pi / m
        rad *= (math.pi / m) / math.sin(math.pi / m)  # polygon perimeter = 2*pi*r
        ids = []
        for t in range(m):
            th = 2 * math.pi * t / m + off
            ids.append(len(coords))
            coords.append([x, rad * math.cos(th), rad * math.sin(th)])
        rings.append(ids)
        offsets.append(off)
    tris = []
    for k in range(len(rings) - 1):
        tris.extend(_zip_rings(rings[k], rings[k + 1], offsets[k], offsets[k + 1]))
    end_spec = []
    for side, tail in tails:
        ring = rings[0] if side == "lo" else rings[-1]
        end_spec.append({"tail_area": tail, "collar_depth": 2, "boundary": ring[0]})
    meta = {"kind": "revolution", "profile": name, "area_quadrature": A, "x_range": (lo, hi),
            "refinement": refinement, "ring_x": xs}
    mesh = build_mesh(np.array(coords), tris, end_spec, meta=meta)
    mesh.meta["rings"] = rings
    return mesh


def _far(r, x, eps, sign):
    t = x
    step = 1.0
    for _ in range(200):
        t += sign * step
        if 2 * math.pi * r(t) < eps:
            return t
        step *= 1.5
    raise InfiniteArea("cross-section never drops below the collar threshold")


def _ring_positions(r, d, lo, hi, hstep, symmetric):
    """x values of rings spaced in meridian arclength by roughly
    ``min(hstep, local circumference / 12)``, never below ``0.2 * hstep``."""
    if symmetric and lo < 0 < hi:
        right = _march(r, 0.0, hi, hstep, half_first=True)
        left = [-x for x in right[::-1]]
        if lo != -hi:
            left[0] = lo
        return left + right
    return _march(r, lo, hi, hstep)


def _march(r, lo, hi, hstep, half_first=False):
    xf = np.linspace(lo, hi, 20001)
    rf = np.array([r(x) for x in xf])
    sf = np.concatenate([[0.0], np.cumsum(np.hypot(np.diff(xf), np.diff(rf)))])
    total = sf[-1]

    def ds_at(sv):
        rad = float(np.interp(sv, sf, rf))
        return max(min(hstep, 0.9 * 2 * math.pi * rad / 12), 0.2 * hstep)

    ss = [0.5 * ds_at(0.0)] if half_first else [0.0]
    while ss[-1] < total:
        ss.append(ss[-1] + ds_at(ss[-1]))
    ss[-1] = total
    if len(ss) > 2 and ss[-1] - ss[-2] < 0.3 * ds_at(ss[-2]):
        ss.pop(-2)
    xs = [float(np.interp(sv, sf, xf)) for sv in ss]
    xs[-1] = hi
    if not half_first:
        xs[0] = lo
    return xs


def _zip_rings(A, B, offA, offB):
    """Triangulate the band between two rings (possibly different sizes)."""
    if len(A) == 1 or len(B) == 1:
        if len(A) == 1:
            c = A[0]
            return [[c, B[(t + 1) % len(B)], B[t]] for t in range(len(B))]
        c = B[0]
        return [[A[t], A[(t + 1) % len(A)], c] for t in range(len(A))]
    ma, mb = len(A), len(B)
    angA = [(2 * math.pi * t / ma + offA) for t in range(ma)]
    angB = [(2 * math.pi * t / mb + offB) for t in range(mb)]
    # start B at the vertex angularly closest to A[0]
    j0 = min(range(mb), key=lambda j: abs(((angB[j] - angA[0] + math.pi) % (2 * math.pi)) - math.pi))
    i = j = 0
    tris = []
    base_a = angA[0]
    unwrap = lambda ang: (ang - base_a) % (2 * math.pi)
    while i < ma or j < mb:
        a_cur, a_nxt = A[i % ma], A[(i + 1) % ma]
        b_cur, b_nxt = B[(j0 + j) % mb], B[(j0 + j + 1) % mb]
        na = unwrap(angA[(i + 1) % ma]) if i + 1 < ma else 2 * math.pi
        nb = _unwrap_b(angB, j0, j, mb, base_a) if j < mb else math.inf
        if j >= mb or (i < ma and na <= nb):
            tris.append([a_cur, a_nxt, b_cur])
            i += 1
        else:
            tris.append([a_cur, b_nxt, b_cur])
            j += 1
    return tris


def _unwrap_b(angB, j0, j, mb, base_a):
    # angle of B[j0 + j + 1] measured monotonically from A[0]
    a0 = (angB[j0 % mb] - base_a + math.pi) % (2 * math.pi) - math.pi
    return a0 + 2 * math.pi * (j + 1) / mb


# -- baselines -------------------------------------------------------------------

def gen_baseline(kind: str, params: dict | None = None, refinement: int = 3) -> SurfaceMesh:
    params = dict(params or {})
    if kind == "sphere":
        base = params.get("base", "uv")
        return sphere(params.get("radius", 1.0), refinement, base)
    if kind == "flat_torus":
        return flat_torus(params.get("a", 1.0), params.get("b", 2.0), refinement)
    if kind == "flat_cylinder":
        return flat_cylinder(params.get("circumference", 0.5), params.get("length", 10.0), refinement,
                             params.get("tail_area", 0.0))
    raise ValueError(f"unknown baseline {kind!r}")


def sphere(radius: float = 1.0, level: int = 3, base: str = "uv") -> SurfaceMesh:
    """Round sphere.  ``base="uv"`` (default) stacks staggered latitude
    rings symmetric about the equator, so the equatorial belt is flat and
    carries exact closed geodesics; ``"icosahedron"`` and ``"octahedron"``
    give projected subdivisions."""
    if base == "uv":
        R = float(radius)
        prof = lambda x: math.sqrt(max(0.0, R * R - x * x))
        dprof = lambda x: -x / math.sqrt(max(1e-300, R * R - x * x))
        m = gen_revolution(prof, (-R, R), level, dr=dprof, name="sphere")
        m.meta.update({"kind": "sphere", "radius": R, "base": "uv"})
        return m
    if base == "icosahedron":
        t = (1 + math.sqrt(5)) / 2
        V = [[-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0], [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
             [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1]]
        F = [[0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11], [1, 5, 9], [5, 11, 4], [11, 10, 2],
             [10, 7, 6], [7, 1, 8], [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9], [4, 9, 5],
             [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]]
    elif base == "octahedron":
        V = [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]]
        F = [[0, 2, 4], [2, 1, 4], [1, 3, 4], [3, 0, 4], [2, 0, 5], [1, 2, 5], [3, 1, 5], [0, 3, 5]]
    else:
        raise ValueError(f"unknown sphere base {base!r}")
    V = [np.array(v, dtype=float) / np.linalg.norm(v) for v in V]
    for _ in range(level):
        cache = {}

        def mid(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = V[a] + V[b]
                V.append(m / np.linalg.norm(m))
                cache[key] = len(V) - 1
            return cache[key]

        NF = []
        for a, b, c in F:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            NF += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        F = NF
    coords = radius * np.array(V)
    return build_mesh(coords, F, (), meta={"kind": "sphere", "radius": radius, "refinement": level, "base": base})


def flat_torus(a: float = 1.0, b: float = 2.0, refinement: int = 3) -> SurfaceMesh:
    """Rectangle a x b with opposite sides identified, split into a grid."""
    cells = 4 * 2 ** (refinement - 1)
    nx = max(3, int(round(cells * a / min(a, b))))
    ny = max(3, int(round(cells * b / min(a, b))))
    dx, dy = a / nx, b / ny
    vid = lambda i, j: (i % nx) + nx * (j % ny)
    tris = []
    lengths = {}
    for j in range(ny):
        for i in range(nx):
            v00, v10, v01, v11 = vid(i, j), vid(i + 1, j), vid(i, j + 1), vid(i + 1, j + 1)
            tris.append([v00, v10, v11])
            tris.append([v00, v11, v01])
            for u, v, L in ((v00, v10, dx), (v00, v01, dy), (v00, v11, math.hypot(dx, dy)),
                            (v10, v11, dy), (v01, v11, dx)):
                lengths[(min(u, v), max(u, v))] = L
    mesh = build_mesh(nx * ny, tris, (), edge_lengths=lengths,
                      meta={"kind": "flat_torus", "a": a, "b": b, "nx": nx, "ny": ny, "refinement": refinement})
    return mesh


def flat_cylinder(circumference: float = 0.5, length: float = 10.0, refinement: int = 3,
                  tail_area: float = 0.0) -> SurfaceMesh:
    """Flat cylinder with two boundary rims treated as (zero-tail) ends."""
    m = max(6, 4 * 2 ** (refinement - 1))
    dx = circumference / m
    nz = max(4, int(round(length / dx)))
    dz = length / nz
    vid = lambda i, k: (i % m) + m * k
    tris = []
    lengths = {}
    for k in range(nz):
        for i in range(m):
            v00, v10, v01, v11 = vid(i, k), vid(i + 1, k), vid(i, k + 1), vid(i + 1, k + 1)
            tris.append([v00, v10, v11])
            tris.append([v00, v11, v01])
            for u, v, L in ((v00, v10, dx), (v00, v01, dz), (v00, v11, math.hypot(dx, dz)),
                            (v10, v11, dz), (v01, v11, dx)):
                lengths[(min(u, v), max(u, v))] = L
    ends = [{"tail_area": tail_area, "collar_depth": 1, "boundary": vid(0, 0)},
            {"tail_area": tail_area, "collar_depth": 1, "boundary": vid(0, nz)}]
    return build_mesh(m * (nz + 1), tris, ends, edge_lengths=lengths,
                      meta={"kind": "flat_cylinder", "circumference": circumference, "length": length,
                            "m": m, "nz": nz, "refinement": refinement})
