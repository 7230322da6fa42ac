"""Triangle strips: unfolding, funnel straightening and vertex flips.

A strip is a sequence of faces ``faces[0..n]`` together with the side index
``sides[k]`` of ``faces[k]`` that is crossed to enter ``faces[k + 1]``.  The
taut path through a strip is found with the funnel algorithm; wherever the
taut path wraps around an interior vertex whose opposite wedge is smaller
than pi, the strip is rerouted around the other side of that vertex and the
path is pulled tight again.  The result is a locally shortest path.
"""

from __future__ import annotations

import cmath
import math

from .errors import CurveOffMesh
from .surface_core import (
    MeshPoint,
    PolylineCurve,
    SurfaceMesh,
    bary_in,
    locate,
    make_point,
    same_location,
)

FLIP_TOL = 1e-9
MAX_FLIPS = 200


class Strip:
    __slots__ = ("faces", "sides", "edges")

    def __init__(self, face: int):
        self.faces = [face]
        self.sides: list[int] = []
        self.edges: list[int] = []

    def cross(self, mesh: SurfaceMesh, side: int) -> None:
        f = self.faces[-1]
        g, _ = mesh.twin_l[f][side]
        if g < 0:
            raise CurveOffMesh("strip would cross a boundary edge")
        e = mesh.face_edge_l[f][side]
        if self.edges and self.edges[-1] == e:
            # crossing straight back: cancel the excursion
            self.faces.pop()
            self.sides.pop()
            self.edges.pop()
            return
        self.sides.append(side)
        self.edges.append(e)
        self.faces.append(g)

    def copy(self) -> "Strip":
        s = Strip(self.faces[0])
        s.faces = list(self.faces)
        s.sides = list(self.sides)
        s.edges = list(self.edges)
        return s


def rotate_around(mesh: SurfaceMesh, v: int, f_from: int, f_to: int, ccw: bool):
    """Sides crossed walking around ``v`` from ``f_from`` to ``f_to``.

    Returns ``(sides, angle)`` where ``angle`` sums the corner angles of the
    faces passed in between, or ``None`` if a boundary edge blocks the walk.
    """
    if f_from == f_to:
        return [], 0.0
    f = f_from
    i = mesh.faces_l[f].index(v)
    sides = []
    angle = 0.0
    for _ in range(len(mesh.vertex_corners[v]) + 1):
        s = (i + 2) % 3 if ccw else i
        g, j = mesh.twin_l[f][s]
        if g < 0:
            return None
        sides.append((f, s))
        f = g
        i = j if ccw else (j + 1) % 3
        if f == f_to:
            return sides, angle
        angle += mesh.corner_l[f][i]
    return None


def strip_along(mesh: SurfaceMesh, points, seg_faces) -> Strip:
    """Strip of faces visited by an arc with nodes ``points``."""
    strip = Strip(seg_faces[0])
    for k in range(1, len(points) - 1):
        g_next = seg_faces[k]
        g_prev = strip.faces[-1]
        if g_next == g_prev:
            continue
        kind, ent = locate(mesh, points[k])
        if kind == "edge":
            fe = mesh.face_edge_l[g_prev]
            cands = [s for s in range(3) if fe[s] == ent and mesh.twin_l[g_prev][s][0] == g_next]
            if not cands:
                raise CurveOffMesh("consecutive segment faces are not adjacent across the node's edge")
            strip.cross(mesh, cands[0])
        elif kind == "vertex":
            _route_vertex(mesh, strip, ent, g_prev, g_next)
        else:
            raise CurveOffMesh("face-interior node between segments in different faces")
    return strip


def _route_vertex(mesh, strip, v, g_prev, g_next):
    a = rotate_around(mesh, v, g_prev, g_next, True)
    b = rotate_around(mesh, v, g_prev, g_next, False)
    if a is None and b is None:
        raise CurveOffMesh(f"cannot route around vertex {v}")
    if b is None or (a is not None and a[1] <= b[1]):
        route = a[0]
    else:
        route = b[0]
    for f, s in route:
        if strip.faces[-1] != f:
            raise CurveOffMesh("inconsistent vertex route")
        strip.cross(mesh, s)


def unfold(mesh: SurfaceMesh, strip: Strip):
    """Planar positions (complex) of the three corners of every strip face."""
    lay = mesh.layout_l
    f0 = strip.faces[0]
    P = [complex(*lay[f0][0]), complex(*lay[f0][1]), complex(*lay[f0][2])]
    out = [P]
    for k, s in enumerate(strip.sides):
        f = strip.faces[k]
        g, j = mesh.twin_l[f][s]
        pu, pw = P[s], P[(s + 1) % 3]
        L = lay[g]
        lw = complex(*L[j])
        lu = complex(*L[(j + 1) % 3])
        rot = (pu - pw) / (lu - lw)
        rot /= abs(rot)
        m = (j + 2) % 3
        Q = [0j, 0j, 0j]
        Q[j] = pw
        Q[(j + 1) % 3] = pu
        Q[m] = pw + rot * (complex(*L[m]) - lw)
        P = Q
        out.append(P)
    return out


def _cross(a: complex, b: complex) -> float:
    return a.real * b.imag - a.imag * b.real


def funnel(start: complex, end: complex, portals):
    """Simple stupid funnel over ``portals = [(left, right), ...]``.

    Returns the apex chain as ``[(position, portal_index, side)]`` with
    ``side`` one of ``"start"``, ``"left"``, ``"right"``, ``"end"``.
    """
    pts = [(start, start)] + list(portals) + [(end, end)]
    n = len(pts)
    apex = left = right = start
    ai = li = ri = 0
    chain = [(start, -1, "start")]
    tiny = 1e-13
    i = 1
    while i < n:
        pl, pr = pts[i]
        if abs(pr - apex) < tiny or _cross(right - apex, pr - apex) >= 0.0:
            if abs(apex - right) < tiny or abs(pr - apex) < tiny or abs(pr - left) < tiny or _cross(left - apex, pr - apex) < 0.0:
                right, ri = pr, i
            else:
                apex, ai = left, li
                chain.append((apex, li - 1, "left"))
                left = right = apex
                li = ri = ai
                i = ai + 1
                continue
        if abs(pl - apex) < tiny or _cross(left - apex, pl - apex) <= 0.0:
            if abs(apex - left) < tiny or abs(pl - apex) < tiny or abs(pl - right) < tiny or _cross(right - apex, pl - apex) > 0.0:
                left, li = pl, i
            else:
                apex, ai = right, ri
                chain.append((apex, ri - 1, "right"))
                left = right = apex
                li = ri = ai
                i = ai + 1
                continue
        i += 1
    chain.append((end, n - 2, "end"))
    return chain


def _portal_param(a: complex, b: complex, r: complex, l: complex) -> float:
    d = b - a
    e = l - r
    den = _cross(d, e)
    if abs(den) < 1e-18 * (abs(d) * abs(e) + 1e-300):
        # degenerate: project the midpoint onto the portal
        m = 0.5 * (a + b)
        t = ((m - r) * e.conjugate()).real / (abs(e) ** 2)
    else:
        t = _cross(d, a - r) / den
    return min(1.0, max(0.0, t))


def straighten(mesh: SurfaceMesh, p: MeshPoint, q: MeshPoint, strip: Strip, allow_flips: bool = True):
    """Locally shortest path from ``p`` to ``q`` homotopic to ``strip``.

    Returns ``(points, seg_faces)``.
    """
    strip = strip.copy()
    _trim_ends(mesh, strip, p, q)
    for _ in range(MAX_FLIPS):
        points, faces, witness = _taut(mesh, p, q, strip)
        if not allow_flips:
            return points, faces
        flip = _find_flip(mesh, strip, points, witness)
        if flip is None:
            return points, faces
        strip = _apply_flip(mesh, strip, *flip)
        _trim_ends(mesh, strip, p, q)
    return points, faces


def _trim_ends(mesh, strip, p, q):
    for pt, front in ((p, True), (q, False)):
        kind, ent = locate(mesh, pt)
        if kind == "face":
            continue
        while strip.sides:
            k = 0 if front else len(strip.sides) - 1
            f = strip.faces[k]
            s = strip.sides[k]
            a, b = mesh.faces_l[f][s], mesh.faces_l[f][(s + 1) % 3]
            hit = (kind == "vertex" and ent in (a, b)) or (kind == "edge" and mesh.face_edge_l[f][s] == ent)
            if not hit:
                break
            if front:
                strip.faces.pop(0)
                strip.sides.pop(0)
                strip.edges.pop(0)
            else:
                strip.faces.pop()
                strip.sides.pop()
                strip.edges.pop()


def _taut(mesh, p, q, strip):
    pos = unfold(mesh, strip)
    f0, fn = strip.faces[0], strip.faces[-1]
    b = bary_in(mesh, p, f0)
    P0 = pos[0]
    start = b[0] * P0[0] + b[1] * P0[1] + b[2] * P0[2]
    b = bary_in(mesh, q, fn)
    Pn = pos[-1]
    end = b[0] * Pn[0] + b[1] * Pn[1] + b[2] * Pn[2]
    portals = []
    for k, s in enumerate(strip.sides):
        P = pos[k]
        portals.append((P[(s + 1) % 3], P[s]))
    chain = funnel(start, end, portals)
    n = len(portals)
    nodes = [p]
    seg_faces = []
    witness = []  # per node: (portal index, role) for vertex nodes
    ci = 0
    for k in range(n):
        while ci + 1 < len(chain) - 1 and chain[ci + 1][1] < k:
            ci += 1
        a_pos, a_idx, a_role = chain[ci]
        b_pos, b_idx, b_role = chain[ci + 1]
        f = strip.faces[k]
        s = strip.sides[k]
        if b_idx == k and b_role in ("left", "right"):
            mu = 1.0 if b_role == "left" else 0.0
        elif a_idx == k and a_role in ("left", "right"):
            mu = 1.0 if a_role == "left" else 0.0
        else:
            left, right = portals[k]
            mu = _portal_param(a_pos, b_pos, right, left)
        bb = [0.0, 0.0, 0.0]
        bb[s] = 1.0 - mu
        bb[(s + 1) % 3] = mu
        node = make_point(f, *bb)
        seg_faces.append(f)
        nodes.append(node)
        witness.append(k)
    nodes.append(q)
    seg_faces.append(fn)
    witness.append(None)
    # drop zero-length segments
    out = [nodes[0]]
    out_f = []
    out_w = [None]
    for k in range(len(seg_faces)):
        nxt = nodes[k + 1]
        if same_location(mesh, nxt, out[-1]):
            if k + 1 == len(nodes) - 1:
                # keep the exact end point object
                out[-1] = nxt if len(out) > 1 else out[-1]
            continue
        out_f.append(seg_faces[k])
        out.append(nxt)
        out_w.append(witness[k])
    if len(out) == 1 and not same_location(mesh, out[0], q):
        out.append(q)
        out_f.append(fn)
        out_w.append(None)
    return out, out_f, (out_w, pos, portals, chain)


def _find_flip(mesh, strip, points, witness):
    _, pos, portals, chain = witness
    for c in range(1, len(chain) - 1):
        apos, k, role = chain[c]
        v = _portal_vertex(mesh, strip, k, role)
        if mesh.boundary_vertex[v]:
            continue
        # block of consecutive portals sharing v in the same role
        ka = k
        while ka - 1 >= 0 and _portal_vertex(mesh, strip, ka - 1, role) == v:
            ka -= 1
        kb = k
        while kb + 1 < len(strip.sides) and _portal_vertex(mesh, strip, kb + 1, role) == v:
            kb += 1
        d_in = apos - chain[c - 1][0]
        d_out = chain[c + 1][0] - apos
        if abs(d_in) < 1e-15 or abs(d_out) < 1e-15:
            continue
        delta = cmath.phase(d_out / d_in)
        strip_side = math.pi + delta if role == "left" else math.pi - delta
        other = mesh.cone_l[v] - strip_side
        if other < math.pi - FLIP_TOL:
            return ka, kb, v, role
    return None


def _portal_vertex(mesh, strip, k, role):
    f = strip.faces[k]
    s = strip.sides[k]
    F = mesh.faces_l[f]
    return F[(s + 1) % 3] if role == "left" else F[s]


def _apply_flip(mesh, strip, ka, kb, v, role):
    f_from = strip.faces[ka]
    f_to = strip.faces[kb + 1]
    # left-vertex blocks rotate counter-clockwise; go the other way round
    ccw = role != "left"
    route = rotate_around(mesh, v, f_from, f_to, ccw)
    new = Strip(strip.faces[0])
    for k in range(ka):
        new.cross(mesh, strip.sides[k])
    if route is None:
        raise CurveOffMesh("flip blocked by boundary")
    for f, s in route[0]:
        new.cross(mesh, s)
    for k in range(kb + 1, len(strip.sides)):
        new.cross(mesh, strip.sides[k])
    return new


def straight_curve(mesh: SurfaceMesh, points, faces, closed=False) -> PolylineCurve:
    from .surface_core import curve_length

    c = PolylineCurve(list(points), list(faces), closed)
    curve_length(mesh, c)
    return c


def _face_pos(mesh, f):
    L = mesh.layout_l[f]
    return [complex(*L[0]), complex(*L[1]), complex(*L[2])]


def _to_bary(P, z):
    # barycentric coordinates of z in triangle P (complex corners)
    d = _cross(P[1] - P[0], P[2] - P[0])
    b1 = _cross(z - P[0], P[2] - P[0]) / d
    b2 = _cross(P[1] - P[0], z - P[0]) / d
    return (1.0 - b1 - b2, b1, b2)


def trace_straight(mesh: SurfaceMesh, p: MeshPoint, direction: complex, length: float, face: int | None = None):
    """Follow the straight line from ``p`` with ``direction`` (in the local
    frame of ``face``, default ``p.face``) for ``length``.

    Returns ``(points, seg_faces, last_dir, last_face, stopped)`` where
    ``stopped`` is True if a boundary edge was hit.  Passing exactly
    through a vertex is avoided by a tiny sideways nudge.
    """
    f = p.face if face is None else face
    P = _face_pos(mesh, f)
    b = bary_in(mesh, p, f)
    z = b[0] * P[0] + b[1] * P[1] + b[2] * P[2]
    d = direction / abs(direction)
    remaining = length
    points = [p]
    faces = []
    entered = -1
    scale = mesh.mean_edge
    for _ in range(100000):
        # exit parameter over the three sides
        best = None
        for s in range(3):
            if s == entered:
                continue
            a, c = P[s], P[(s + 1) % 3]
            den = _cross(d, c - a)
            if abs(den) < 1e-300:
                continue
            t = _cross(a - z, c - a) / den
            u = _cross(a - z, d) / den
            if t > 1e-14 * scale and -1e-12 <= u <= 1 + 1e-12 and (best is None or t < best[0]):
                best = (t, s, u)
        if best is None:
            if remaining <= 0:
                break
            raise CurveOffMesh("straight trace left the face")
        t, s, u = best
        if t >= remaining:
            z_end = z + remaining * d
            points.append(point_from_complex(mesh, f, P, z_end))
            faces.append(f)
            return points, faces, d, f, False
        # stay clear of vertices
        if u < 1e-9 or u > 1 - 1e-9:
            u = min(max(u, 1e-9), 1 - 1e-9)
        bb = [0.0, 0.0, 0.0]
        bb[s] = 1.0 - u
        bb[(s + 1) % 3] = u
        hit = make_point(f, *bb)
        zc = P[s] + u * (P[(s + 1) % 3] - P[s])
        remaining -= abs(zc - z)
        points.append(hit)
        faces.append(f)
        g, j = mesh.twin_l[f][s]
        if g < 0:
            return points, faces, d, f, True
        Q = _face_pos(mesh, g)
        # rigid map taking f's side s onto g's side j (reversed)
        rot = (Q[(j + 1) % 3] - Q[j]) / (P[s] - P[(s + 1) % 3])
        rot /= abs(rot)
        z = Q[j] + rot * (zc - P[(s + 1) % 3])
        d = d * rot
        f, P, entered = g, Q, j
    raise CurveOffMesh("straight trace did not terminate")


def point_from_complex(mesh, f, P, z):
    b = _to_bary(P, z)
    return make_point(f, max(0.0, b[0]), max(0.0, b[1]), max(0.0, b[2]))
