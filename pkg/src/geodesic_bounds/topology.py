"""Cut-and-count separation test for closed curves.

Vertices lying on the curve and edges whose interior the curve crosses are
removed from the vertex graph; the remaining components are labelled by the
side of the curve they touch.  A side reached from both the left and the
right means the curve does not separate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .surface_core import MeshPoint, PolylineCurve, SurfaceMesh, locate


@dataclass
class Separation:
    separating: bool
    labels: np.ndarray  # component id per vertex, -1 on the curve
    left: set = field(default_factory=set)
    right: set = field(default_factory=set)

    def side_of_vertex(self, v: int) -> str | None:
        c = self.labels[v]
        if c < 0:
            return None
        if c in self.left and c not in self.right:
            return "left"
        if c in self.right and c not in self.left:
            return "right"
        return "both" if c in self.left else None


def cut_components(mesh: SurfaceMesh, curve: PolylineCurve) -> Separation:
    on_vertex = set()
    cut_edges = set()
    for p in curve.points:
        kind, ent = locate(mesh, p)
        if kind == "vertex":
            on_vertex.add(ent)
        elif kind == "edge":
            cut_edges.add(ent)
    # segments running along an edge cut nothing extra: both ends are vertices
    E = mesh.edges
    keep = np.ones(len(E), dtype=bool)
    keep[list(cut_edges)] = False
    mask = np.zeros(mesh.n_vertices, dtype=bool)
    mask[list(on_vertex)] = True
    keep &= ~mask[E[:, 0]] & ~mask[E[:, 1]]
    n = mesh.n_vertices
    A = coo_matrix((np.ones(int(keep.sum())), (E[keep, 0], E[keep, 1])), shape=(n, n))
    _, lab = connected_components(A, directed=False)
    lab = lab.astype(np.int64)
    lab[mask] = -1
    left, right = set(), set()
    for f, chains in _face_chains(mesh, curve).items():
        ends = []
        for p, q in chains:
            sp, sq = _boundary_param(p), _boundary_param(q)
            if sp is None or sq is None:
                continue
            ends.append((sp, "start"))
            ends.append((sq, "end"))
        if not ends:
            continue
        for i, v in enumerate(mesh.faces_l[f]):
            if lab[v] < 0:
                continue
            # first chain endpoint met walking counter-clockwise from corner i:
            # a chain start means the corner lies on the chain's left
            _, role = min(ends, key=lambda e: (e[0] - i) % 3.0 or 3.0)
            (left if role == "start" else right).add(int(lab[v]))
    _label_edge_runs(mesh, curve, lab, left, right)
    separating = not (left & right)
    return Separation(separating, lab, left, right)


def _label_edge_runs(mesh, curve, lab, left, right, tol=1e-12):
    """Segments running along an edge live in one face only; the apex of
    the face across the edge lies on the other side of the curve."""
    from .surface_core import bary_in

    for k in range(curve.n_segments):
        p, q, f = curve.segment(k)
        bp, bq = bary_in(mesh, p, f), bary_in(mesh, q, f)
        for s in range(3):
            o = (s + 2) % 3
            if bp[o] > tol or bq[o] > tol:
                continue
            # faces are counter-clockwise: running from corner s to s + 1
            # keeps the face on the left
            forward = bq[(s + 1) % 3] > bp[(s + 1) % 3]
            a = lab[mesh.faces_l[f][o]]
            if a >= 0:
                (left if forward else right).add(int(a))
            g, j = mesh.twin_l[f][s]
            if g >= 0:
                b = lab[mesh.faces_l[g][(j + 2) % 3]]
                if b >= 0:
                    (right if forward else left).add(int(b))
            break


def _face_chains(mesh, curve):
    """Maximal runs of consecutive segments in one face, as (start, end)
    barycentric triples in that face."""
    from .surface_core import bary_in

    n = curve.n_segments
    if n == 0:
        return {}
    fs = curve.faces
    if all(f == fs[0] for f in fs):
        return {}
    starts = [k for k in range(n) if fs[k] != fs[k - 1]]
    npts = len(curve.points)
    out = {}
    for r, k in enumerate(starts):
        nxt = starts[(r + 1) % len(starts)]
        f = fs[k]
        p = bary_in(mesh, curve.points[k], f)
        q = bary_in(mesh, curve.points[nxt % npts], f)
        out.setdefault(f, []).append((p, q))
    return out


def _boundary_param(b, tol=1e-12):
    """Position on the triangle boundary, ``i + s`` on side ``i`` (from
    corner ``i`` to corner ``i+1``); None for interior points."""
    for i in range(3):
        if b[(i + 2) % 3] <= tol:
            return i + b[(i + 1) % 3] if b[(i + 1) % 3] < 1 - tol else float((i + 1) % 3)
    return None


def point_side(mesh: SurfaceMesh, sep: Separation, curve: PolylineCurve, p: MeshPoint) -> str | None:
    """Side of the curve containing ``p`` (``"left"``, ``"right"``, ``"both"``
    for a non-separating curve, or None when ``p`` sits on the cut)."""
    for f in mesh.faces_of_point(p):
        for v in mesh.faces_l[f]:
            s = sep.side_of_vertex(v)
            if s is not None and not _face_is_cut(mesh, curve, f):
                return s
    # the face is cut: decide locally against the nearest segment in it
    best = None
    px = None
    for k in range(curve.n_segments):
        a, b, f = curve.segment(k)
        if f not in mesh.faces_of_point(p):
            continue
        xa = np.array(mesh.local_xy(a, f))
        xb = np.array(mesh.local_xy(b, f))
        px = np.array(mesh.local_xy(p, f))
        d = xb - xa
        t = np.clip(np.dot(px - xa, d) / max(np.dot(d, d), 1e-300), 0, 1)
        dist = np.hypot(*(px - (xa + t * d)))
        c = d[0] * (px - xa)[1] - d[1] * (px - xa)[0]
        if best is None or dist < best[0]:
            best = (dist, c)
    if best is None or best[1] == 0:
        return None
    side = "left" if best[1] > 0 else "right"
    if sep.separating:
        return side
    return "both"


def _face_is_cut(mesh, curve, f):
    cache = curve.__dict__.setdefault("_cut_faces", None)
    if cache is None:
        cache = {fc for fc in curve.faces}
        for p in curve.points:
            cache.update(mesh.faces_of_point(p))
        curve.__dict__["_cut_faces"] = cache
    return f in cache


def side_faces(mesh: SurfaceMesh, sep: Separation, side: str) -> set[int]:
    """Faces all of whose off-curve vertices lie on ``side``."""
    comps = sep.left if side == "left" else sep.right
    out = set()
    lab = sep.labels
    for f, Fl in enumerate(mesh.faces_l):
        ls = [lab[v] for v in Fl if lab[v] >= 0]
        if ls and all(c in comps for c in ls):
            out.add(f)
    return out


def euler_of_faces(mesh: SurfaceMesh, faces) -> int:
    faces = list(faces)
    if not faces:
        return 0
    verts = set()
    edges = set()
    for f in faces:
        verts.update(mesh.faces_l[f])
        edges.update(mesh.face_edge_l[f])
    return len(verts) - len(edges) + len(faces)


def is_essential(mesh: SurfaceMesh, curve: PolylineCurve, marked=(), count_ends: bool = True):
    """Essential in the surface punctured at ``marked`` points.

    Returns ``(essential, info)``; a non-separating curve is essential.  A
    separating curve is essential when neither side is a bare disk: each
    side must contain a marked point, an end, or topology (Euler
    characteristic other than 1).
    """
    sep = cut_components(mesh, curve)
    info = {"separating": sep.separating}
    if not sep.separating:
        return True, info
    sides = {}
    for side in ("left", "right"):
        fs = side_faces(mesh, sep, side)
        chi = euler_of_faces(mesh, fs)
        has_mark = any(point_side(mesh, sep, curve, p) == side for p in marked)
        has_end = False
        if count_ends:
            for end in mesh.ends:
                if any(sep.side_of_vertex(v) == side for v in end.boundary):
                    has_end = True
        sides[side] = {"chi": chi, "marked": has_mark, "end": has_end, "n_faces": len(fs)}
    info.update(sides)
    ess = all(s["marked"] or s["end"] or s["chi"] != 1 for s in sides.values())
    return ess, info
