"""Distance fields, level sets, shortest paths, rays and angles.

Distances come from a graph on mesh vertices plus ``k`` Steiner points per
edge, every pair of nodes on the boundary of a common face joined by its
in-face straight segment.  Paths read off the graph are then pulled taut
through their triangle strip (see :mod:`unfolding`).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .errors import AmbiguousSide, CurveOffMesh, NoPath, NotMinimizing, SingularLevel
from .surface_core import (
    MeshPoint,
    PolylineCurve,
    SurfaceMesh,
    bary_in,
    curve_length,
    locate,
    make_point,
    on_face,
)
from .unfolding import strip_along, straighten

STEINER_K = 3
TAU_MIN = 1e-3


class SteinerGraph:
    """Vertices plus ``k`` equally spaced points on every edge."""

    def __init__(self, mesh: SurfaceMesh, k: int = STEINER_K):
        self.mesh = mesh
        self.k = k
        nv = mesh.n_vertices
        ne = len(mesh.edges)
        self.n_nodes = nv + k * ne
        ts = np.arange(1, k + 1) / (k + 1)
        # node positions in every face frame, and the node ids on its boundary
        lay = mesh.layout
        face_nodes = np.zeros((mesh.n_faces, 3 + 3 * k), dtype=np.int64)
        face_pos = np.zeros((mesh.n_faces, 3 + 3 * k, 2))
        F = mesh.faces
        fe = mesh.face_edge
        edges = mesh.edges
        for i in range(3):
            face_nodes[:, i] = F[:, i]
            face_pos[:, i] = lay[:, i]
        for s in range(3):
            a, b = F[:, s], F[:, (s + 1) % 3]
            e = fe[:, s]
            forward = edges[e, 0] == a  # edge stored as (a, b)
            for r in range(k):
                # param along stored direction
                idx = np.where(forward, r, k - 1 - r)
                face_nodes[:, 3 + s * k + r] = nv + e * k + idx
                t = ts[r]
                face_pos[:, 3 + s * k + r] = (1 - t) * lay[:, s] + t * lay[:, (s + 1) % 3]
        self.face_nodes = face_nodes
        self.face_pos = face_pos
        self.node_edge_t = ts
        m = 3 + 3 * k
        ii, jj = np.triu_indices(m, 1)
        same = np.zeros(len(ii), dtype=bool)
        for s in range(3):
            on = np.zeros(m, dtype=bool)
            on[3 + s * k: 3 + (s + 1) * k] = True
            on[s] = True
            on[(s + 1) % 3] = True
            same |= on[ii] & on[jj]
        # pairs on one edge are added once per edge below, with straight chains
        ii, jj = ii[~same], jj[~same]
        src = face_nodes[:, ii].ravel()
        dst = face_nodes[:, jj].ravel()
        w = np.linalg.norm(face_pos[:, ii] - face_pos[:, jj], axis=2).ravel()
        fid = np.repeat(np.arange(mesh.n_faces), len(ii))
        # edge chains
        chain_src, chain_dst, chain_w, chain_f = [], [], [], []
        for e, (a, b) in enumerate(edges):
            L = mesh.edge_lengths[e]
            ids = [a] + [nv + e * k + r for r in range(k)] + [b]
            f_any = mesh.edge_faces[e][0][0]
            for u, v in zip(ids[:-1], ids[1:]):
                chain_src.append(u)
                chain_dst.append(v)
                chain_w.append(L / (k + 1))
                chain_f.append(f_any)
        src = np.concatenate([src, chain_src]).astype(np.int64)
        dst = np.concatenate([dst, chain_dst]).astype(np.int64)
        w = np.concatenate([w, chain_w])
        fid = np.concatenate([fid, chain_f]).astype(np.int64)
        # keep the lighter copy of duplicated pairs
        lo, hi = np.minimum(src, dst), np.maximum(src, dst)
        key = lo * self.n_nodes + hi
        order = np.lexsort((w, key))
        key, lo, hi, w, fid = key[order], lo[order], hi[order], w[order], fid[order]
        first = np.concatenate([[True], key[1:] != key[:-1]])
        lo, hi, w, fid = lo[first], hi[first], w[first], fid[first]
        self._lo, self._hi, self._w, self._fid = lo, hi, w, fid
        N = self.n_nodes + 1  # last node is the virtual source
        self.N = N
        rows = np.concatenate([lo, hi])
        cols = np.concatenate([hi, lo])
        vals = np.concatenate([w, w])
        # scipy drops explicit zeros; graph weights here are all positive
        self.base = csr_matrix((vals, (rows, cols)), shape=(N, N))
        self._face_of_pair = None

    def edge_face(self, u: int, v: int) -> int:
        if self._face_of_pair is None:
            lo, hi = self._lo, self._hi
            self._face_of_pair = dict(zip((lo * self.n_nodes + hi).tolist(), self._fid.tolist()))
        a, b = (u, v) if u < v else (v, u)
        return self._face_of_pair[a * self.n_nodes + b]

    def node_point(self, node: int, face: int) -> MeshPoint:
        """MeshPoint of graph node ``node`` expressed in ``face``."""
        mesh = self.mesh
        nv = mesh.n_vertices
        F = mesh.faces_l[face]
        if node < nv:
            b = [0.0, 0.0, 0.0]
            b[F.index(node)] = 1.0
            return MeshPoint(face, tuple(b))
        e, r = divmod(node - nv, self.k)
        a, _ = mesh.edges[e]
        t = self.node_edge_t[r]
        s = mesh.face_edge_l[face].index(e)
        b = [0.0, 0.0, 0.0]
        if F[s] == a:
            b[s], b[(s + 1) % 3] = 1 - t, t
        else:
            b[s], b[(s + 1) % 3] = t, 1 - t
        return make_point(face, *b)

    def point_links(self, p: MeshPoint):
        """Graph nodes reachable from ``p`` inside one of its faces:
        ``(nodes, dists, faces)``."""
        mesh = self.mesh
        nodes, dists, faces = [], [], []
        for f in mesh.faces_of_point(p):
            b = bary_in(mesh, p, f)
            pos = b[0] * self.face_pos[f, 0] + b[1] * self.face_pos[f, 1] + b[2] * self.face_pos[f, 2]
            d = np.linalg.norm(self.face_pos[f] - pos, axis=1)
            nodes.append(self.face_nodes[f])
            dists.append(d)
            faces.append(np.full(len(d), f))
        return np.concatenate(nodes), np.concatenate(dists), np.concatenate(faces)

    def run(self, sources, limit=np.inf, predecessors=False):
        """Dijkstra from a virtual node joined to ``sources = (nodes, dists)``."""
        nodes, dists = sources
        # keep the lighter link for repeated nodes
        order = np.lexsort((dists, nodes))
        nodes, dists = np.asarray(nodes)[order], np.asarray(dists)[order]
        first = np.concatenate([[True], nodes[1:] != nodes[:-1]])
        nodes, dists = nodes[first], np.maximum(dists[first], 1e-300)
        S = self.N - 1
        extra = csr_matrix((dists, (np.full(len(nodes), S), nodes)), shape=(self.N, self.N))
        G = self.base + extra
        out = dijkstra(G, directed=True, indices=S, limit=limit, return_predecessors=predecessors)
        return out



def steiner_graph(mesh: SurfaceMesh, k: int = STEINER_K) -> SteinerGraph:
    key = ("steiner", k)
    g = mesh._cache.get(key)
    if g is None:
        g = SteinerGraph(mesh, k)
        mesh._cache[key] = g
    return g


@dataclass
class DistanceField:
    mesh: SurfaceMesh
    source: object  # MeshPoint or list of MeshPoints
    node_dist: np.ndarray
    pred: np.ndarray | None
    graph: SteinerGraph
    src_links: tuple
    values: np.ndarray = field(init=False)

    def __post_init__(self):
        self.values = self.node_dist[: self.mesh.n_vertices].copy()

    def at(self, q: MeshPoint) -> float:
        """Field value at an arbitrary mesh point."""
        nodes, dists, faces = self.graph.point_links(q)
        best = float(np.min(self.node_dist[nodes] + dists))
        # straight in-face distance from a source sharing a face with q
        for p in self.sources():
            for f in set(self.mesh.faces_of_point(q)) & set(self.mesh.faces_of_point(p)):
                best = min(best, _in_face_dist(self.mesh, p, q, f))
        return best

    def sources(self):
        return self.source if isinstance(self.source, list) else [self.source]

    @property
    def max_value(self) -> float:
        v = self.values[np.isfinite(self.values)]
        return float(v.max())

    def argmax_vertex(self) -> int:
        v = np.where(np.isfinite(self.values), self.values, -1.0)
        return int(np.argmax(v))


def _in_face_dist(mesh, p, q, f):
    a = np.array(mesh.local_xy(p, f))
    b = np.array(mesh.local_xy(q, f))
    return float(np.hypot(*(a - b)))


def distance_field(mesh: SurfaceMesh, source, limit: float = np.inf, k: int = STEINER_K) -> DistanceField:
    """Approximate geodesic distance from ``source`` (a MeshPoint or a list
    of them) to every vertex and Steiner node."""
    g = steiner_graph(mesh, k)
    srcs = source if isinstance(source, list) else [source]
    links = [g.point_links(p) for p in srcs]
    nodes = np.concatenate([l[0] for l in links])
    dists = np.concatenate([l[1] for l in links])
    d, pred = g.run((nodes, dists), limit=limit, predecessors=True)
    return DistanceField(mesh, source, d[:-1], pred, g, (nodes, dists))


def vertex_distance_field(mesh: SurfaceMesh, vertices, limit: float = np.inf, k: int = STEINER_K) -> DistanceField:
    srcs = [mesh.vertex_point(int(v)) for v in vertices]
    return distance_field(mesh, srcs, limit=limit, k=k)


def graph_path(field_: DistanceField, q: MeshPoint):
    """Graph-shortest polyline from the field's source to ``q`` as
    ``((points, seg_faces), length)``."""
    mesh, g = field_.mesh, field_.graph
    # direct in-face link from a source
    best = (math.inf, None)
    for p in field_.sources():
        for f in set(mesh.faces_of_point(q)) & set(mesh.faces_of_point(p)):
            d = _in_face_dist(mesh, p, q, f)
            if d < best[0]:
                best = (d, ("direct", p, f))
    nodes, dists, faces = g.point_links(q)
    tot = field_.node_dist[nodes] + dists
    i = int(np.argmin(tot))
    if tot[i] < best[0]:
        best = (float(tot[i]), ("graph", int(nodes[i]), int(faces[i])))
    if not math.isfinite(best[0]):
        raise NoPath("target unreachable from source")
    if best[1][0] == "direct":
        _, p, f = best[1]
        return ([p, q], [f]), best[0]
    _, last, f_last = best[1]
    S = g.N - 1
    chain = [last]
    while True:
        prv = int(field_.pred[chain[-1]])
        if prv < 0:
            raise NoPath("broken predecessor chain")
        if prv == S:
            break
        chain.append(prv)
    chain.reverse()
    first = chain[0]
    # which source link reached the first node
    p_best, f_first = None, None
    want = field_.node_dist[first]
    for p in field_.sources():
        pn, pd, pf = g.point_links(p)
        for n_, d_, f_ in zip(pn, pd, pf):
            if n_ == first and abs(d_ - want) <= 1e-9 * (1 + want) and p_best is None:
                p_best, f_first = p, int(f_)
    if p_best is None:
        raise NoPath("source link not found")
    points = [p_best, g.node_point(first, f_first)]
    seg_faces = [f_first]
    for u, v in zip(chain[:-1], chain[1:]):
        f = g.edge_face(u, v)
        points[-1] = g.node_point(u, f) if locate(mesh, points[-1])[0] != "face" else points[-1]
        seg_faces.append(f)
        points.append(g.node_point(v, f))
    seg_faces.append(f_last)
    points.append(q)
    # collapse zero-length hops (source or target sitting on a node)
    return _dedupe(mesh, points, seg_faces), best[0]


def _dedupe(mesh, points, seg_faces):
    from .surface_core import same_location

    out, of = [points[0]], []
    for k, f in enumerate(seg_faces):
        nxt = points[k + 1]
        if same_location(mesh, out[-1], nxt):
            if k == len(seg_faces) - 1 and len(out) > 1:
                out[-1] = nxt
            continue
        # re-express both ends in the segment face
        out[-1] = _in(mesh, out[-1], f)
        out.append(_in(mesh, nxt, f))
        of.append(f)
    if not of:
        return [points[0], points[-1]], [seg_faces[-1]]
    return out, of


def _in(mesh, p, f):
    if p.face == f:
        return p
    return MeshPoint(f, bary_in(mesh, p, f))


def shortest_path(mesh: SurfaceMesh, p: MeshPoint, q: MeshPoint, field_: DistanceField | None = None) -> PolylineCurve:
    """Locally shortest path from ``p`` to ``q`` in the homotopy class of the
    graph-shortest route."""
    if field_ is None:
        field_ = distance_field(mesh, p)
    (pts, fs), _ = graph_path(field_, q)
    src = pts[0]
    return taut_path(mesh, src, q, pts, fs)


def taut_path(mesh, p, q, pts, fs) -> PolylineCurve:
    if len(fs) == 1:
        c = PolylineCurve([_in(mesh, p, fs[0]), _in(mesh, q, fs[0])], list(fs))
        curve_length(mesh, c)
        return c
    strip = strip_along(mesh, pts, fs)
    out, of = straighten(mesh, pts[0], q, strip)
    c = PolylineCurve(out, of)
    curve_length(mesh, c)
    return c


# -- level sets ----------------------------------------------------------------

@dataclass
class LevelSet:
    t: float
    components: list
    open_flags: list
    total_length: float


def _face_grid(k):
    """Barycentric sub-grid of resolution ``k + 1`` and its sub-triangles."""
    n = k + 1
    pts = [(i, j) for j in range(n + 1) for i in range(n + 1 - j)]
    idx = {p: r for r, p in enumerate(pts)}
    tris = []
    for j in range(n):
        for i in range(n - j):
            tris.append((idx[(i, j)], idx[(i + 1, j)], idx[(i, j + 1)]))
            if i + j + 2 <= n:
                tris.append((idx[(i + 1, j)], idx[(i + 1, j + 1)], idx[(i, j + 1)]))
    return pts, tris


def _grid_keys(mesh, g, f, pts, n):
    """Global identity of each grid point of face ``f`` plus barycentrics.

    Grid point (i, j) has barycentric weights (n-i-j, i, j)/n on the face's
    corners 0, 1, 2.
    """
    Fl = mesh.faces_l[f]
    keys, bars = [], []
    for i, j in pts:
        w = (n - i - j, i, j)
        bars.append((w[0] / n, w[1] / n, w[2] / n))
        nz = [c for c in range(3) if w[c] > 0]
        if len(nz) == 1:
            keys.append(int(Fl[nz[0]]))
        elif len(nz) == 2:
            c0, c1 = nz
            # side s runs F[s] -> F[s+1]
            s = c0 if (c0 + 1) % 3 == c1 else c1
            t = w[(s + 1) % 3] / n  # fraction from F[s] towards F[s+1]
            r = int(round(t * n)) - 1
            slot = 3 + s * g.k + r
            keys.append(int(g.face_nodes[f, slot]))
        else:
            keys.append(("i", f, i, j))
    return keys, bars


def level_set(field_: DistanceField, t: float, tol: float | None = None) -> LevelSet:
    """Components of ``{d = t}``, oriented with the sublevel set on the left.

    Each face is split along its Steiner points into (k+1)^2 sub-triangles;
    grid values are graph distances on edges and the best in-face extension
    inside, interpolated linearly per sub-triangle.
    """
    mesh, g = field_.mesh, field_.graph
    nd = field_.node_dist
    if tol is None:
        tol = 1e-9 * math.sqrt(mesh.total_area)
    if not (0 < t < field_.max_value):
        raise ValueError("t must lie strictly between 0 and the maximum field value")
    n = g.k + 1
    pts, subtris = _face_grid(g.k)
    fd = nd[g.face_nodes]
    lo = fd.min(axis=1)
    hi = fd.max(axis=1)
    diam = np.max(mesh.side_lengths, axis=1)
    cand = np.nonzero((lo <= t + tol) & (hi + diam >= t - tol))[0]
    src_faces = {}
    for p in field_.sources():
        for f in mesh.faces_of_point(p):
            src_faces.setdefault(f, []).append(p)
    segs = {}  # start key pair -> (end key pair, face, p_start, p_end, boundary flag)
    for f in cand.tolist():
        keys, bars = _grid_keys(mesh, g, f, pts, n)
        P = g.face_pos[f]
        L = np.array(mesh.layout_l[f])
        xy = np.array(bars) @ L
        vals = np.empty(len(pts))
        dists = np.linalg.norm(xy[:, None, :] - P[None, :, :], axis=2)
        ext = np.min(fd[f][None, :] + dists, axis=1)
        for r, key in enumerate(keys):
            vals[r] = nd[key] if not isinstance(key, tuple) else ext[r]
        for p in src_faces.get(f, ()):
            pxy = np.array(mesh.local_xy(p, f))
            direct = np.linalg.norm(xy - pxy, axis=1)
            inner = np.array([isinstance(kk, tuple) for kk in keys])
            vals[inner] = np.minimum(vals[inner], direct[inner])
        if not np.isfinite(vals).all():
            if (vals[np.isfinite(vals)] > t).any() or not np.isfinite(vals).any():
                continue
        if (np.abs(vals - t) < tol).any():
            raise SingularLevel(f"a grid value lies within {tol:g} of t={t}")
        above = vals > t
        for tri in subtris:
            up = [above[v] for v in tri]
            if all(up) or not any(up):
                continue
            cr = []
            for e in range(3):
                u, v = tri[e], tri[(e + 1) % 3]
                if above[u] != above[v]:
                    mu = (t - vals[u]) / (vals[v] - vals[u])
                    b = (1 - mu) * np.array(bars[u]) + mu * np.array(bars[v])
                    ku, kv = keys[u], keys[v]
                    ekey = (ku, kv) if str(ku) < str(kv) else (kv, ku)
                    cr.append((ekey, make_point(f, *b), (1 - mu) * xy[u] + mu * xy[v]))
            (k1, p1, x1), (k2, p2, x2) = cr
            low = [v for v in tri if not above[v]][0]
            c = xy[low] - x1
            d = x2 - x1
            if d[0] * c[1] - d[1] * c[0] < 0:
                (k1, p1, x1), (k2, p2, x2) = (k2, p2, x2), (k1, p1, x1)
            segs[k1] = (k2, f, p1, p2)
    starts = set(segs)
    ends = {v[0] for v in segs.values()}
    comps, flags = [], []
    used = set()
    order = [k for k in segs if k not in ends] + list(segs)  # open chains first
    for k0 in order:
        if k0 in used:
            continue
        key = k0
        pts_c, fs = [segs[key][2]], []
        closed = False
        while True:
            used.add(key)
            k2, f, p1, p2 = segs[key]
            fs.append(f)
            if k2 == k0:
                closed = True
                break
            if k2 not in segs or k2 in used:
                pts_c.append(p2)
                break
            pts_c.append(p2)
            key = k2
        curve = PolylineCurve(pts_c, fs, closed)
        curve_length(mesh, curve)
        comps.append(curve)
        flags.append(not closed)
    total = math.fsum(c.length for c in comps)
    return LevelSet(t, comps, flags, total)


def nudged_level_set(field_: DistanceField, t: float, delta: float | None = None, tries: int = 8) -> LevelSet:
    """level_set, retrying at t +- k*delta when t hits a vertex value."""
    mesh = field_.mesh
    if delta is None:
        delta = 1e-4 * math.sqrt(mesh.total_area)
    for k in range(tries):
        for sgn in ((1,) if k == 0 else (1, -1)):
            try:
                return level_set(field_, t + sgn * k * delta)
            except SingularLevel:
                continue
    raise SingularLevel(f"no regular level near t={t}")


# -- rays and lines --------------------------------------------------------------

@dataclass
class Ray:
    curve: PolylineCurve
    base: MeshPoint
    end_id: int | tuple
    minimizing_certificate: bool
    worst_ratio: float = 1.0

    def point_at(self, mesh: SurfaceMesh, s: float) -> MeshPoint:
        return point_at_length(mesh, self.curve, s)

    @property
    def length(self) -> float:
        return self.curve.length


def point_at_length(mesh: SurfaceMesh, curve: PolylineCurve, s: float) -> MeshPoint:
    """Point at arclength ``s`` along an open curve (clamped to its ends)."""
    p, _ = split_at_length(mesh, curve, s)
    return p


def split_at_length(mesh: SurfaceMesh, curve: PolylineCurve, s: float):
    """``(point, segment index)`` at arclength ``s``."""
    from .surface_core import segment_lengths

    lens = segment_lengths(mesh, curve)
    if s <= 0:
        return curve.points[0], 0
    acc = 0.0
    for k, L in enumerate(lens):
        if acc + L >= s and L > 0:
            a, b, f = curve.segment(k)
            lam = (s - acc) / L
            ba, bb = bary_in(mesh, a, f), bary_in(mesh, b, f)
            return make_point(f, *[(1 - lam) * x + lam * y for x, y in zip(ba, bb)]), k
        acc += L
    return curve.points[-1] if not curve.closed else curve.points[0], len(lens) - 1


def sub_curve(mesh: SurfaceMesh, curve: PolylineCurve, s0: float, s1: float) -> PolylineCurve:
    """Portion of an open curve between arclengths ``s0 <= s1``."""
    from .surface_core import segment_lengths

    lens = segment_lengths(mesh, curve)
    total = math.fsum(lens)
    s0, s1 = max(0.0, s0), min(total, s1)
    pts, fs = [], []
    acc = 0.0
    for k, L in enumerate(lens):
        a, b, f = curve.segment(k)
        lo, hi = acc, acc + L
        acc = hi
        if hi < s0 or lo > s1 or L == 0:
            continue
        ba, bb = np.array(bary_in(mesh, a, f)), np.array(bary_in(mesh, b, f))
        u0 = max(0.0, (s0 - lo) / L)
        u1 = min(1.0, (s1 - lo) / L)
        if u1 <= u0 and pts:
            continue
        pa = make_point(f, *((1 - u0) * ba + u0 * bb))
        pb = make_point(f, *((1 - u1) * ba + u1 * bb))
        if not pts:
            pts.append(pa)
        pts.append(pb)
        fs.append(f)
    if not fs:
        p = point_at_length(mesh, curve, s0)
        return PolylineCurve([p], [])
    c = PolylineCurve(pts, fs)
    curve_length(mesh, c)
    return c


def end_ring(mesh: SurfaceMesh, end_id: int) -> list[int]:
    return list(mesh.ends[end_id].boundary)


def geodesic_ray(mesh: SurfaceMesh, base: MeshPoint, end_id: int, tau_min: float = TAU_MIN,
                 retries: int = 4, field_: DistanceField | None = None) -> Ray:
    """Minimizing path from ``base`` to the truncation boundary of an end.

    The nearest boundary vertex of the end is the finite stand-in for the
    point at infinity; the certificate checks every prefix against the
    distance field.
    """
    if not (0 <= end_id < mesh.n_ends):
        raise ValueError(f"mesh has no end {end_id}")
    if field_ is None:
        field_ = distance_field(mesh, base)
    ring = end_ring(mesh, end_id)
    order = sorted(ring, key=lambda v: field_.values[v])
    best = None
    for v in order[: max(1, retries)]:
        curve = shortest_path(mesh, base, mesh.vertex_point(v), field_)
        ok, worst = certify_prefixes(mesh, curve, field_, tau_min)
        ray = Ray(curve, base, end_id, ok, worst)
        if ok:
            return ray
        if best is None or worst < best.worst_ratio:
            best = ray
    raise NotMinimizing(f"no certified ray into end {end_id} (best prefix ratio {best.worst_ratio:.4f})")


def certify_prefixes(mesh, curve, field_, tau_min=TAU_MIN, abs_slack=None):
    """Every prefix no longer than the field distance to its end point,
    up to a relative ``tau_min`` and a small absolute mesh slack."""
    from .surface_core import segment_lengths

    if abs_slack is None:
        abs_slack = 1e-3 * mesh.mean_edge
    lens = segment_lengths(mesh, curve)
    acc = 0.0
    worst = 1.0
    for k, L in enumerate(lens):
        acc += L
        q = curve.points[k + 1] if k + 1 < len(curve.points) else curve.points[0]
        d = field_.at(q)
        if d <= 0:
            continue
        r = acc / d
        worst = max(worst, r)
        if acc > d * (1 + tau_min) + abs_slack:
            return False, worst
    return True, worst


def geodesic_line(mesh: SurfaceMesh, end_a: int = 0, end_b: int = 1, tau_min: float = TAU_MIN) -> Ray:
    """Minimizing segment between the truncation boundaries of two ends,
    certified from both sides; the finite model of a line."""
    if end_a == end_b or not all(0 <= e < mesh.n_ends for e in (end_a, end_b)):
        raise ValueError(f"a line needs two distinct ends; mesh has {mesh.n_ends}")
    ring_a, ring_b = end_ring(mesh, end_a), end_ring(mesh, end_b)
    fa = vertex_distance_field(mesh, ring_a)
    vb = min(ring_b, key=lambda v: fa.values[v])
    (pts, fs), _ = graph_path(fa, mesh.vertex_point(vb))
    curve = taut_path(mesh, pts[0], pts[-1], pts, fs)
    fb = vertex_distance_field(mesh, ring_b)
    ok_a, wa = certify_prefixes(mesh, curve, fa, tau_min)
    ok_b, wb = certify_prefixes(mesh, curve.reversed(), fb, tau_min)
    if not (ok_a and ok_b):
        raise NotMinimizing(f"line certificate failed (ratios {wa:.4f}, {wb:.4f})")
    return Ray(curve, curve.points[0], (end_a, end_b), True, max(wa, wb))


# -- angles -----------------------------------------------------------------------

def _dir_in_face(mesh, a: MeshPoint, b: MeshPoint, f: int) -> complex:
    xa, ya = mesh.local_xy(a, f)
    xb, yb = mesh.local_xy(b, f)
    return complex(xb - xa, yb - ya)


def angular_coordinate(mesh: SurfaceMesh, at: MeshPoint, f: int, d: complex):
    """Angle of direction ``d`` (in the frame of face ``f``, emanating from
    ``at``) in a polar chart around ``at``, and the chart's total angle."""
    kind, ent = locate(mesh, at)
    if kind == "face":
        return (math.atan2(d.imag, d.real)) % (2 * math.pi), 2 * math.pi
    if kind == "edge":
        # chart: the frame of the first face of the edge, other face unfolded
        (f0, s0) = mesh.edge_faces[ent][0]
        if f != f0:
            (f1, s1) = [x for x in mesh.edge_faces[ent] if x[0] == f][0]
            L0, L1 = mesh.layout_l[f0], mesh.layout_l[f1]
            a0, b0 = complex(*L0[s0]), complex(*L0[(s0 + 1) % 3])
            a1, b1 = complex(*L1[s1]), complex(*L1[(s1 + 1) % 3])
            rot = (a0 - b0) / (b1 - a1)
            rot /= abs(rot)
            d = d * rot
        return (math.atan2(d.imag, d.real)) % (2 * math.pi), 2 * math.pi
    v = ent
    fan = mesh.fan(v)
    acc = 0.0
    for g, i in fan:
        if g == f:
            L = mesh.layout_l[g]
            e = complex(L[(i + 1) % 3][0] - L[i][0], L[(i + 1) % 3][1] - L[i][1])
            ang = math.atan2((d / e).imag, (d / e).real)
            ang = min(max(ang, 0.0), mesh.corner_l[g][i])
            return acc + ang, mesh.cone_l[v]
        acc += mesh.corner_l[g][i]
    raise CurveOffMesh("direction face does not contain the vertex")


def wedge_angles(mesh: SurfaceMesh, prev: MeshPoint, f_in: int, at: MeshPoint, nxt: MeshPoint, f_out: int):
    """``(left, right)`` angles at ``at`` between the reversed incoming
    segment ``prev -> at`` (face ``f_in``) and the outgoing ``at -> nxt``
    (face ``f_out``); left is measured counter-clockwise from the outgoing
    direction, i.e. on the left of the oriented curve."""
    d_back = _dir_in_face(mesh, at, prev, f_in)
    d_out = _dir_in_face(mesh, at, nxt, f_out)
    th_b, total = angular_coordinate(mesh, at, f_in, d_back)
    th_o, _ = angular_coordinate(mesh, at, f_out, d_out)
    left = (th_b - th_o) % total
    kind, ent = locate(mesh, at)
    if kind == "vertex" and mesh.boundary_vertex[ent]:
        left = th_b - th_o
        if left < 0:
            return math.inf, total + left
        return left, math.inf
    return left, total - left


def interior_angle(mesh: SurfaceMesh, incoming: PolylineCurve, outgoing: PolylineCurve, at: MeshPoint, side) -> float:
    """Angle at ``at`` between the end of ``incoming`` and the start of
    ``outgoing``, measured inside ``side``: ``"left"``/``"right"`` of the
    oriented curve, or a set of face ids of the region."""
    k = incoming.n_segments - 1
    prev, _, f_in = incoming.segment(k)
    _, nxt, f_out = outgoing.segment(0)
    left, right = wedge_angles(mesh, prev, f_in, at, nxt, f_out)
    if side == "left":
        return left
    if side == "right":
        return right
    region = set(side)
    hit_l = _wedge_hits(mesh, at, f_in, prev, f_out, nxt, region, True)
    hit_r = _wedge_hits(mesh, at, f_in, prev, f_out, nxt, region, False)
    if hit_l == hit_r:
        raise AmbiguousSide("region does not select exactly one wedge")
    return left if hit_l else right


def _wedge_hits(mesh, at, f_in, prev, f_out, nxt, region, left_side):
    # does the bisector of the chosen wedge start inside a region face?
    d_back = _dir_in_face(mesh, at, prev, f_in)
    d_out = _dir_in_face(mesh, at, nxt, f_out)
    th_b, total = angular_coordinate(mesh, at, f_in, d_back)
    th_o, _ = angular_coordinate(mesh, at, f_out, d_out)
    w = (th_b - th_o) % total
    mid = (th_o + 0.5 * w) % total if left_side else (th_b + 0.5 * (total - w)) % total
    return face_at_angle(mesh, at, mid) in region


def face_at_angle(mesh: SurfaceMesh, at: MeshPoint, theta: float) -> int:
    kind, ent = locate(mesh, at)
    if kind == "face":
        return at.face
    if kind == "edge":
        (f0, s0) = mesh.edge_faces[ent][0]
        L0 = mesh.layout_l[f0]
        e = complex(L0[(s0 + 1) % 3][0] - L0[s0][0], L0[(s0 + 1) % 3][1] - L0[s0][1])
        # face f0 lies to the left of its side direction
        eang = math.atan2(e.imag, e.real)
        rel = (theta - eang) % (2 * math.pi)
        if rel < math.pi or len(mesh.edge_faces[ent]) == 1:
            return f0
        return mesh.edge_faces[ent][1][0]
    acc = 0.0
    fan = mesh.fan(ent)
    for g, i in fan:
        acc += mesh.corner_l[g][i]
        if theta < acc:
            return g
    return fan[-1][0]


# -- export -----------------------------------------------------------------------

def write_polylines_csv(path, curves, ts=None) -> None:
    """Rows ``t, component, index, face, b0, b1, b2``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "component", "index", "face", "b0", "b1", "b2"])
        for c_id, curve in enumerate(curves):
            t = "" if ts is None else ts[c_id]
            for i, p in enumerate(curve.points):
                w.writerow([t, c_id, i, p.face, repr(p.bary[0]), repr(p.bary[1]), repr(p.bary[2])])
