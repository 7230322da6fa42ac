"""Intrinsic triangle meshes with truncated ends.

A :class:`SurfaceMesh` stores a piecewise-flat metric through edge lengths
only.  Every face gets a local planar layout, so positions inside a face are
barycentric combinations of its three layout corners.  Ends of the surface
are cut off at a boundary loop; the faces next to that loop form the
truncation *collar*, and the area of the discarded tail is bookkept in
``tail_area`` so that ``total_area`` matches the complete surface.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    CurveOffMesh,
    DegenerateTriangle,
    Disconnected,
    EndMismatch,
    NonManifold,
    NonOrientable,
)

BARY_TOL = 1e-12
LENGTH_RTOL = 1e-9


@dataclass(frozen=True)
class MeshPoint:
    """A point given by a face and barycentric coordinates in that face."""

    face: int
    bary: tuple[float, float, float]

    def __post_init__(self):
        b = self.bary
        if len(b) != 3:
            raise ValueError("barycentric coordinates need three entries")
        if min(b) < -1e-9 or abs(b[0] + b[1] + b[2] - 1.0) > 1e-9:
            raise ValueError(f"invalid barycentric coordinates {b}")


def make_point(face: int, b0: float, b1: float, b2: float) -> MeshPoint:
    """Clamp tiny coordinates to zero and renormalise to sum 1."""
    b0 = 0.0 if b0 < BARY_TOL else b0
    b1 = 0.0 if b1 < BARY_TOL else b1
    b2 = 0.0 if b2 < BARY_TOL else b2
    s = b0 + b1 + b2
    return MeshPoint(int(face), (b0 / s, b1 / s, b2 / s))


@dataclass
class End:
    """One truncated end: boundary loop, collar faces and omitted tail area."""

    boundary: list[int]
    collar_faces: frozenset[int]
    tail_area: float = 0.0


class SurfaceMesh:
    """Immutable intrinsic triangle mesh.

    Side ``i`` of face ``f`` is the edge from ``faces[f, i]`` to
    ``faces[f, (i + 1) % 3]``.  Faces are consistently oriented
    counter-clockwise; the local layout of face ``f`` puts corner 0 at the
    origin and corner 1 on the positive x axis.
    """

    def __init__(self, n_vertices, faces, side_lengths, ends=(), coords=None, meta=None):
        self.n_vertices = int(n_vertices)
        self.faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
        self.side_lengths = np.asarray(side_lengths, dtype=float).reshape(-1, 3)
        self.coords = None if coords is None else np.asarray(coords, dtype=float)
        self.meta = dict(meta or {})
        self._build_topology()
        self._build_geometry()
        self.ends: list[End] = list(ends)
        self.face_end = np.full(len(self.faces), -1, dtype=np.int64)
        for k, end in enumerate(self.ends):
            for f in end.collar_faces:
                self.face_end[f] = k
        self.mesh_area = float(self.face_areas.sum())
        self.total_area = self.mesh_area + sum(e.tail_area for e in self.ends)
        self._cache = {}

    # -- construction helpers -------------------------------------------------

    def _build_topology(self):
        F = self.faces
        nf = len(F)
        edge_index: dict[tuple[int, int], int] = {}
        face_edge = np.empty((nf, 3), dtype=np.int64)
        edge_faces: list[list[tuple[int, int]]] = []
        for f in range(nf):
            for i in range(3):
                a, b = int(F[f, i]), int(F[f, (i + 1) % 3])
                key = (a, b) if a < b else (b, a)
                e = edge_index.get(key)
                if e is None:
                    e = len(edge_faces)
                    edge_index[key] = e
                    edge_faces.append([])
                edge_faces[e].append((f, i))
                face_edge[f, i] = e
        self.edge_index = edge_index
        self.edges = np.array(sorted(edge_index, key=edge_index.get), dtype=np.int64).reshape(-1, 2)
        self.face_edge = face_edge
        self.edge_faces = edge_faces
        twin = np.full((nf, 3, 2), -1, dtype=np.int64)
        for e, inc in enumerate(edge_faces):
            if len(inc) > 2:
                raise NonManifold(f"edge {tuple(self.edges[e])} borders {len(inc)} triangles")
            if len(inc) == 2:
                (f, i), (g, j) = inc
                twin[f, i] = (g, j)
                twin[g, j] = (f, i)
        self.twin = twin
        self.boundary_edge = np.array([len(inc) == 1 for inc in edge_faces], dtype=bool)
        vf: list[list[tuple[int, int]]] = [[] for _ in range(self.n_vertices)]
        for f in range(nf):
            for i in range(3):
                vf[F[f, i]].append((f, i))
        self.vertex_corners = vf
        self.boundary_vertex = np.zeros(self.n_vertices, dtype=bool)
        for e in np.flatnonzero(self.boundary_edge):
            self.boundary_vertex[self.edges[e]] = True
        # plain-python copies for the hot loops
        self.faces_l = F.tolist()
        self.twin_l = [[(int(t[0]), int(t[1])) for t in row] for row in twin]
        self.face_edge_l = face_edge.tolist()

    def _build_geometry(self):
        L = self.side_lengths
        if L.shape != self.faces.shape:
            raise ValueError("need one length per face side")
        if np.any(L <= 0):
            raise DegenerateTriangle("non-positive edge length")
        a, b, c = L[:, 0], L[:, 1], L[:, 2]
        bad = (a >= b + c) | (b >= a + c) | (c >= a + b)
        if np.any(bad):
            f = int(np.flatnonzero(bad)[0])
            raise DegenerateTriangle(f"triangle {f} violates the triangle inequality: {L[f]}")
        # corner 0 at origin, corner 1 at (a, 0); corner 2 from |v0v2| = c, |v1v2| = b
        x2 = (a * a + c * c - b * b) / (2 * a)
        y2 = np.sqrt(np.maximum(c * c - x2 * x2, 0.0))
        lay = np.zeros((len(L), 3, 2))
        lay[:, 1, 0] = a
        lay[:, 2, 0] = x2
        lay[:, 2, 1] = y2
        self.layout = lay
        self.layout_l = lay.tolist()
        s = 0.5 * (a + b + c)
        self.face_areas = np.sqrt(np.maximum(s * (s - a) * (s - b) * (s - c), 0.0))
        # corner angle at vertex i lies between sides i and i-1; opposite side is i+1
        opp = np.stack([b, c, a], axis=1)
        adj1 = np.stack([a, b, c], axis=1)
        adj2 = np.stack([c, a, b], axis=1)
        cosang = np.clip((adj1**2 + adj2**2 - opp**2) / (2 * adj1 * adj2), -1.0, 1.0)
        self.corner_angles = np.arccos(cosang)
        self.corner_l = self.corner_angles.tolist()
        cone = np.zeros(self.n_vertices)
        np.add.at(cone, self.faces.ravel(), self.corner_angles.ravel())
        self.cone_angle = cone
        self.cone_l = cone.tolist()
        self.edge_lengths = np.empty(len(self.edges))
        for e, inc in enumerate(self.edge_faces):
            f, i = inc[0]
            self.edge_lengths[e] = L[f, i]
            if len(inc) == 2:
                g, j = inc[1]
                if abs(L[g, j] - L[f, i]) > 1e-9 * max(1.0, L[f, i]):
                    raise ValueError(f"inconsistent lengths for edge {tuple(self.edges[e])}")

    # -- basic queries --------------------------------------------------------

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def n_ends(self) -> int:
        return len(self.ends)

    @property
    def max_edge(self) -> float:
        return float(self.edge_lengths.max())

    @property
    def mean_edge(self) -> float:
        return float(self.edge_lengths.mean())

    def vertex_point(self, v: int) -> MeshPoint:
        f, i = self.vertex_corners[v][0]
        b = [0.0, 0.0, 0.0]
        b[i] = 1.0
        return MeshPoint(f, tuple(b))

    def face_centroid(self, f: int) -> MeshPoint:
        return MeshPoint(int(f), (1 / 3, 1 / 3, 1 / 3))

    def local_xy(self, p: MeshPoint, face: int | None = None) -> tuple[float, float]:
        f = p.face if face is None else face
        b = p.bary if face is None or face == p.face else bary_in(self, p, face)
        lay = self.layout_l[f]
        return (
            b[0] * lay[0][0] + b[1] * lay[1][0] + b[2] * lay[2][0],
            b[0] * lay[0][1] + b[1] * lay[1][1] + b[2] * lay[2][1],
        )

    def fan(self, v: int) -> list[tuple[int, int]]:
        """Corners around ``v`` in counter-clockwise order.

        For boundary vertices the fan starts at the clockwise-most face.
        """
        key = ("fan", v)
        if key in self._cache:
            return self._cache[key]
        corners = self.vertex_corners[v]
        start = corners[0]
        if self.boundary_vertex[v]:
            # walk clockwise until hitting the boundary
            f, i = start
            for _ in range(len(corners) + 1):
                g, j = self.twin_l[f][i]  # CW neighbour shares side i (v -> next)
                if g < 0:
                    break
                f, i = g, (j + 1) % 3
            start = (f, i)
        out = [start]
        f, i = start
        for _ in range(len(corners)):
            g, j = self.twin_l[f][(i + 2) % 3]  # CCW neighbour shares side i-1
            if g < 0:
                break
            f, i = g, j
            if (f, i) == start:
                break
            out.append((f, i))
        self._cache[key] = out
        return out

    def faces_of_point(self, p: MeshPoint) -> list[int]:
        """Faces whose closure contains ``p``."""
        kind, ent = locate(self, p)
        if kind == "face":
            return [ent]
        if kind == "edge":
            return [f for f, _ in self.edge_faces[ent]]
        return [f for f, _ in self.vertex_corners[ent]]

    def mesh_hash(self) -> str:
        import hashlib

        h = hashlib.sha256()
        h.update(self.faces.tobytes())
        h.update(np.round(self.side_lengths, 12).tobytes())
        return h.hexdigest()[:16]


# -- point helpers ------------------------------------------------------------

def locate(mesh: SurfaceMesh, p: MeshPoint):
    """Classify ``p`` as ``("vertex", v)``, ``("edge", e)`` or ``("face", f)``."""
    b0, b1, b2 = p.bary
    # plain bools: numpy bools add as logical or
    n0, n1, n2 = bool(b0 > BARY_TOL), bool(b1 > BARY_TOL), bool(b2 > BARY_TOL)
    if n0 and n1 and n2:
        return "face", p.face
    if n0 + n1 + n2 == 1:
        return "vertex", mesh.faces_l[p.face][0 if n0 else (1 if n1 else 2)]
    # two nonzero weights: side s runs F[s] -> F[s+1]
    side = 0 if not n2 else (1 if not n0 else 2)
    return "edge", mesh.face_edge_l[p.face][side]


def bary_in(mesh: SurfaceMesh, p: MeshPoint, face: int) -> tuple[float, float, float]:
    """Barycentric coordinates of ``p`` in ``face`` (which must contain it)."""
    if face == p.face:
        return p.bary
    src = mesh.faces_l[p.face]
    dst = mesh.faces_l[face]
    out = [0.0, 0.0, 0.0]
    for i in range(3):
        w = p.bary[i]
        if w <= BARY_TOL:
            continue
        try:
            out[dst.index(src[i])] = w
        except ValueError:
            raise CurveOffMesh(f"point {p} does not lie on face {face}") from None
    return out[0], out[1], out[2]


def on_face(mesh: SurfaceMesh, p: MeshPoint, face: int) -> bool:
    if face == p.face:
        return True
    src = mesh.faces_l[p.face]
    dst = mesh.faces_l[face]
    for i in range(3):
        if p.bary[i] > BARY_TOL and src[i] not in dst:
            return False
    kind, ent = locate(mesh, p)
    if kind == "face":
        return False
    if kind == "edge":
        return ent in mesh.face_edge_l[face]
    return True


def point_from_xy(mesh: SurfaceMesh, face: int, x: float, y: float) -> MeshPoint:
    lay = mesh.layout_l[face]
    (x0, y0), (x1, y1), (x2, y2) = lay
    det = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
    b1 = ((x - x0) * (y2 - y0) - (x2 - x0) * (y - y0)) / det
    b2 = ((x1 - x0) * (y - y0) - (x - x0) * (y1 - y0)) / det
    b0 = 1.0 - b1 - b2
    return make_point(face, max(b0, 0.0), max(b1, 0.0), max(b2, 0.0))


def same_location(mesh: SurfaceMesh, p: MeshPoint, q: MeshPoint, tol: float = 1e-12) -> bool:
    if p == q:
        return True
    kp, ep = locate(mesh, p)
    kq, eq = locate(mesh, q)
    if kp == "vertex" or kq == "vertex":
        return kp == kq and ep == eq
    if kp == "face" and kq == "face":
        return ep == eq and max(abs(a - b) for a, b in zip(p.bary, q.bary)) < tol
    if on_face(mesh, q, p.face):
        bq = bary_in(mesh, q, p.face)
        return max(abs(a - b) for a, b in zip(p.bary, bq)) < tol
    return False


# -- curves -------------------------------------------------------------------

@dataclass
class PolylineCurve:
    """Piecewise straight curve on the mesh.

    ``faces[k]`` is the triangle holding the straight segment from
    ``points[k]`` to ``points[k + 1]`` (for closed curves the last segment
    joins the last point back to the first).
    """

    points: list[MeshPoint]
    faces: list[int]
    closed: bool = False
    _length: float | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        need = len(self.points) if self.closed else max(len(self.points) - 1, 0)
        if self.closed and len(self.points) == 1:
            need = 0
        if len(self.faces) != need:
            raise ValueError(f"expected {need} segment faces, got {len(self.faces)}")

    @property
    def n_segments(self) -> int:
        return len(self.faces)

    def segment(self, k: int) -> tuple[MeshPoint, MeshPoint, int]:
        n = len(self.points)
        return self.points[k], self.points[(k + 1) % n], self.faces[k]

    @property
    def length(self) -> float:
        if self._length is None:
            raise ValueError("length not cached; use curve_length(mesh, curve)")
        return self._length

    def reversed(self) -> "PolylineCurve":
        if self.closed:
            pts = [self.points[0]] + self.points[:0:-1]
            fs = self.faces[::-1]
        else:
            pts = self.points[::-1]
            fs = self.faces[::-1]
        return PolylineCurve(pts, fs, self.closed, self._length)


def segment_lengths(mesh: SurfaceMesh, curve: PolylineCurve) -> list[float]:
    out = []
    for k in range(curve.n_segments):
        p, q, f = curve.segment(k)
        x0, y0 = mesh.local_xy(p, f)
        x1, y1 = mesh.local_xy(q, f)
        out.append(math.hypot(x1 - x0, y1 - y0))
    return out


def curve_length(mesh: SurfaceMesh, curve: PolylineCurve) -> float:
    """Intrinsic length of ``curve``; zero exactly for a point curve."""
    check_curve(mesh, curve)
    total = math.fsum(segment_lengths(mesh, curve))
    curve._length = total
    return total


def check_curve(mesh: SurfaceMesh, curve: PolylineCurve) -> None:
    for k in range(curve.n_segments):
        p, q, f = curve.segment(k)
        if not (0 <= f < mesh.n_faces):
            raise CurveOffMesh(f"segment {k} names unknown face {f}")
        if not on_face(mesh, p, f) or not on_face(mesh, q, f):
            raise CurveOffMesh(f"segment {k} endpoints are not on face {f}")


def point_curve(p: MeshPoint) -> PolylineCurve:
    c = PolylineCurve([p], [], closed=True)
    c._length = 0.0
    return c


def concatenate(mesh: SurfaceMesh, parts: Sequence[PolylineCurve], closed: bool = False) -> PolylineCurve:
    """Join open curves end to start; endpoints must coincide."""
    pts: list[MeshPoint] = []
    fs: list[int] = []
    for c in parts:
        if not c.points:
            continue
        if pts:
            if not same_location(mesh, pts[-1], c.points[0], 1e-9):
                raise CurveOffMesh("concatenated curves do not meet")
            pts.extend(c.points[1:])
        else:
            pts.extend(c.points)
        fs.extend(c.faces)
    if closed:
        if len(pts) > 1 and same_location(mesh, pts[-1], pts[0], 1e-9):
            pts.pop()
        else:
            raise CurveOffMesh("closing curve does not return to its start")
        if len(pts) == 1:
            fs = []
    out = PolylineCurve(pts, fs, closed)
    curve_length(mesh, out)
    return out


# -- construction ---------------------------------------------------------------

def _orient(faces: list[list[int]]) -> list[list[int]]:
    """Flip faces so every interior edge is used in opposite directions."""
    nf = len(faces)
    by_edge: dict[tuple[int, int], list[int]] = {}
    for f, (a, b, c) in enumerate(faces):
        for u, v in ((a, b), (b, c), (c, a)):
            by_edge.setdefault((min(u, v), max(u, v)), []).append(f)
    for key, inc in by_edge.items():
        if len(inc) > 2:
            raise NonManifold(f"edge {key} borders {len(inc)} triangles")
    faces = [list(t) for t in faces]
    state = [0] * nf  # 0 unvisited, 1 kept

    def directed(f):
        a, b, c = faces[f]
        return {(a, b), (b, c), (c, a)}

    for root in range(nf):
        if state[root]:
            continue
        state[root] = 1
        stack = [root]
        while stack:
            f = stack.pop()
            df = directed(f)
            a, b, c = faces[f]
            for u, v in ((a, b), (b, c), (c, a)):
                for g in by_edge[(min(u, v), max(u, v))]:
                    if g == f:
                        continue
                    if not state[g]:
                        if (u, v) in directed(g):
                            faces[g] = faces[g][::-1]
                        state[g] = 1
                        stack.append(g)
                    elif (u, v) in directed(g):
                        raise NonOrientable("surface is not orientable")
            del df
    return faces


def _boundary_loops(mesh: SurfaceMesh) -> list[list[int]]:
    nxt: dict[int, int] = {}
    for e in np.flatnonzero(mesh.boundary_edge):
        (f, i), = mesh.edge_faces[e]
        a, b = mesh.faces_l[f][i], mesh.faces_l[f][(i + 1) % 3]
        if b in nxt:
            raise NonManifold(f"boundary pinches at vertex {b}")
        nxt[b] = a  # walk with the region on the left
    loops = []
    seen: set[int] = set()
    for start in sorted(nxt):
        if start in seen:
            continue
        loop = [start]
        seen.add(start)
        v = nxt[start]
        while v != start:
            if v in seen:
                raise NonManifold("boundary is not a union of simple loops")
            loop.append(v)
            seen.add(v)
            v = nxt[v]
        loops.append(loop)
    return loops


def collar_from_depth(mesh: SurfaceMesh, boundary: Iterable[int], depth: int) -> frozenset[int]:
    """Faces within ``depth`` vertex rings of a boundary loop."""
    ring = set(boundary)
    faces: set[int] = set()
    for _ in range(depth):
        new = set()
        for v in ring:
            for f, _ in mesh.vertex_corners[v]:
                if f not in faces:
                    faces.add(f)
                    new.update(mesh.faces_l[f])
        ring = new - ring
    return frozenset(faces)


def build_mesh(raw_vertices, raw_triangles, end_spec=(), *, edge_lengths=None, meta=None) -> SurfaceMesh:
    """Validate raw data and return a :class:`SurfaceMesh`.

    Parameters
    ----------
    raw_vertices : array of shape (V, 3), or an int vertex count
        Vertex coordinates; edge lengths are then Euclidean distances.  When
        an int is given, ``edge_lengths`` must map vertex pairs to lengths.
    raw_triangles : sequence of vertex-id triples
    end_spec : sequence of dicts
        One entry per boundary component with keys ``tail_area`` and either
        ``collar_faces`` or ``collar_depth`` (default 2).  An optional
        ``boundary`` key (a vertex on the loop) pins the matching component;
        otherwise components are matched in order of their smallest vertex.
    edge_lengths : dict, optional
        ``{(u, v): length}`` for intrinsic input.
    """
    tris = [list(map(int, t)) for t in raw_triangles]
    if isinstance(raw_vertices, (int, np.integer)):
        nv = int(raw_vertices)
        coords = None
        if edge_lengths is None:
            raise ValueError("intrinsic input needs edge_lengths")
        lengths = {(min(u, v), max(u, v)): float(l) for (u, v), l in edge_lengths.items()}
    else:
        coords = np.asarray(raw_vertices, dtype=float)
        nv = len(coords)
        lengths = None
    if any(len(set(t)) != 3 for t in tris):
        raise DegenerateTriangle("triangle with repeated vertex")
    tris = _orient(tris)
    side = np.empty((len(tris), 3))
    for f, t in enumerate(tris):
        for i in range(3):
            u, v = t[i], t[(i + 1) % 3]
            if coords is not None:
                side[f, i] = float(np.linalg.norm(coords[u] - coords[v]))
            else:
                try:
                    side[f, i] = lengths[(min(u, v), max(u, v))]
                except KeyError:
                    raise ValueError(f"missing length for edge {(u, v)}") from None
    mesh = SurfaceMesh(nv, tris, side, (), coords, meta)
    used = np.zeros(nv, dtype=bool)
    used[mesh.faces.ravel()] = True
    if not used.all():
        raise Disconnected("isolated vertices present")
    _check_connected(mesh)
    loops = _boundary_loops(mesh)
    spec = list(end_spec)
    if len(loops) != len(spec):
        raise EndMismatch(f"{len(loops)} boundary components but {len(spec)} declared ends")
    ends = []
    remaining = list(loops)
    for s in spec:
        if "boundary" in s:
            match = [lp for lp in remaining if int(s["boundary"]) in lp]
            if not match:
                raise EndMismatch(f"no boundary loop contains vertex {s['boundary']}")
            loop = match[0]
        else:
            loop = min(remaining, key=min)
        remaining.remove(loop)
        if s.get("collar_faces") is not None:
            collar = frozenset(int(f) for f in s["collar_faces"])
        else:
            collar = collar_from_depth(mesh, loop, int(s.get("collar_depth", 2)))
        loopset = set(loop)
        for e in np.flatnonzero(mesh.boundary_edge):
            if set(mesh.edges[e]) <= loopset:
                (f, _), = mesh.edge_faces[e]
                if f not in collar:
                    raise EndMismatch("boundary edge outside its declared collar")
        tail = float(s.get("tail_area", 0.0))
        if tail < 0:
            raise ValueError("tail_area must be nonnegative")
        ends.append(End(loop, collar, tail))
    out = SurfaceMesh(nv, mesh.faces, mesh.side_lengths, ends, coords, meta)
    return out


def _check_connected(mesh: SurfaceMesh) -> None:
    seen = np.zeros(mesh.n_faces, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        f = stack.pop()
        for g, _ in mesh.twin_l[f]:
            if g >= 0 and not seen[g]:
                seen[g] = True
                stack.append(g)
    # faces glued only at a vertex still count as disconnected pieces
    if not seen.all():
        raise Disconnected("mesh has more than one edge-connected component")


def total_area(mesh: SurfaceMesh) -> float:
    """Heron sum over the faces plus every recorded tail area."""
    return mesh.total_area


def euler_characteristic(mesh: SurfaceMesh) -> int:
    return mesh.n_vertices - len(mesh.edges) + mesh.n_faces
