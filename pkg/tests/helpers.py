"""Shared test utilities: cached meshes and pipeline runs, flat-mesh points."""

import functools
import math
import time

from geodesic_bounds import surface_gen as g
from geodesic_bounds.geodesic_engine import shortest_path
from geodesic_bounds.surface_core import concatenate, make_point

# criterion number -> result line, printed at the end of the session
ACCEPTANCE = {}


def record(n, ok, text):
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {text}"
    ACCEPTANCE[n] = line
    print(line)


@functools.lru_cache(maxsize=None)
def mesh(name):
    if name == "cc":
        return g.gen_calabi_croke(1.0, refinement=4)
    if name == "cc_cusp":
        return g.gen_calabi_croke(1.0, cusps=[0], refinement=4)
    if name == "lorentzian":
        return g.gen_revolution(g.lorentzian, dr=g.lorentzian_dr)
    if name == "sphere2":
        return g.sphere(1.0, level=2)
    if name == "torus":
        return g.flat_torus(1.0, 2.0, refinement=3)
    raise KeyError(name)


@functools.lru_cache(maxsize=None)
def timed(kind, name):
    """``(result, seconds)`` of a pipeline or oracle run, cached per session."""
    from geodesic_bounds.oracle import brute_force_shortest_geodesic
    from geodesic_bounds.pipelines import estimate_l, one_end_pipeline, two_end_pipeline

    m = mesh(name)
    fn = {"estimate": estimate_l, "one_end": one_end_pipeline, "two_end": two_end_pipeline,
          "oracle": lambda m: brute_force_shortest_geodesic(m, 100)}[kind]
    t = time.perf_counter()
    out = fn(m)
    return out, time.perf_counter() - t


def grid_point(mesh_, x, y):
    """Point at planar position (x, y) on a flat torus or cylinder grid."""
    meta = mesh_.meta
    if meta["kind"] == "flat_torus":
        nx, ny = meta["nx"], meta["ny"]
        dx, dy = meta["a"] / nx, meta["b"] / ny
        wrap_y = True
    else:
        nx, ny = meta["m"], meta["nz"]
        dx, dy = meta["circumference"] / nx, meta["length"] / ny
        wrap_y = False
    i, j = int(math.floor(x / dx)), min(int(math.floor(y / dy)), ny - 1)
    u, v = x / dx - i, y / dy - j

    def vid(a, b):
        return (a % nx) + nx * (b % ny if wrap_y else b)

    v00, v10, v01, v11 = vid(i, j), vid(i + 1, j), vid(i, j + 1), vid(i + 1, j + 1)
    w = {v00: 1 - u, v10: u - v, v11: v} if v <= u else {v00: 1 - v, v11: u, v01: v - u}
    f = _face_index(mesh_)[frozenset(w)]
    return make_point(f, *[max(w[c], 0.0) for c in mesh_.faces_l[f]])


def _face_index(mesh_):
    idx = mesh_._cache.get("test_face_index")
    if idx is None:
        idx = mesh_._cache["test_face_index"] = {frozenset(t): f for f, t in enumerate(mesh_.faces_l)}
    return idx


def grid_cell(mesh_, f):
    """Lower-left grid cell of a face on a flat torus or cylinder."""
    meta = mesh_.meta
    nx = meta["nx"] if meta["kind"] == "flat_torus" else meta["m"]
    ny = meta["ny"] if meta["kind"] == "flat_torus" else meta["nz"] + 1
    ii = [v % nx for v in mesh_.faces_l[f]]
    jj = [v // nx for v in mesh_.faces_l[f]]
    i0 = min(ii) if max(ii) - min(ii) <= 1 else max(ii)
    j0 = min(jj) if max(jj) - min(jj) <= 1 else max(jj)
    return i0, j0 % ny


def polygon(mesh_, pts):
    """Closed curve through planar points, joined by shortest paths."""
    ps = [grid_point(mesh_, *p) for p in pts]
    parts = [shortest_path(mesh_, ps[k], ps[(k + 1) % len(ps)]) for k in range(len(ps))]
    return concatenate(mesh_, parts, closed=True)


def faces_beyond(mesh_, x0, axis=0, sign=1.0):
    """Faces whose vertices all satisfy ``sign * coord >= x0``."""
    X = sign * mesh_.coords[:, axis]
    return {f for f in range(mesh_.n_faces) if X[mesh_.faces[f]].min() >= x0 - 1e-12}
