"""Mesh files (OFF plus a key-value sidecar) and JSON reports.

The sidecar sits next to the OFF file with suffix ``.ends`` and holds one
``key = value`` pair per line::

    metric = euclidean
    end.0.boundary = 17
    end.0.tail_area = 0.0125
    end.0.collar_faces = 3 4 9 12
    edge.4.19 = 0.2531
    meta.kind = "calabi_croke"

``metric`` is ``euclidean`` (lengths from the OFF coordinates) or
``intrinsic`` (lengths from the ``edge.u.v`` lines).  ``end.k.boundary`` is
any vertex on the k-th boundary loop; ``meta`` values are JSON.  Lines
starting with ``#`` are comments.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .surface_core import MeshPoint, PolylineCurve, SurfaceMesh, build_mesh


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".ends")


def write_off(path, mesh: SurfaceMesh) -> None:
    """Write ``mesh`` as OFF plus sidecar.  Meshes without coordinates get
    zero coordinates and the intrinsic edge lengths in the sidecar."""
    path = Path(path)
    coords = mesh.coords if mesh.coords is not None else np.zeros((mesh.n_vertices, 3))
    lines = ["OFF", f"{mesh.n_vertices} {mesh.n_faces} {len(mesh.edges)}"]
    lines += [" ".join(repr(float(x)) for x in row) for row in coords]
    lines += ["3 " + " ".join(str(int(v)) for v in tri) for tri in mesh.faces]
    path.write_text("\n".join(lines) + "\n")
    side = [f"metric = {'euclidean' if mesh.coords is not None else 'intrinsic'}"]
    for k, end in enumerate(mesh.ends):
        side.append(f"end.{k}.boundary = {int(end.boundary[0])}")
        side.append(f"end.{k}.tail_area = {end.tail_area!r}")
        side.append(f"end.{k}.collar_faces = " + " ".join(str(f) for f in sorted(end.collar_faces)))
    if mesh.coords is None:
        for e, (u, v) in enumerate(mesh.edges.tolist()):
            side.append(f"edge.{u}.{v} = {float(mesh.edge_lengths[e])!r}")
    for key, val in sorted(mesh.meta.items()):
        try:
            side.append(f"meta.{key} = {json.dumps(val)}")
        except TypeError:
            continue
    sidecar_path(path).write_text("\n".join(side) + "\n")


def read_kv(path) -> dict:
    """Key-value text file as a dict of strings."""
    out = {}
    for n, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected 'key = value'")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def read_off(path) -> SurfaceMesh:
    """Read an OFF mesh and its sidecar (when present)."""
    path = Path(path)
    tokens = []
    for raw in path.read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            tokens.append(line)
    if not tokens or not tokens[0].startswith("OFF"):
        raise ConfigError(f"{path}: not an OFF file")
    head = tokens[0][3:].split() or tokens.pop(1).split()
    nv, nf = int(head[0]), int(head[1])
    body = tokens[1:]
    coords = np.array([[float(x) for x in body[i].split()[:3]] for i in range(nv)])
    tris = []
    for i in range(nv, nv + nf):
        parts = [int(x) for x in body[i].split()]
        if parts[0] != 3:
            raise ConfigError(f"{path}: only triangles are supported")
        tris.append(parts[1:4])
    kv = read_kv(sidecar_path(path)) if sidecar_path(path).exists() else {}
    ends = {}
    lengths = {}
    meta = {}
    for k, v in kv.items():
        parts = k.split(".")
        if parts[0] == "end" and len(parts) == 3:
            ends.setdefault(int(parts[1]), {})[parts[2]] = v
        elif parts[0] == "edge" and len(parts) == 3:
            lengths[(int(parts[1]), int(parts[2]))] = float(v)
        elif parts[0] == "meta":
            meta[".".join(parts[1:])] = json.loads(v)
    spec = []
    for k in sorted(ends):
        e = ends[k]
        d = {"tail_area": float(e.get("tail_area", 0.0))}
        if "boundary" in e:
            d["boundary"] = int(e["boundary"])
        if "collar_faces" in e:
            d["collar_faces"] = [int(x) for x in e["collar_faces"].split()]
        if "collar_depth" in e:
            d["collar_depth"] = int(e["collar_depth"])
        spec.append(d)
    if kv.get("metric", "euclidean") == "intrinsic":
        return build_mesh(nv, tris, spec, edge_lengths=lengths, meta=meta)
    return build_mesh(coords, tris, spec, meta=meta)


# -- reports -------------------------------------------------------------------

def curve_to_dict(curve: PolylineCurve | None) -> dict | None:
    if curve is None:
        return None
    return {
        "closed": curve.closed,
        "length": curve.length,
        "points": [[p.face, *map(float, p.bary)] for p in curve.points],
        "faces": [int(f) for f in curve.faces],
    }


def curve_from_dict(d: dict) -> PolylineCurve:
    pts = [MeshPoint(int(r[0]), tuple(r[1:4])) for r in d["points"]]
    return PolylineCurve(pts, [int(f) for f in d["faces"]], bool(d["closed"]))


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, PolylineCurve):
        return curve_to_dict(x)
    return x


def write_json(path, data: dict) -> None:
    """Deterministic JSON (sorted keys, non-finite numbers as null)."""
    Path(path).write_text(json.dumps(_clean(data), indent=2, sort_keys=True) + "\n")
