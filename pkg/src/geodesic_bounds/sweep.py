"""Min-max search over a sweepout by level sets of a distance field.

Shortening a level curve of ``d`` at a small value pulls it toward the
source, at a large value away from it.  Between an inward and an outward
level the shortening has to hang on a closed geodesic, which bisection on
the level value exposes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .birkhoff import Escape, Geodesic, Point, ShortenOpts, ShorteningTrace, shorten_closed
from .errors import SingularLevel
from .geodesic_engine import DistanceField, nudged_level_set
from .surface_core import PolylineCurve, SurfaceMesh


@dataclass
class SweepResult:
    trace: ShorteningTrace | None  # certified geodesic run, if any
    log: list = field(default_factory=list)  # (t, label, final length)

    @property
    def geodesic(self) -> PolylineCurve | None:
        return None if self.trace is None else self.trace.termination.curve


def _side_monitor(field_, t, margin, every=5):
    def mon(it, curve):
        if it % every:
            return None
        vals = [field_.at(p) for p in curve.points]
        if max(vals) < t - margin:
            return "inward"
        if min(vals) > t + margin:
            return "outward"
        return None
    return mon


def level_label(mesh: SurfaceMesh, field_: DistanceField, t: float, opts: ShortenOpts | None = None,
                pick=None, margin: float | None = None):
    """Shorten the level curve at ``t`` and say where it went.

    Returns ``(label, trace)`` with label ``"geodesic"``, ``"inward"``,
    ``"outward"`` or ``"unknown"``.  ``pick(components)`` selects the
    component to follow (default: the longest).
    """
    if margin is None:
        margin = 0.05 * math.sqrt(mesh.total_area)
    ls = nudged_level_set(field_, t)
    comps = [c for c, op in zip(ls.components, ls.open_flags) if not op and c.n_segments >= 3]
    if not comps:
        raise SingularLevel(f"no closed level component at t={t:.6g}")
    c = pick(comps) if pick is not None else max(comps, key=lambda c: c.length)
    tr = shorten_closed(mesh, c, opts, monitor=_side_monitor(field_, ls.t, margin))
    term = tr.termination
    if isinstance(term, Geodesic):
        return "geodesic", tr
    if isinstance(term, Point):
        return ("inward" if field_.at(term.point) < ls.t else "outward"), tr
    if isinstance(term, Escape) or term.reason == "stalled":
        vals = np.array([field_.at(p) for p in tr.final.points])
        if vals.max() < ls.t:
            return "inward", tr
        if vals.min() > ls.t:
            return "outward", tr
        return "unknown", tr
    if term.reason in ("inward", "outward"):
        return term.reason, tr
    return "unknown", tr


def sweep_minmax(mesh: SurfaceMesh, field_: DistanceField, lo: float | None = None, hi: float | None = None,
                 n_grid: int = 8, max_bisect: int = 40, opts: ShortenOpts | None = None, pick=None) -> SweepResult:
    """Look for a closed geodesic between an inward and an outward level.

    The grid has ``n_grid`` interior values of ``(lo, hi)``; the first
    inward/outward neighbours are refined by bisection until a shortening
    run certifies a geodesic.
    """
    top = field_.max_value
    lo = 0.0 if lo is None else lo
    hi = top if hi is None else hi
    res = SweepResult(None)

    def run(t):
        try:
            label, tr = level_label(mesh, field_, t, opts, pick)
        except SingularLevel:
            res.log.append((t, "singular", math.nan))
            return "unknown", None
        res.log.append((t, label, tr.final.length))
        if label == "geodesic":
            res.trace = tr
        return label, tr

    grid = [lo + (hi - lo) * (i + 1) / (n_grid + 1) for i in range(n_grid)]
    labels = []
    for t in grid:
        lab, _ = run(t)
        if res.trace is not None:
            return res
        labels.append(lab)
    brackets = [(a, b) for (a, la), (b, lb) in zip(zip(grid, labels), zip(grid[1:], labels[1:]))
                if la == "inward" and lb == "outward"]
    for a, b in brackets:
        for _ in range(max_bisect):
            if b - a <= 1e-9 * max(top, 1.0):
                break
            mid = 0.5 * (a + b)
            lab, _ = run(mid)
            if res.trace is not None:
                return res
            if lab == "inward":
                a = mid
            elif lab == "outward":
                b = mid
            else:
                break
    return res
