"""Command line front end.

    geodesic-bounds --surface calabi_croke:h=1,refinement=4 --command estimate --out run/
    geodesic-bounds --surface mesh.off --command verify --set n_seeds=200

Commands: ``gen`` (write the mesh), ``estimate`` (pipeline report),
``oracle`` (brute-force search), ``scan`` (dichotomy scan CSV) and
``verify`` (estimate plus oracle, checked against the bound).

Exit codes: 0 success, 1 verify mismatch against the oracle, 2 bad
configuration, 3 invalid mesh, 4 inconclusive search, 5 bound violated.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from .birkhoff import ShortenOpts
from .errors import ConfigError, GeodesicError, MeshError
from .io import curve_to_dict, read_kv, read_off, write_json, write_off

EXIT_OK, EXIT_MISMATCH, EXIT_CONFIG, EXIT_MESH, EXIT_INCONCLUSIVE, EXIT_BOUND = 0, 1, 2, 3, 4, 5
COMMANDS = ("gen", "estimate", "oracle", "scan", "verify")

# overridable parameters and their types
PARAMS = {
    "max_iters": int,
    "eps_point": float,
    "tol_angle": float,
    "rho": float,
    "stall_iters": int,
    "n_seeds": int,
    "dt": float,
    "tol": float,
}
DEFAULTS = {"n_seeds": 200, "tol": 0.02}

log = logging.getLogger("geodesic_bounds")


@dataclass
class RunConfig:
    surface: str
    command: str
    output_dir: Path
    seed: int = 0
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}; choose from {', '.join(COMMANDS)}")
        for k in self.overrides:
            if k not in PARAMS:
                raise ConfigError(f"unknown parameter {k!r}")

    def get(self, key):
        return self.overrides.get(key, DEFAULTS.get(key))

    def shorten_opts(self) -> ShortenOpts | None:
        kw = {k: self.overrides[k] for k in ("max_iters", "eps_point", "tol_angle", "rho", "stall_iters")
              if k in self.overrides}
        return ShortenOpts(**kw) if kw else None


def parse_overrides(items) -> dict:
    out = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        k, v = (s.strip() for s in item.split("=", 1))
        if k not in PARAMS:
            raise ConfigError(f"unknown parameter {k!r}")
        try:
            out[k] = PARAMS[k](v)
        except ValueError:
            raise ConfigError(f"bad value for {k}: {v!r}") from None
    return out


def parse_surface(text: str):
    """``kind[:key=value,...]`` as a SurfaceSpec (``cusps`` joined by ``+``)."""
    from .surface_gen import SurfaceSpec

    kind, _, rest = text.partition(":")
    params, cusps, refinement = {}, [], None
    for item in filter(None, (s.strip() for s in rest.split(","))):
        if "=" not in item:
            raise ConfigError(f"surface parameter {item!r} is not key=value")
        k, v = (s.strip() for s in item.split("=", 1))
        if k == "cusps":
            cusps = [int(c) for c in v.split("+") if c]
        elif k == "refinement":
            refinement = int(v)
        elif k == "profile":
            params[k] = v
        else:
            try:
                params[k] = float(v)
            except ValueError:
                raise ConfigError(f"bad surface parameter {k}={v!r}") from None
    if refinement is None:
        refinement = 4 if kind == "calabi_croke" else 3
    try:
        return SurfaceSpec(kind, params, cusps, refinement)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_surface(text: str):
    """Mesh and (for generated surfaces) its spec."""
    from .surface_gen import generate

    if text.endswith(".off") or Path(text).is_file():
        return read_off(text), None
    spec = parse_surface(text)
    return generate(spec), spec


def _mesh_info(mesh) -> dict:
    return {"n_vertices": mesh.n_vertices, "n_faces": mesh.n_faces, "n_ends": mesh.n_ends,
            "area": mesh.total_area, "max_edge": mesh.max_edge, "mesh_hash": mesh.mesh_hash()}


def _report_dict(rep) -> dict:
    d = rep.summary()
    d["geodesic"] = curve_to_dict(rep.geodesic)
    return d


def _cmd_gen(cfg, mesh, spec, out):
    write_off(out / "mesh.off", mesh)
    return {"mesh": _mesh_info(mesh)}, EXIT_OK


def _cmd_estimate(cfg, mesh, spec, out):
    from .pipelines import estimate_l

    rep = estimate_l(mesh, cfg.shorten_opts(), cfg.seed)
    data = {"mesh": _mesh_info(mesh), "report": _report_dict(rep)}
    code = EXIT_OK if rep.within_bound else EXIT_BOUND
    return data, code


def _cmd_oracle(cfg, mesh, spec, out):
    from .oracle import analytic_reference, brute_force_shortest_geodesic

    res = brute_force_shortest_geodesic(mesh, cfg.get("n_seeds"), cfg.seed, opts=cfg.shorten_opts())
    d = res.summary()
    d["best_curve"] = curve_to_dict(res.best_curve)
    d["analytic"] = analytic_reference(spec) if spec is not None else None
    return {"mesh": _mesh_info(mesh), "oracle": d}, EXIT_OK


def _cmd_scan(cfg, mesh, spec, out):
    from .geodesic_engine import geodesic_line, geodesic_ray
    from .loop_finder import Pair, dichotomy_scan, write_scan_csv
    from .pipelines import _far_vertex

    if mesh.n_ends >= 2:
        tau = geodesic_line(mesh, 0, 1)
    elif mesh.n_ends == 1:
        tau = geodesic_ray(mesh, mesh.vertex_point(_far_vertex(mesh, 0)), 0)
    else:
        raise ConfigError("scan needs a surface with at least one end")
    res = dichotomy_scan(mesh, tau, dt=cfg.get("dt"), opts=cfg.shorten_opts(), seed=cfg.seed)
    write_scan_csv(out / "scan.csv", res)
    d = {"n_samples": len(res.samples), "coarea_sum": res.coarea_sum, "dt": res.dt,
         "outcome": type(res.outcome).__name__ if res.outcome is not None else None,
         "candidates": [s.t for s in res.candidates], "warnings": res.warnings}
    if isinstance(res.outcome, Pair):
        p = res.outcome
        d["pair"] = {"t0": p.t0, "t_gap": p.t_gap, "length_minus": p.loop_minus.length,
                     "length_plus": p.loop_plus.length, "disjoint": p.disjoint}
    return {"mesh": _mesh_info(mesh), "scan": d}, EXIT_OK


def _cmd_verify(cfg, mesh, spec, out):
    from .oracle import analytic_reference, brute_force_shortest_geodesic
    from .pipelines import estimate_l

    rep = estimate_l(mesh, cfg.shorten_opts(), cfg.seed)
    res = brute_force_shortest_geodesic(mesh, cfg.get("n_seeds"), cfg.seed, opts=cfg.shorten_opts())
    tol = cfg.get("tol")
    rel = abs(rep.length - res.best_length) / res.best_length
    checks = {
        "within_bound": rep.within_bound,
        "matches_oracle": rel <= tol,
        "not_below_oracle": rep.length >= res.best_length * (1 - 0.01),
    }
    d = {"mesh": _mesh_info(mesh), "report": _report_dict(rep), "oracle_length": res.best_length,
         "relative_difference": rel, "tol": tol, "checks": checks,
         "analytic": analytic_reference(spec) if spec is not None else None,
         "passed": all(checks.values())}
    lines = [f"{k}: {'pass' if v else 'FAIL'}" for k, v in checks.items()]
    (out / "verify.txt").write_text("\n".join(lines) + "\n")
    if not checks["within_bound"]:
        return d, EXIT_BOUND
    return d, EXIT_OK if d["passed"] else EXIT_MISMATCH


HANDLERS = {"gen": _cmd_gen, "estimate": _cmd_estimate, "oracle": _cmd_oracle, "scan": _cmd_scan,
            "verify": _cmd_verify}


def run(cfg: RunConfig) -> int:
    """Execute one command and write ``<command>.json`` (plus timing in
    ``run_info``) into the output directory."""
    from .errors import Inconclusive, NoneFound

    out = Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory: {exc}") from None
    start = time.time()
    mesh, spec = load_surface(cfg.surface)
    try:
        data, code = HANDLERS[cfg.command](cfg, mesh, spec, out)
    except (Inconclusive, NoneFound) as exc:
        data, code = {"mesh": _mesh_info(mesh), "error": type(exc).__name__, "message": str(exc)}, EXIT_INCONCLUSIVE
    data["config"] = {"surface": cfg.surface, "command": cfg.command, "seed": cfg.seed,
                      "overrides": dict(sorted(cfg.overrides.items()))}
    data["exit_code"] = code
    write_json(out / f"{cfg.command}.json", data)
    write_json(out / "run_info.json", {"started": start, "elapsed_s": time.time() - start})
    return code


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="geodesic-bounds", description=__doc__.split("\n\n")[0])
    p.add_argument("--config", help="key-value file with defaults for the flags below")
    p.add_argument("--surface", help="surface spec kind[:k=v,...] or an OFF mesh path")
    p.add_argument("--command", choices=COMMANDS)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory (default: out)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="parameter override")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def config_from_args(args) -> RunConfig:
    base = read_kv(args.config) if args.config else {}
    sets = [f"{k}={v}" for k, v in base.items() if k in PARAMS] + list(args.set)
    surface = args.surface or base.get("surface")
    command = args.command or base.get("command")
    if not surface or not command:
        raise ConfigError("both --surface and --command are required")
    seed = args.seed if args.seed is not None else int(base.get("seed", 0))
    out = args.out or base.get("out", "out")
    return RunConfig(surface, command, Path(out), seed, parse_overrides(sets))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = config_from_args(args)
        return run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MeshError as exc:
        print(f"mesh error: {exc}", file=sys.stderr)
        return EXIT_MESH
    except GeodesicError as exc:
        print(f"inconclusive: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INCONCLUSIVE


if __name__ == "__main__":
    sys.exit(main())
