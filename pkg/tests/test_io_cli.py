import json

import numpy as np
import pytest

from geodesic_bounds import surface_gen as g
from geodesic_bounds.cli import EXIT_CONFIG, EXIT_MESH, EXIT_OK, RunConfig, main, parse_overrides, parse_surface
from geodesic_bounds.errors import ConfigError
from geodesic_bounds.io import curve_from_dict, curve_to_dict, read_kv, read_off, write_off
from geodesic_bounds.surface_core import curve_length

import helpers


# -- OFF round trips ---------------------------------------------------------------------

@pytest.mark.parametrize("name", ["cc", "cc_cusp", "lorentzian"])
def test_off_round_trip(tmp_path, name):
    m = helpers.mesh(name)
    write_off(tmp_path / "m.off", m)
    back = read_off(tmp_path / "m.off")
    assert back.n_vertices == m.n_vertices and back.n_faces == m.n_faces
    assert back.n_ends == m.n_ends
    assert back.total_area == pytest.approx(m.total_area, rel=1e-12)
    for a, b in zip(back.ends, m.ends):
        assert list(a.boundary) == list(b.boundary)
        assert a.collar_faces == b.collar_faces
        assert a.tail_area == b.tail_area
    assert np.allclose(back.cone_angle, m.cone_angle)


def test_intrinsic_round_trip(tmp_path):
    from geodesic_bounds.pipelines import compactify

    hat = compactify(helpers.mesh("cc_cusp"), 0)
    assert hat.coords is None
    write_off(tmp_path / "hat.off", hat)
    back = read_off(tmp_path / "hat.off")
    assert back.total_area == pytest.approx(hat.total_area, rel=1e-12)
    assert np.allclose(back.cone_angle, hat.cone_angle)


def test_curve_dict_round_trip(torus):
    c = helpers.polygon(torus, [(0.1, 0.1), (0.5, 0.2), (0.3, 0.7)])
    d = json.loads(json.dumps(curve_to_dict(c)))
    back = curve_from_dict(d)
    assert back.closed and curve_length(torus, back) == pytest.approx(c.length, rel=1e-12)


def test_read_kv(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("# comment\nsurface = sphere:radius=2\n\ncommand=gen\n")
    assert read_kv(p) == {"surface": "sphere:radius=2", "command": "gen"}


def test_not_off(tmp_path):
    p = tmp_path / "bad.off"
    p.write_text("PLY\n")
    with pytest.raises(ConfigError):
        read_off(p)


# -- argument parsing -------------------------------------------------------------------

def test_parse_surface():
    spec = parse_surface("calabi_croke:h=1.5,cusps=0+2,refinement=5")
    assert spec.kind == "calabi_croke" and spec.params == {"h": 1.5}
    assert list(spec.cusps) == [0, 2] and spec.refinement == 5
    assert parse_surface("revolution:profile=lorentzian").params == {"profile": "lorentzian"}
    with pytest.raises(ConfigError):
        parse_surface("klein_bottle")
    with pytest.raises(ConfigError):
        parse_surface("sphere:radius")


def test_parse_overrides():
    assert parse_overrides(["max_iters=50", "tol=0.1"]) == {"max_iters": 50, "tol": 0.1}
    for bad in (["max_iters"], ["nope=1"], ["max_iters=x"]):
        with pytest.raises(ConfigError):
            parse_overrides(bad)


def test_run_config_rejects_unknown(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig("sphere", "plot", tmp_path)


# -- the command line ----------------------------------------------------------------------

def test_gen_writes_loadable_mesh(tmp_path):
    assert main(["--surface", "calabi_croke:h=1,refinement=3", "--command", "gen", "--out", str(tmp_path)]) == EXIT_OK
    m = read_off(tmp_path / "mesh.off")
    assert m.total_area == pytest.approx(g.gen_calabi_croke(1.0, refinement=3).total_area, rel=1e-12)
    out = json.loads((tmp_path / "gen.json").read_text())
    assert out["exit_code"] == EXIT_OK
    assert out["mesh"]["mesh_hash"] == m.mesh_hash()


def test_gen_is_deterministic(tmp_path):
    for d in ("a", "b"):
        main(["--surface", "sphere:radius=1,refinement=2", "--command", "gen", "--out", str(tmp_path / d)])
    assert (tmp_path / "a" / "gen.json").read_text() == (tmp_path / "b" / "gen.json").read_text()
    assert (tmp_path / "a" / "mesh.off").read_bytes() == (tmp_path / "b" / "mesh.off").read_bytes()


def test_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"surface = flat_torus:a=1,b=2\ncommand = gen\nout = {tmp_path / 'o'}\n")
    assert main(["--config", str(cfg)]) == EXIT_OK
    assert (tmp_path / "o" / "mesh.off").exists()


def test_exit_config(tmp_path, capsys):
    assert main(["--surface", "sphere", "--command", "gen", "--set", "bogus=1", "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["--command", "gen", "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_exit_mesh(tmp_path):
    # three triangles on one edge
    p = tmp_path / "fan.off"
    p.write_text("OFF\n5 3 0\n0 0 0\n1 0 0\n0 1 0\n0 -1 0\n0 0 1\n3 0 1 2\n3 1 0 3\n3 0 1 4\n")
    assert main(["--surface", str(p), "--command", "gen", "--out", str(tmp_path / "o")]) == EXIT_MESH


def test_scan_needs_an_end(tmp_path):
    assert main(["--surface", "flat_torus", "--command", "scan", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_verify_torus(tmp_path):
    code = main(["--surface", "flat_torus:a=1,b=2", "--command", "verify", "--set", "n_seeds=100",
                 "--out", str(tmp_path)])
    assert code == EXIT_OK
    out = json.loads((tmp_path / "verify.json").read_text())
    assert out["passed"] and out["analytic"] == 1.0
    assert out["report"]["length"] == pytest.approx(1.0, rel=1e-3)
    assert (tmp_path / "verify.txt").read_text().count("pass") == 3


def test_estimate_on_off_mesh(tmp_path):
    write_off(tmp_path / "t.off", helpers.mesh("torus"))
    assert main(["--surface", str(tmp_path / "t.off"), "--command", "estimate", "--out", str(tmp_path)]) == EXIT_OK
    out = json.loads((tmp_path / "estimate.json").read_text())
    assert out["report"]["length"] == pytest.approx(1.0, rel=1e-3)
    assert out["report"]["geodesic"]["closed"]
