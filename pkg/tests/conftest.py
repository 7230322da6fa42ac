import math
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from geodesic_bounds import surface_gen as g  # noqa: E402

import helpers  # noqa: E402


@pytest.fixture(scope="session")
def cc():
    return helpers.mesh("cc")


@pytest.fixture(scope="session")
def cc_small():
    return g.gen_calabi_croke(1.0, refinement=2)


@pytest.fixture(scope="session")
def cc_cusp():
    return helpers.mesh("cc_cusp")


@pytest.fixture(scope="session")
def torus():
    return helpers.mesh("torus")


@pytest.fixture(scope="session")
def sphere2():
    return helpers.mesh("sphere2")


@pytest.fixture(scope="session")
def cylinder():
    return g.flat_cylinder()


@pytest.fixture(scope="session")
def lorentzian():
    return helpers.mesh("lorentzian")


@pytest.fixture(scope="session")
def funnel():
    return g.generate(g.SurfaceSpec("revolution", {"profile": "exp_hemisphere"}))


@pytest.fixture(scope="session")
def lorentzian_area():
    return g.revolution_area(g.lorentzian, (-math.inf, math.inf), dr=g.lorentzian_dr)


def pytest_terminal_summary(terminalreporter):
    if helpers.ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(helpers.ACCEPTANCE):
            terminalreporter.write_line(helpers.ACCEPTANCE[n])
