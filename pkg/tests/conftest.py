import numpy as np
import pytest

from schwarzleaf import build_fiber
from schwarzleaf.base2d import ProfileSpec, Warping


@pytest.fixture(scope="session")
def schw():
    """Exterior Schwarzschild, M = 1, four dimensions."""
    return ProfileSpec(mass=1.0).with_domain((0.5, 60.0))


@pytest.fixture(scope="session")
def mink():
    return ProfileSpec(mass=0.0).with_domain((0.1, 60.0))


@pytest.fixture(scope="session")
def schw_r2():
    return ProfileSpec(mass=1.0, warping=Warping.custom("r^2")).with_domain((0.5, 60.0))


@pytest.fixture(scope="session")
def sphere4():
    return build_fiber({"backend": "trimesh", "kind": "sphere", "level": 4})


@pytest.fixture(scope="session")
def sphere5():
    return build_fiber({"backend": "trimesh", "kind": "sphere", "level": 5})


@pytest.fixture(scope="session")
def grid_mid():
    return build_fiber({"backend": "chartgrid", "kind": "sphere", "shape": [65, 128]})


@pytest.fixture(scope="session")
def grid_fine():
    return build_fiber({"backend": "chartgrid", "kind": "sphere", "shape": [129, 256]})


def equator(fd):
    """Indices of ChartGrid points on the equator theta = pi/2."""
    return np.flatnonzero(np.isclose(fd.coords[:, 0], np.pi / 2, atol=1e-12))
