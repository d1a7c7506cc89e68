import numpy as np
import pytest

from diffcurve.curves import BOUNDARY, CurveSet, rect_boundary_curve
from diffcurve.meshing import partition_components


@pytest.fixture(scope="session")
def unit_square_component():
    boundary = CurveSet([rect_boundary_curve((0, 0, 1, 1), h=1 / 16)], [BOUNDARY])
    return partition_components((0, 0, 1, 1), boundary)[0]


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)


def radial_bump_fn(p):
    r2 = (p[:, 0] - 0.5) ** 2 + (p[:, 1] - 0.5) ** 2
    v = np.exp(-r2 / 0.04)
    return np.stack([v, 0.5 * v, 1 - 0.5 * v], axis=1)


def radial_bump_grad(p):
    r2 = (p[:, 0] - 0.5) ** 2 + (p[:, 1] - 0.5) ** 2
    v = np.exp(-r2 / 0.04)
    dvdx = v * (-2 * (p[:, 0] - 0.5) / 0.04)
    dvdy = v * (-2 * (p[:, 1] - 0.5) / 0.04)
    g = np.empty((len(p), 2, 3))
    g[:, 0, 0] = dvdx
    g[:, 1, 0] = dvdy
    g[:, 0, 1] = 0.5 * dvdx
    g[:, 1, 1] = 0.5 * dvdy
    g[:, 0, 2] = -0.5 * dvdx
    g[:, 1, 2] = -0.5 * dvdy
    return g
