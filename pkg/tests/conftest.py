import math

import pytest

from fermisect import CurveModel


@pytest.fixture(scope="session")
def circle():
    return CurveModel.circle()


@pytest.fixture(scope="session")
def ellipse():
    return CurveModel.ellipse(2.0, 1.0)


@pytest.fixture(scope="session")
def ellipse_dispersion():
    return CurveModel.dispersion("k1^2/4 + k2^2 - 1")


@pytest.fixture(scope="session")
def pert():
    """The strongly asymmetric test curve h = 1 + 0.05 cos(3 theta)."""
    return CurveModel.support([(0, 1.0, 0.0), (3, 0.05, 0.0)])


TWO_PI = 2.0 * math.pi
