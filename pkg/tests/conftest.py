import pytest

from dlphase.channel import QuadratureSpec


@pytest.fixture(scope="session")
def quad():
    return QuadratureSpec.gauss_hermite(101)


@pytest.fixture(scope="session")
def quad201():
    return QuadratureSpec.gauss_hermite(201)
