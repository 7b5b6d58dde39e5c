import pytest

from vrrw.weights import homogeneous, linear_weight, make_power_weight


@pytest.fixture
def const_env():
    return homogeneous(make_power_weight(0))


@pytest.fixture
def linear_env():
    return homogeneous(linear_weight())


@pytest.fixture
def env03():
    return homogeneous(make_power_weight(0.3))
