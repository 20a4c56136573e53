"""Shared fixtures: the reference shallow-water scenario."""

import numpy as np
import pytest

from sspest.field import BasisGrid, Region
from sspest.propagation import Environment, RayFanConfig


@pytest.fixture(scope="session")
def region():
    return Region(2000.0, 50.0)


@pytest.fixture(scope="session")
def basis(region):
    return BasisGrid.uniform(6, 6, region,
                             spread_range=(2000.0 / 6) ** 2,
                             spread_depth=(50.0 / 6) ** 2)


@pytest.fixture(scope="session")
def env():
    return Environment()


@pytest.fixture(scope="session")
def flat_theta(basis):
    theta = np.zeros(basis.count + 1)
    theta[0] = 1500.0
    return theta


@pytest.fixture(scope="session")
def free_field_cfg():
    """No boundary interaction: direct-path spreading only."""
    return RayFanConfig(num_rays=181, span_deg=60.0, step_length=1.0,
                        max_bounces=0)
