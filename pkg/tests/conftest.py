import math

import numpy as np
import pytest

from spinexchange.params import PhysicalParams, two_pi


@pytest.fixture
def paper_params():
    """Cavity constants of the hop/sweep presets."""
    return PhysicalParams(kappa=two_pi(200e3), g=two_pi(1.5e6), gamma_atom=two_pi(6e6),
                          delta_atom=two_pi(-10e9), delta_c=two_pi(-1.0992e6), n_bar=1000,
                          n_atoms=1e5, b_field=4.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_configure(config):
    np.set_printoptions(precision=6)
