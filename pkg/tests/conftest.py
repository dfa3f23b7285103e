import numpy as np
import pytest

from driftwell import Grid1D, Grid2D, build_field_2d, build_potential_1d


@pytest.fixture(scope="session")
def grid_fine():
    return Grid1D(1.0, 4001)


@pytest.fixture(scope="session")
def pot_ax(grid_fine):
    """a = x on (-1, 1): b = x^2/2."""
    return build_potential_1d("power", grid_fine, alpha=2)


@pytest.fixture(scope="session")
def pot_sine_wide():
    """a = sin x on (-3pi/2, 3pi/2): deepest well depth 2."""
    return build_potential_1d("sine", Grid1D(1.5 * np.pi, 4001))


@pytest.fixture(scope="session")
def pot_quartic():
    """a = x^3 - x on (-2, 2): symmetric double well."""
    return build_potential_1d("quartic", Grid1D(2.0, 4001))


@pytest.fixture(scope="session")
def grid2d_acceptance():
    """h = 0.02 on (-1,1)^2."""
    return Grid2D(1.0, 1.0, 99, 99)


@pytest.fixture(scope="session")
def field_two_bump(grid2d_acceptance):
    """Two disjoint radial bumps (strengths 1 and 2)."""
    return build_field_2d("bumps", grid2d_acceptance,
                          bumps=[((0.5, 0.4), 0.4, 1.0),
                                 ((-2.0 / 3.0, -0.3), 0.25, 2.0)])


@pytest.fixture(scope="session")
def field_vortex(grid2d_acceptance):
    return build_field_2d("bump", grid2d_acceptance, radius=0.5)
