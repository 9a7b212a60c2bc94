from __future__ import annotations

import numpy as np
import pytest

from cheegerlab import (PerimeterMode, ScalarField, build_grid, builtin_specs,
                        first_eigenpair)

DIRICHLET = PerimeterMode.DIRICHLET
RELATIVE = PerimeterMode.RELATIVE


@pytest.fixture(scope="session")
def specs():
    return builtin_specs()


@pytest.fixture(scope="session")
def interval_8(specs):
    return build_grid(specs["unit_interval"], 8)


@pytest.fixture(scope="session")
def interval_64(specs):
    return build_grid(specs["unit_interval"], 64)


@pytest.fixture(scope="session")
def interval_256(specs):
    return build_grid(specs["unit_interval"], 256)


@pytest.fixture(scope="session")
def interval_1024(specs):
    return build_grid(specs["unit_interval"], 1024)


@pytest.fixture(scope="session")
def square_4(specs):
    return build_grid(specs["unit_square"], 4)


@pytest.fixture(scope="session")
def square_64(specs):
    return build_grid(specs["unit_square"], 64)


@pytest.fixture(scope="session")
def eig_interval_1024(interval_1024):
    return first_eigenpair(interval_1024, 2.0)


@pytest.fixture(scope="session")
def eig_interval_256(interval_256):
    return first_eigenpair(interval_256, 2.0)


@pytest.fixture(scope="session")
def eig_square_64(square_64):
    return first_eigenpair(square_64, 2.0)


def tent_field(grid) -> ScalarField:
    """Tent peaking 1 at the domain midpoint of a 1D grid."""
    x = grid.centers[:, 0]
    return ScalarField(grid, 1.0 - 2.0 * np.abs(x - 0.5))
