"""Shared small meshes and discretizations."""

import numpy as np
import pytest

from stokes_control.kkt_solver import Scheme, build_discretization
from stokes_control.mesh import build_unit_square


def linear_field(x, y):
    return np.stack([1.0 + 2.0 * x - y, 0.5 * x + 3.0 * y], axis=-1)


@pytest.fixture(scope="module")
def br_disc():
    """Bernardi-Raugel/P0 with BDM1 reconstruction on a 4x4 mesh."""
    return build_discretization(build_unit_square(4), Scheme.FULL_ROBUST)


@pytest.fixture(scope="module")
def sv_disc():
    """Scott-Vogelius pair on the barycentric split of a 2x2 mesh."""
    return build_discretization(build_unit_square(2), Scheme.SCOTT_VOGELIUS)
