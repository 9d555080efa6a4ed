import numpy as np
import pytest

import vortexpair as vp


@pytest.fixture(scope="session")
def disk64():
    grid = vp.build_grid(vp.DomainSpec.unit_disk(), 64)
    return vp.PoissonSolver(grid)


@pytest.fixture(scope="session")
def disk96():
    grid = vp.build_grid(vp.DomainSpec.unit_disk(), 96)
    return vp.PoissonSolver(grid)


@pytest.fixture(scope="session")
def rect48():
    grid = vp.build_grid(vp.DomainSpec.rectangle(1.2, 1.0), 48)
    return vp.PoissonSolver(grid)


@pytest.fixture(scope="session")
def pair_state_96(disk96):
    spec = vp.RearrangementSpec(eps1=0.12, eps2=0.12, kappa1=1.0,
                                kappa2=-1.0)
    return vp.maximize(disk96, spec, residual_tests=4)


def centered_patch(grid, eps, kappa=1.0, center=(0.0, 0.0)):
    xy = grid.cells_xy
    r = np.hypot(xy[:, 0] - center[0], xy[:, 1] - center[1])
    vals = np.where(r < eps, kappa / (np.pi * eps * eps), 0.0)
    return vp.ScalarField(grid, vals)
