import math

import numpy as np
import pytest

import vortexpair as vp
from vortexpair.euler import EulerState
from conftest import centered_patch


def test_step_rejects_large_dt(disk64):
    f = centered_patch(disk64.grid, 0.3)
    state = EulerState(f)
    with pytest.raises(ValueError, match="CFL"):
        vp.step(disk64, state, dt=1e3)


def test_step_preserves_zero(disk64):
    g = disk64.grid
    state = EulerState(vp.ScalarField(g, np.zeros(g.cells_xy.shape[0])))
    out = vp.step(disk64, state, dt=0.01)
    assert np.all(out.omega.values == 0.0)
    assert out.t == pytest.approx(0.01)


def test_step_max_principle(disk64):
    g = disk64.grid
    rng = np.random.default_rng(0)
    vals = np.clip(rng.normal(size=g.cells_xy.shape[0]), -1.5, 2.0)
    state = EulerState(vp.ScalarField(g, vals))
    m0 = np.abs(vals).max()
    for _ in range(5):
        state = vp.step(disk64, state, dt=2e-3)
        assert np.abs(state.omega.values).max() <= m0 * (1 + 1e-12)


def test_radial_patch_is_near_steady(disk96):
    # a radial patch induces a purely azimuthal flow, so transport
    # should leave it alone up to edge resampling
    f = centered_patch(disk96.grid, 0.3)
    state = EulerState(f)
    dt = 1.0 * disk96.grid.h  # peak speed is ~1/(2 pi r) < 1 here
    n = 40
    for _ in range(n):
        state = vp.step(disk96, state, dt=dt)
    g = disk96.grid
    num = np.sum(np.abs(state.omega.values - f.values)) * g.cell_area
    den = np.sum(np.abs(f.values)) * g.cell_area
    assert num / den <= 0.08
    # circulation is not exactly conserved, but close
    drift = abs(np.sum(state.omega.values) - np.sum(f.values)) * g.cell_area
    assert drift <= 5e-3


def test_stability_rejects_bad_delta0(pair_state_96, disk96):
    znorm = vp.lp_norm(pair_state_96.zeta, 2.0)
    with pytest.raises(ValueError):
        vp.stability_experiment(disk96, pair_state_96, delta0=-1.0)
    with pytest.raises(ValueError):
        vp.stability_experiment(disk96, pair_state_96, delta0=0.2 * znorm)


def test_stability_zero_perturbation_short(pair_state_96, disk96):
    r = vp.stability_experiment(disk96, pair_state_96, delta0=0.0,
                                turnovers=0.5, records=20)
    assert not r.aborted
    assert r.d0 <= 1e-12
    assert r.distances[0] <= 1e-12
    assert r.turnover == pytest.approx(
        4.0 * math.pi / np.abs(pair_state_96.zeta.values).max())
    assert np.all(np.diff(r.times) > 0)
    assert r.times[-1] == pytest.approx(0.5 * r.turnover, rel=0.1)
    # short-run drift stays tiny compared to the 10-turnover floor
    assert np.max(r.distances) <= 0.2
    assert np.max(r.max_abs) <= r.max_abs[0] * (1 + 1e-12)


def test_stability_seeded_bump_reproducible(pair_state_96, disk96):
    znorm = vp.lp_norm(pair_state_96.zeta, 2.0)
    kw = dict(delta0=0.02 * znorm, turnovers=0.2, records=5, seed=3)
    a = vp.stability_experiment(disk96, pair_state_96, **kw)
    b = vp.stability_experiment(disk96, pair_state_96, **kw)
    assert np.array_equal(a.distances, b.distances)
    assert a.d0 == pytest.approx(0.02, rel=1e-6)


def test_stability_linear_response(pair_state_96, disk96):
    znorm = vp.lp_norm(pair_state_96.zeta, 2.0)
    small = vp.stability_experiment(disk96, pair_state_96,
                                    delta0=0.01 * znorm, turnovers=0.1,
                                    records=3, seed=5)
    big = vp.stability_experiment(disk96, pair_state_96,
                                  delta0=0.02 * znorm, turnovers=0.1,
                                  records=3, seed=5)
    assert big.d0 == pytest.approx(2.0 * small.d0, rel=1e-6)


def test_stability_abort_on_forced_cfl(pair_state_96, disk96):
    r = vp.stability_experiment(disk96, pair_state_96, delta0=0.0,
                                turnovers=1.0, dt=1e3, records=3)
    assert r.aborted
    assert "CFL" in r.note
