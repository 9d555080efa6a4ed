import numpy as np
import pytest

import vortexpair as vp


def test_disk_grid_basic_geometry():
    g = vp.build_grid(vp.DomainSpec.unit_disk(), 32)
    assert g.h == pytest.approx(1.0 / 32)
    # every stored cell center lies strictly inside the disk
    r = np.hypot(g.cells_xy[:, 0], g.cells_xy[:, 1])
    assert np.all(r < 1.0)
    # cell count approximates the disk area
    assert vp.measure(g, np.arange(g.cells_xy.shape[0])) == pytest.approx(np.pi, rel=0.02)


def test_rectangle_grid_cell_count():
    g = vp.build_grid(vp.DomainSpec.rectangle(1.0, 0.5), 32)
    # interior cell centers tile the rectangle exactly
    assert vp.measure(g, np.arange(g.cells_xy.shape[0])) == pytest.approx(0.5, rel=0.05)
    assert np.all(g.cells_xy[:, 0] > 0.0) or np.all(g.cells_xy[:, 0] < 1.0)


def test_grid_rejects_coarse_resolution():
    with pytest.raises(ValueError):
        vp.build_grid(vp.DomainSpec.unit_disk(), 8)


def test_grid_rejects_empty_interior():
    # sliver thinner than one cell has no interior centers
    with pytest.raises(ValueError):
        vp.build_grid(vp.DomainSpec.rectangle(0.02, 1.0), 16)


def test_polygon_validation():
    with pytest.raises(ValueError):
        vp.DomainSpec.polygon([(0, 0), (1, 0)])
    # collinear vertices enclose zero area
    with pytest.raises(ValueError):
        vp.DomainSpec.polygon([(0, 0), (1, 1), (2, 2)])


def test_polygon_grid_triangle():
    dom = vp.DomainSpec.polygon([(0, 0), (1, 0), (0.5, 1.0)])
    g = vp.build_grid(dom, 32)
    assert vp.measure(g, np.arange(g.cells_xy.shape[0])) == pytest.approx(0.5, rel=0.1)
    inside = dom.contains_many(g.cells_xy[:, 0], g.cells_xy[:, 1])
    assert np.all(inside)


def test_locate_roundtrip():
    g = vp.build_grid(vp.DomainSpec.unit_disk(), 24)
    ids = g.locate(g.cells_xy[:, 0], g.cells_xy[:, 1])
    assert np.array_equal(ids, np.arange(g.cells_xy.shape[0]))


def test_locate_outside_returns_sentinel():
    g = vp.build_grid(vp.DomainSpec.unit_disk(), 24)
    ids = g.locate(np.array([2.0, 0.0]), np.array([0.0, -3.0]))
    assert np.all(ids == -1)


def test_neighbors_structure():
    g = vp.build_grid(vp.DomainSpec.rectangle(1.0, 1.0), 24)
    nb = g.neighbors
    m = g.cells_xy.shape[0]
    assert nb.shape == (m, 4)
    # a neighbor id, where present, points to a cell one spacing away
    for k in range(4):
        has = nb[:, k] >= 0
        d = np.linalg.norm(g.cells_xy[nb[has, k]] - g.cells_xy[has], axis=1)
        assert np.allclose(d, g.h, rtol=1e-12)


def test_interior_cell_has_full_stencil():
    g = vp.build_grid(vp.DomainSpec.unit_disk(), 32)
    c = int(g.locate(0.0, 0.0))
    assert c >= 0
    assert np.all(g.neighbors[c] >= 0)


def test_boundary_clearance_bounds():
    dom = vp.DomainSpec.unit_disk()
    g = vp.build_grid(dom, 48)
    for x, y in g.cells_xy[:: max(1, g.cells_xy.shape[0] // 40)]:
        clr = g.boundary_clearance(x, y)
        true = 1.0 - np.hypot(x, y)
        assert clr > 0.0
        assert clr <= true + 1e-12


def test_plane_grid_symmetry_and_area():
    g = vp.plane_grid(0.05, 10)
    assert g.cells_xy.shape[0] == 400
    assert vp.measure(g, np.arange(g.cells_xy.shape[0])) == pytest.approx(1.0, rel=1e-12)
    # centers come in +/- pairs
    s = {(round(x, 12), round(y, 12)) for x, y in g.cells_xy}
    assert all((-x, -y) in s for x, y in s)


def test_box_image_shape():
    g = vp.build_grid(vp.DomainSpec.unit_disk(), 24)
    f = vp.ScalarField(g, np.arange(g.cells_xy.shape[0], dtype=float))
    img = g.box_image(f.values)
    assert img.shape == (g.ny, g.nx)
    # values recoverable at the index positions
    ok = g.index >= 0
    assert np.array_equal(img[ok], f.values[g.index[ok]])
