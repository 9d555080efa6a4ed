"""Masked uniform Cartesian grids on bounded planar domains.

The discretization is deliberately plain: a domain is embedded in its
bounding box, the box is cut into square cells of width h = 1/n, and a
cell belongs to the computational domain iff its *center* lies strictly
inside.  There are no cut cells and no boundary fitting; every consumer
of these grids (Poisson solves, rearrangement bookkeeping, quadrature)
works on the same flat arrays in row-major (y, x) order, so cell k of
one field always refers to the same physical cell in another.

Boundary closure is by cell flags: a cell whose 4-neighborhood leaves
the mask is marked, and operators decide what to do there (the Dirichlet
Laplacian reads zero ghost values, gradients fall back to one-sided
differences).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["DomainSpec", "Grid", "build_grid", "plane_grid", "measure"]


@dataclass(frozen=True)
class DomainSpec:
    """Geometry of the flow domain.

    kind is one of "unit_disk", "rectangle", "polygon".  Rectangles sit
    at [0, width] x [0, height]; the unit disk is centered at the
    origin; polygons carry their vertex list in order (either
    orientation, no self-intersections).
    """

    kind: str
    width: float = 0.0
    height: float = 0.0
    vertices: tuple = ()

    @staticmethod
    def unit_disk() -> "DomainSpec":
        return DomainSpec(kind="unit_disk")

    @staticmethod
    def rectangle(width: float, height: float) -> "DomainSpec":
        if not (width > 0 and height > 0):
            raise ValueError("rectangle sides must be positive")
        return DomainSpec(kind="rectangle", width=float(width), height=float(height))

    @staticmethod
    def polygon(vertices) -> "DomainSpec":
        verts = tuple((float(x), float(y)) for x, y in vertices)
        if len(verts) < 3:
            raise ValueError("polygon needs at least 3 vertices")
        if _polygon_area(verts) == 0.0:
            raise ValueError("empty domain")
        if _polygon_self_intersects(verts):
            raise ValueError("polygon is self-intersecting")
        return DomainSpec(kind="polygon", vertices=verts)

    # -- geometric queries ------------------------------------------------

    def bounding_box(self):
        if self.kind == "unit_disk":
            return (-1.0, -1.0, 1.0, 1.0)
        if self.kind == "rectangle":
            return (0.0, 0.0, self.width, self.height)
        xs = [v[0] for v in self.vertices]
        ys = [v[1] for v in self.vertices]
        return (min(xs), min(ys), max(xs), max(ys))

    def contains(self, x: float, y: float) -> bool:
        """Strict interior test for a single point."""
        if self.kind == "unit_disk":
            return x * x + y * y < 1.0
        if self.kind == "rectangle":
            return 0.0 < x < self.width and 0.0 < y < self.height
        return _point_in_polygon(self.vertices, x, y)

    def contains_many(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        if self.kind == "unit_disk":
            return xs * xs + ys * ys < 1.0
        if self.kind == "rectangle":
            return (xs > 0.0) & (xs < self.width) & (ys > 0.0) & (ys < self.height)
        out = np.empty(xs.shape, dtype=bool)
        flat_x, flat_y = xs.ravel(), ys.ravel()
        res = [_point_in_polygon(self.vertices, float(px), float(py))
               for px, py in zip(flat_x, flat_y)]
        out.ravel()[:] = res
        return out

    def boundary_distance(self, x: float, y: float) -> float:
        """Distance to the boundary; positive inside, negative outside."""
        if self.kind == "unit_disk":
            return 1.0 - math.hypot(x, y)
        if self.kind == "rectangle":
            d = min(x, self.width - x, y, self.height - y)
            return d
        d = _polygon_edge_distance(self.vertices, x, y)
        return d if self.contains(x, y) else -d

    def centroid(self):
        if self.kind == "unit_disk":
            return (0.0, 0.0)
        if self.kind == "rectangle":
            return (0.5 * self.width, 0.5 * self.height)
        return _polygon_centroid(self.vertices)


def _polygon_area(verts) -> float:
    a = 0.0
    k = len(verts)
    for i in range(k):
        x0, y0 = verts[i]
        x1, y1 = verts[(i + 1) % k]
        a += x0 * y1 - x1 * y0
    return 0.5 * a


def _polygon_centroid(verts):
    a = _polygon_area(verts)
    cx = cy = 0.0
    k = len(verts)
    for i in range(k):
        x0, y0 = verts[i]
        x1, y1 = verts[(i + 1) % k]
        w = x0 * y1 - x1 * y0
        cx += (x0 + x1) * w
        cy += (y0 + y1) * w
    return (cx / (6.0 * a), cy / (6.0 * a))


def _point_in_polygon(verts, x: float, y: float) -> bool:
    # even-odd ray crossing; boundary points count as outside
    inside = False
    k = len(verts)
    for i in range(k):
        x0, y0 = verts[i]
        x1, y1 = verts[(i + 1) % k]
        if (y0 > y) != (y1 > y):
            xc = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
            if x < xc:
                inside = not inside
    return inside


def _segments_cross(p, q, r, s) -> bool:
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return (v > 0) - (v < 0)

    o1, o2 = orient(p, q, r), orient(p, q, s)
    o3, o4 = orient(r, s, p), orient(r, s, q)
    return o1 != o2 and o3 != o4 and 0 not in (o1, o2, o3, o4)


def _polygon_self_intersects(verts) -> bool:
    k = len(verts)
    edges = [(verts[i], verts[(i + 1) % k]) for i in range(k)]
    for i in range(k):
        for j in range(i + 1, k):
            if j == i or (j + 1) % k == i or (i + 1) % k == j:
                continue  # adjacent edges share a vertex
            if _segments_cross(*edges[i], *edges[j]):
                return True
    return False


def _polygon_edge_distance(verts, x: float, y: float) -> float:
    best = math.inf
    k = len(verts)
    for i in range(k):
        x0, y0 = verts[i]
        x1, y1 = verts[(i + 1) % k]
        dx, dy = x1 - x0, y1 - y0
        L2 = dx * dx + dy * dy
        t = 0.0 if L2 == 0 else max(0.0, min(1.0, ((x - x0) * dx + (y - y0) * dy) / L2))
        best = min(best, math.hypot(x - (x0 + t * dx), y - (y0 + t * dy)))
    return best


class Grid:
    """Flat view of the interior cells of a masked box grid.

    Attributes
    ----------
    h : cell width
    nx, ny : bounding-box cell counts
    x0, y0 : lower-left corner of the box
    index : (ny, nx) int array, -1 outside, else flat cell id
    cells_xy : (ncells, 2) cell-center coordinates, row-major (y, x) order
    boundary : (ncells,) bool, True where a 4-neighbor leaves the mask
    neighbors : (ncells, 4) flat ids of (left, right, down, up), -1 missing
    """

    def __init__(self, domain, h, x0, y0, nx, ny, mask, n=None):
        self.domain = domain
        self.h = float(h)
        self.n = n
        self.x0, self.y0 = float(x0), float(y0)
        self.nx, self.ny = int(nx), int(ny)
        self.mask = mask

        index = np.full((ny, nx), -1, dtype=np.int64)
        iy, ix = np.nonzero(mask)  # nonzero is row-major, so ids follow (y, x)
        index[iy, ix] = np.arange(iy.size)
        self.index = index
        self.ncells = int(iy.size)
        self.cell_ix = ix
        self.cell_iy = iy
        cx = x0 + (ix + 0.5) * self.h
        cy = y0 + (iy + 0.5) * self.h
        self.cells_xy = np.column_stack([cx, cy])

        nbr = np.empty((self.ncells, 4), dtype=np.int64)
        for k, (dx, dy) in enumerate(((-1, 0), (1, 0), (0, -1), (0, 1))):
            jx, jy = ix + dx, iy + dy
            ok = (jx >= 0) & (jx < nx) & (jy >= 0) & (jy < ny)
            nbr[:, k] = np.where(ok, index[jy.clip(0, ny - 1), jx.clip(0, nx - 1)], -1)
        self.neighbors = nbr
        self.boundary = (nbr < 0).any(axis=1)

    @property
    def cell_area(self) -> float:
        return self.h * self.h

    def locate(self, x, y):
        """Flat cell ids containing the given points; -1 when outside."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        ix = np.floor((x - self.x0) / self.h).astype(np.int64)
        iy = np.floor((y - self.y0) / self.h).astype(np.int64)
        ok = (ix >= 0) & (ix < self.nx) & (iy >= 0) & (iy < self.ny)
        out = np.where(ok, self.index[iy.clip(0, self.ny - 1), ix.clip(0, self.nx - 1)], -1)
        return out

    def box_image(self, values, fill=0.0):
        """Scatter a flat cell array onto the (ny, nx) bounding box."""
        img = np.full((self.ny, self.nx), fill, dtype=float)
        img[self.cell_iy, self.cell_ix] = values
        return img

    def boundary_clearance(self, x, y) -> float:
        """Distance from a point to the domain boundary (grid-free)."""
        return self.domain.boundary_distance(float(x), float(y))


def build_grid(domain: DomainSpec, n: int) -> Grid:
    """Mask the bounding box of `domain` with n cells per unit length.

    A cell is interior iff its center is strictly inside the domain.
    Raises on n < 16 (the masking error at coarser resolution makes
    every downstream tolerance meaningless) and on an empty mask.
    """
    if n < 16:
        raise ValueError("grid too coarse: need n >= 16 cells per unit length")
    h = 1.0 / n
    xlo, ylo, xhi, yhi = domain.bounding_box()
    nx = int(math.ceil((xhi - xlo) * n - 1e-12))
    ny = int(math.ceil((yhi - ylo) * n - 1e-12))
    xs = xlo + (np.arange(nx) + 0.5) * h
    ys = ylo + (np.arange(ny) + 0.5) * h
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    mask = domain.contains_many(X, Y)
    if not mask.any():
        raise ValueError("empty domain")
    return Grid(domain, h, xlo, ylo, nx, ny, mask, n=n)


def plane_grid(spacing: float, half_cells: int) -> Grid:
    """Fully unmasked square grid centered at the origin.

    Used as the reference plane for symmetric-decreasing rearrangements
    and rescaled core profiles: 2*half_cells cells per side, no domain
    mask, cell layout symmetric under the reflections x -> -x, y -> -y.
    """
    if half_cells < 1:
        raise ValueError("plane grid needs at least one cell ring")
    m = int(half_cells)
    side = 2 * m * spacing
    dom = DomainSpec(kind="plane", width=side, height=side)
    mask = np.ones((2 * m, 2 * m), dtype=bool)
    return Grid(dom, spacing, -m * spacing, -m * spacing, 2 * m, 2 * m, mask)


def measure(grid: Grid, cells) -> float:
    """Lebesgue measure of a cell set: count times h^2.

    `cells` is either a boolean mask over flat ids or an array of ids.
    """
    cells = np.asarray(cells)
    if cells.dtype == bool:
        if cells.shape != (grid.ncells,):
            raise ValueError("boolean cell mask has wrong length")
        count = int(cells.sum())
    else:
        if cells.size and (cells.min() < 0 or cells.max() >= grid.ncells):
            raise ValueError("cell ids out of range")
        count = int(np.unique(cells).size)
    return count * grid.cell_area
