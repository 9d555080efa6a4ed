"""Kirchhoff-Routh function: evaluation, minimization, point-vortex flow.

For vortex strengths kappa_i at positions x_i the interaction energy is

    W = - sum_{i<j} kappa_i kappa_j G(x_i, x_j)
        + (1/2) sum_i kappa_i^2 H(x_i),

with G the Dirichlet Green function and H the Robin function.  Two
evaluation paths coexist on purpose:

* `kr_value` / `kr_gradient` / `kr_minimize` read G and H from fresh
  Poisson solves (cached per cell), positions snapped to cell centers.
  This is the reference path; the optimizer only ever compares such
  directly evaluated numbers.

* `pv_evolve` integrates the vortex ODE with a smooth surrogate: H and
  the regular part h(x, y) are tabulated on a coarse sub-lattice (one
  solve per lattice site) and interpolated with quintic splines.  A
  Runge-Kutta step needs a C^4 right-hand side for its order and for
  visible conservation of W; per-step finite differences of snapped
  solves would bury both in cell noise.

Positions handed to the solve-backed functions are snapped to the
containing cell; margins (4h for values, 6h for gradients and descent)
are enforced against the exact domain geometry.
"""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .grid import Grid
from .poisson import LOG_COEFF, PoissonSolver, green_function

__all__ = [
    "KRConfiguration", "KRMinimum", "PVTrajectory",
    "kr_value", "kr_gradient", "kr_minimize", "pv_evolve",
]


@dataclass
class KRConfiguration:
    points: np.ndarray  # (k, 2)
    kappas: np.ndarray  # (k,)

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        self.kappas = np.atleast_1d(np.asarray(self.kappas, dtype=float))
        if self.points.shape != (self.kappas.size, 2):
            raise ValueError("points and kappas disagree on vortex count")
        if (self.kappas == 0).any():
            raise ValueError("vortex strengths must be nonzero")


@dataclass
class KRMinimum:
    points: np.ndarray
    value: float
    starts: int
    iterations: int
    degenerate_starts: int
    scan_sites: int


@dataclass
class PVTrajectory:
    times: np.ndarray
    points: np.ndarray  # (nt, k, 2)
    values: np.ndarray  # W along the path
    completed: bool
    note: str = ""


# -- scalar caches ---------------------------------------------------------

class _KRCache:
    def __init__(self):
        self.H = {}
        self.G = {}
        self.interp = {}


_caches: "weakref.WeakKeyDictionary[PoissonSolver, _KRCache]" = weakref.WeakKeyDictionary()


def _cache(solver: PoissonSolver) -> _KRCache:
    c = _caches.get(solver)
    if c is None:
        c = _KRCache()
        _caches[solver] = c
    return c


def _harvest(solver: PoissonSolver, cell: int, query_cells) -> None:
    """One solve at `cell`; store H(cell) and G(cell, q) for the queries."""
    g = solver.grid
    cache = _cache(solver)
    gf = green_function(solver, cell).values
    ix, iy = g.cell_ix[cell], g.cell_iy[cell]
    acc = 0.0
    for jx, jy in ((ix - 2, iy), (ix + 2, iy), (ix, iy - 2), (ix, iy + 2)):
        if not (0 <= jx < g.nx and 0 <= jy < g.ny) or g.index[jy, jx] < 0:
            raise ValueError("robin near boundary unreliable")
        acc += -LOG_COEFF * math.log(2.0 * g.h) - gf[g.index[jy, jx]]
    cache.H[cell] = acc / 4.0
    for q in query_cells:
        if q != cell:
            key = (cell, q) if cell < q else (q, cell)
            cache.G[key] = float(gf[q])


def _ensure_scalars(solver: PoissonSolver, cells) -> None:
    cache = _cache(solver)
    cells = list(dict.fromkeys(int(c) for c in cells))
    for c in cells:
        need = c not in cache.H or any(
            ((c, q) if c < q else (q, c)) not in cache.G for q in cells if q != c
        )
        if need:
            _harvest(solver, c, cells)


def _snap(solver: PoissonSolver, points: np.ndarray) -> np.ndarray:
    ids = solver.grid.locate(points[:, 0], points[:, 1])
    if (np.asarray(ids) < 0).any():
        raise ValueError("vortex position outside the domain")
    return np.atleast_1d(ids).astype(int)


def _check_margins(solver: PoissonSolver, pts: np.ndarray, margin_h: float) -> None:
    g = solver.grid
    m = margin_h * g.h
    for x, y in pts:
        if g.domain.boundary_distance(float(x), float(y)) < m:
            raise ValueError(f"vortex too close to boundary (need {margin_h:g}h)")
    k = pts.shape[0]
    for i in range(k):
        for j in range(i + 1, k):
            if np.hypot(*(pts[i] - pts[j])) < 4.0 * g.h:
                raise ValueError("vortex positions closer than 4h")


def _value_from_cache(solver: PoissonSolver, cells, kappas) -> float:
    cache = _cache(solver)
    w = 0.0
    k = len(cells)
    for i in range(k):
        w += 0.5 * kappas[i] ** 2 * cache.H[cells[i]]
        for j in range(i + 1, k):
            a, b = cells[i], cells[j]
            key = (a, b) if a < b else (b, a)
            w -= kappas[i] * kappas[j] * cache.G[key]
    return w


def kr_value(solver: PoissonSolver, cfg: KRConfiguration) -> float:
    """W at the configuration, positions snapped to cell centers.

    Needs pairwise separations and boundary clearance of at least 4h.
    """
    _check_margins(solver, cfg.points, 4.0)
    cells = _snap(solver, cfg.points)
    if np.unique(cells).size < cells.size:
        raise ValueError("vortex positions collide at cell granularity")
    _ensure_scalars(solver, cells)
    return _value_from_cache(solver, list(cells), list(cfg.kappas))


def kr_gradient(solver: PoissonSolver, cfg: KRConfiguration) -> np.ndarray:
    """Central differences of kr_value with step 2h; needs 6h margins."""
    g = solver.grid
    _check_margins(solver, cfg.points, 6.0)
    base = _snap(solver, cfg.points)
    step = 2.0 * g.h
    k = base.size
    # gather every perturbed cell once so each distinct source solves once
    all_cells = set(int(c) for c in base)
    probes = np.empty((k, 2, 2), dtype=int)  # vortex, coord, +/-
    for i in range(k):
        ix, iy = g.cell_ix[base[i]], g.cell_iy[base[i]]
        for c, (dx, dy) in enumerate(((1, 0), (0, 1))):
            for s, sgn in enumerate((1, -1)):
                jx, jy = ix + sgn * 2 * dx, iy + sgn * 2 * dy
                if not (0 <= jx < g.nx and 0 <= jy < g.ny) or g.index[jy, jx] < 0:
                    raise ValueError("gradient stencil leaves the domain")
                probes[i, c, s] = g.index[jy, jx]
                all_cells.add(int(g.index[jy, jx]))
    _ensure_scalars(solver, all_cells)
    kap = list(cfg.kappas)
    grad = np.zeros((k, 2))
    for i in range(k):
        for c in range(2):
            cells_hi = list(base)
            cells_hi[i] = int(probes[i, c, 0])
            cells_lo = list(base)
            cells_lo[i] = int(probes[i, c, 1])
            w_hi = _value_from_cache(solver, cells_hi, kap)
            w_lo = _value_from_cache(solver, cells_lo, kap)
            grad[i, c] = (w_hi - w_lo) / (2.0 * step)
    return grad


# -- minimization ----------------------------------------------------------

def _scan_lattice(solver: PoissonSolver, margin_h: float, stride: int):
    g = solver.grid
    ids = []
    for iy in range(stride // 2, g.ny, stride):
        for ix in range(stride // 2, g.nx, stride):
            cid = g.index[iy, ix]
            if cid < 0:
                continue
            x, y = g.cells_xy[cid]
            if g.domain.boundary_distance(float(x), float(y)) >= margin_h * g.h:
                ids.append(int(cid))
    return ids


def kr_minimize(solver: PoissonSolver, kappas, margin_h: float = 6.0,
                starts: int = 3, max_iter: int = 100) -> KRMinimum:
    """Global-ish minimization of W for an opposite-signed pair.

    A stride-8h lattice scan over admissible ordered pairs supplies the
    starting configurations; gradient descent with backtracking (all
    evaluations snapped to cells) polishes the best `starts` of them,
    and a final per-coordinate parabolic fit interpolates the minimum
    below cell resolution.  Deterministic for a fixed grid and stride.
    """
    kappas = np.asarray(kappas, dtype=float)
    if kappas.shape != (2,) or not (kappas[0] > 0 > kappas[1]):
        raise ValueError("kr_minimize expects strengths (positive, negative)")
    g = solver.grid
    sites = _scan_lattice(solver, margin_h, 8)
    if len(sites) < 2:
        raise ValueError("domain too small for the scan lattice")
    _ensure_scalars(solver, sites)
    cache = _cache(solver)
    m = len(sites)
    H = np.array([cache.H[c] for c in sites])
    Gt = np.zeros((m, m))
    for a in range(m):
        for b in range(a + 1, m):
            ca, cb = sites[a], sites[b]
            Gt[a, b] = Gt[b, a] = cache.G[(ca, cb) if ca < cb else (cb, ca)]
    W = (-kappas[0] * kappas[1] * Gt
         + 0.5 * kappas[0] ** 2 * H[:, None]
         + 0.5 * kappas[1] ** 2 * H[None, :])
    pts = g.cells_xy[sites]
    sep = np.hypot(pts[:, None, 0] - pts[None, :, 0], pts[:, None, 1] - pts[None, :, 1])
    W[sep < 4.0 * g.h] = np.inf
    np.fill_diagonal(W, np.inf)

    flat = np.argsort(W, axis=None, kind="stable")
    symmetric = abs(kappas[0]) == abs(kappas[1])
    chosen = []
    seen = set()
    for f in flat:
        a, b = divmod(int(f), m)
        if not np.isfinite(W[a, b]):
            break
        key = (min(a, b), max(a, b)) if symmetric else (a, b)
        if key in seen:
            continue
        seen.add(key)
        chosen.append((a, b))
        if len(chosen) >= starts:
            break

    def snapped_value(p):
        try:
            _check_margins(solver, p, margin_h)
            cells = _snap(solver, p)
            if np.unique(cells).size < cells.size:
                return np.inf, None
            _ensure_scalars(solver, cells)
            return _value_from_cache(solver, list(cells), list(kappas)), cells
        except ValueError:
            return np.inf, None

    best = None
    total_iters = 0
    finals = []
    for a, b in chosen:
        p = np.array([pts[a], pts[b]])
        w, cells = snapped_value(p)
        for _ in range(max_iter):
            total_iters += 1
            try:
                grad = kr_gradient(solver, KRConfiguration(p, kappas))
            except ValueError:
                break
            gmax = np.abs(grad).max()
            if gmax == 0.0:
                break
            t = 4.0 * g.h / gmax
            improved = False
            while t * gmax >= 0.45 * g.h:
                trial = p - t * grad
                wt, ct = snapped_value(trial)
                if wt < w - 1e-14 * max(1.0, abs(w)):
                    p = g.cells_xy[ct].copy()  # keep iterates on cell centers
                    w, cells = wt, ct
                    improved = True
                    break
                t *= 0.5
            if not improved:
                break
        finals.append((w, p.copy(), cells))
        if best is None or w < best[0]:
            best = (w, p.copy(), cells)

    w0, p0, cells0 = best
    tie = sum(1 for w, _, _ in finals if w <= w0 + 1e-6 * max(1.0, abs(w0)))
    refined = _parabolic_refine(solver, p0, cells0, kappas, w0)
    return KRMinimum(points=refined, value=float(w0), starts=len(chosen),
                     iterations=total_iters, degenerate_starts=tie,
                     scan_sites=m)


def _parabolic_refine(solver, p0, cells0, kappas, w0):
    """Sub-cell vertex estimate from W at +-2 cells along each coordinate."""
    g = solver.grid
    refined = p0.astype(float).copy()
    for i in range(p0.shape[0]):
        ix, iy = g.cell_ix[cells0[i]], g.cell_iy[cells0[i]]
        for c, (dx, dy) in enumerate(((1, 0), (0, 1))):
            jhi = (iy + 2 * dy, ix + 2 * dx)
            jlo = (iy - 2 * dy, ix - 2 * dx)
            ok = all(0 <= jy < g.ny and 0 <= jx < g.nx and g.index[jy, jx] >= 0
                     for jy, jx in (jhi, jlo))
            if not ok:
                continue
            cells_hi = list(cells0)
            cells_hi[i] = int(g.index[jhi])
            cells_lo = list(cells0)
            cells_lo[i] = int(g.index[jlo])
            try:
                _ensure_scalars(solver, set(cells_hi) | set(cells_lo))
            except ValueError:
                continue
            whi = _value_from_cache(solver, cells_hi, list(kappas))
            wlo = _value_from_cache(solver, cells_lo, list(kappas))
            curv = whi - 2.0 * w0 + wlo
            if curv <= 0:
                continue
            delta = 0.5 * (wlo - whi) / curv * (2.0 * g.h)
            refined[i, c] += float(np.clip(delta, -g.h, g.h))
    return refined


# -- smooth surrogate for the vortex ODE -----------------------------------

class _KRInterpolant:
    """Quintic-spline tables for H(x) and the regular part h(x, y).

    Built from one Poisson solve per admissible lattice site (stride
    cells apart); sites without clearance borrow the nearest valid
    site's data, which only matters outside the trust margin where
    trajectories abort anyway.
    """

    def __init__(self, solver: PoissonSolver, stride: int = 8):
        g = solver.grid
        self.grid = g
        self.stride = int(stride)
        ix = np.arange(stride // 2, g.nx, stride)
        iy = np.arange(stride // 2, g.ny, stride)
        if ix.size < 6 or iy.size < 6:
            raise ValueError("grid too coarse for the vortex-flow tables")
        self.off_x, self.off_y = ix[0], iy[0]
        mx, my = ix.size, iy.size
        IX, IY = np.meshgrid(ix, iy, indexing="ij")
        cx = g.x0 + (IX + 0.5) * g.h
        cy = g.y0 + (IY + 0.5) * g.h
        cid = np.where(g.mask[IY.clip(0, g.ny - 1), IX.clip(0, g.nx - 1)],
                       g.index[IY, IX], -1)
        clear = np.array([[g.domain.boundary_distance(float(cx[a, b]), float(cy[a, b]))
                           for b in range(my)] for a in range(mx)])
        valid = (cid >= 0) & (clear >= 4.0 * g.h)

        Hlat = np.zeros((mx, my))
        hreg = np.zeros((mx, my, mx, my))
        vidx = np.argwhere(valid)
        vcells = [int(cid[a, b]) for a, b in vidx]
        cache = _cache(solver)
        for (a, b), c in zip(vidx, vcells):
            _harvest(solver, c, vcells)
            Hlat[a, b] = cache.H[c]
        pts = np.stack([cx, cy], axis=-1)
        for (a, b), c in zip(vidx, vcells):
            for (a2, b2), c2 in zip(vidx, vcells):
                if c == c2:
                    hreg[a, b, a2, b2] = Hlat[a, b]
                    continue
                key = (c, c2) if c < c2 else (c2, c)
                d = np.hypot(*(pts[a, b] - pts[a2, b2]))
                hreg[a, b, a2, b2] = -LOG_COEFF * math.log(d) - cache.G[key]

        # borrow nearest valid site for the masked-out corners of the box
        if not valid.all():
            _, (ia, ib) = ndimage.distance_transform_edt(
                ~valid, return_indices=True)
            Hlat = Hlat[ia, ib]
            hreg = hreg[ia[:, :, None, None], ib[:, :, None, None],
                        ia[None, None, :, :], ib[None, None, :, :]]

        self._H = ndimage.spline_filter(Hlat, order=5)
        self._h4 = ndimage.spline_filter(hreg, order=5)
        margin_sites = 1.5 * stride * g.h
        self.trust_margin = max(6.0 * g.h, margin_sites)

    def _lat(self, xy: np.ndarray) -> np.ndarray:
        g = self.grid
        u = ((xy[..., 0] - g.x0) / g.h - 0.5 - self.off_x) / self.stride
        v = ((xy[..., 1] - g.y0) / g.h - 0.5 - self.off_y) / self.stride
        return np.stack([u, v])

    def H(self, xy: np.ndarray) -> np.ndarray:
        uv = self._lat(np.atleast_2d(xy))
        return ndimage.map_coordinates(self._H, uv, order=5, prefilter=False,
                                       mode="nearest")

    def hreg(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        ux = self._lat(np.atleast_2d(x))
        uy = self._lat(np.atleast_2d(y))
        coords = np.vstack([ux, uy])
        return ndimage.map_coordinates(self._h4, coords, order=5,
                                       prefilter=False, mode="nearest")

    def value(self, pts: np.ndarray, kappas: np.ndarray) -> float:
        k = pts.shape[0]
        w = 0.5 * float((kappas ** 2 * self.H(pts)).sum())
        for i in range(k):
            for j in range(i + 1, k):
                d = float(np.hypot(*(pts[i] - pts[j])))
                gij = -LOG_COEFF * math.log(d) - float(
                    self.hreg(pts[i], pts[j])[0])
                w -= kappas[i] * kappas[j] * gij
        return w

    def gradient(self, pts: np.ndarray, kappas: np.ndarray) -> np.ndarray:
        eps = 1e-5 * self.grid.h * self.stride
        grad = np.zeros_like(pts)
        for i in range(pts.shape[0]):
            for c in range(2):
                hi = pts.copy()
                hi[i, c] += eps
                lo = pts.copy()
                lo[i, c] -= eps
                grad[i, c] = (self.value(hi, kappas) - self.value(lo, kappas)) / (2 * eps)
        return grad


def _interpolant(solver: PoissonSolver, stride: int) -> _KRInterpolant:
    cache = _cache(solver)
    if stride not in cache.interp:
        cache.interp[stride] = _KRInterpolant(solver, stride)
    return cache.interp[stride]


def pv_evolve(solver: PoissonSolver, cfg: KRConfiguration, T: float, dt: float,
              save_stride: int = 1, stride: int = 8) -> PVTrajectory:
    """Classical RK4 for dx_i/dt = (1/kappa_i) grad^perp_{x_i} W.

    W is the spline surrogate (see module docstring), so the reported
    values measure conservation of the integrated Hamiltonian itself.
    The trajectory truncates with a note if any vortex leaves the trust
    margin or two vortices approach below 4h.
    """
    if dt <= 0 or T <= 0:
        raise ValueError("need positive T and dt")
    interp = _interpolant(solver, stride)
    g = solver.grid
    kap = cfg.kappas
    inv = (1.0 / kap)[:, None]

    def ok(pts):
        for x, y in pts:
            if g.domain.boundary_distance(float(x), float(y)) < interp.trust_margin:
                return False
        k = pts.shape[0]
        for i in range(k):
            for j in range(i + 1, k):
                if np.hypot(*(pts[i] - pts[j])) < 4.0 * g.h:
                    return False
        return True

    def rhs(pts):
        gr = interp.gradient(pts, kap)
        return inv * np.column_stack([gr[:, 1], -gr[:, 0]])

    steps = int(round(T / dt))
    pts = cfg.points.copy()
    if not ok(pts):
        raise ValueError("initial configuration violates the trust margin")
    times = [0.0]
    path = [pts.copy()]
    vals = [interp.value(pts, kap)]
    completed, note = True, ""
    for s in range(1, steps + 1):
        k1 = rhs(pts)
        k2 = rhs(pts + 0.5 * dt * k1)
        k3 = rhs(pts + 0.5 * dt * k2)
        k4 = rhs(pts + dt * k3)
        pts = pts + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not ok(pts):
            completed, note = False, f"margin violation at step {s}"
            break
        if s % save_stride == 0 or s == steps:
            times.append(s * dt)
            path.append(pts.copy())
            vals.append(interp.value(pts, kap))
    return PVTrajectory(times=np.array(times), points=np.array(path),
                        values=np.array(vals), completed=completed, note=note)
