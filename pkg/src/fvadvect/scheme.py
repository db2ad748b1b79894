"""Explicit upwind finite-volume scheme for ``u_t + div(V u) = 0``."""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import geometry, quadrature
from ._validation import CFLViolationError, check_positive_int, check_real, check_xi
from .flow import FluxTable, VelocityField, check_compatible, geometric_fluxes

CFL_RTOL = 1e-14


@dataclass
class GridFunction:
    """Cell values ``u_K^n`` of one time level."""

    mesh: object
    values: np.ndarray
    step: int = 0
    time: float = 0.0
    _sums: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.values = np.array(self.values, dtype=float)
        if self.values.shape != (self.mesh.n_cells,):
            raise ValueError(f"expected {self.mesh.n_cells} cell values, got shape {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid function values must be finite")
        self.values.setflags(write=False)

    # compensated sums in cell order, so tolerances never depend on reduction order
    def _sum(self, key, weights):
        if key not in self._sums:
            self._sums[key] = math.fsum((self.mesh.areas * weights).tolist())
        return self._sums[key]

    def mass(self) -> float:
        return self._sum("mass", self.values)

    def l1(self) -> float:
        return self._sum("l1", np.abs(self.values))

    def l2_squared(self) -> float:
        return self._sum("l2", self.values ** 2)

    def to_text(self) -> str:
        head = f"gridfn v1 {len(self.values)} {self.time:.17g}"
        return "\n".join([head, *(f"{v:.17g}" for v in self.values)]) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def from_text(cls, text: str, mesh, step: int = 0) -> "GridFunction":
        lines = text.split()
        if lines[:2] != ["gridfn", "v1"]:
            raise ValueError("missing 'gridfn v1' header")
        n, t = int(lines[2]), float(lines[3])
        vals = np.array([float(v) for v in lines[4:]])
        if len(vals) != n:
            raise ValueError(f"header declares {n} values, found {len(vals)}")
        return cls(mesh, vals, step, t)


@dataclass(frozen=True)
class SchemeConfig:
    """``xi`` is the CFL margin, ``c0`` bounds ``dt <= c0 h``.

    ``projection_mode`` is ``"exact-clip"`` (polygon clipping where the data
    allows it, sampling otherwise) or ``"sampled"`` (always ``k*k`` midpoint
    samples per cell with ``k = sample_density``).
    """

    xi: float = 0.1
    c0: float = math.inf
    projection_mode: str = "exact-clip"
    sample_density: int = 4

    def __post_init__(self):
        check_xi(self.xi)
        check_real(self.c0, "c0", lo=0.0, lo_open=True)
        if self.projection_mode not in ("exact-clip", "sampled"):
            raise ValueError(f"unknown projection_mode {self.projection_mode!r}")
        check_positive_int(self.sample_density, "sample_density")


# ---------------------------------------------------------------- initial data


@dataclass(frozen=True)
class IndicatorData:
    """Indicator of a union of pairwise disjoint simple polygons."""

    polygons: tuple

    def __init__(self, polygons):
        polys = tuple(_ccw(np.asarray(p, dtype=float)) for p in polygons)
        for i, p in enumerate(polys):
            if p.ndim != 2 or p.shape[1] != 2 or len(p) < 3:
                raise ValueError(f"polygon {i} must be a list of at least three 2D points")
            if not geometry.is_simple(p):
                raise ValueError(f"polygon {i} is not simple")
        if not geometry.polygons_disjoint(polys):
            raise ValueError("polygons must be pairwise disjoint")
        object.__setattr__(self, "polygons", polys)

    @classmethod
    def rectangle(cls, x0, x1, y0, y1) -> "IndicatorData":
        return cls([[(x0, y0), (x1, y0), (x1, y1), (x0, y1)]])

    def __call__(self, pts) -> np.ndarray:
        pts = np.atleast_2d(pts)
        inside = np.zeros(len(pts), dtype=bool)
        for p in self.polygons:
            inside |= geometry.points_in_polygon(pts, p)
        return inside.astype(float)

    def bounds(self):
        allp = np.vstack(self.polygons)
        return allp[:, 0].min(), allp[:, 0].max(), allp[:, 1].min(), allp[:, 1].max()

    def area(self) -> float:
        return math.fsum(geometry.signed_area(p) for p in self.polygons)

    def perimeter(self) -> float:
        return math.fsum(float(np.sum(np.hypot(*(np.roll(p, -1, 0) - p).T))) for p in self.polygons)


@dataclass(frozen=True)
class PiecewiseConstantData:
    """Values on an auxiliary ``nx`` by ``ny`` cartesian grid (row-major)."""

    nx: int
    ny: int
    domain: tuple
    values: tuple

    def __init__(self, nx, ny, domain, values):
        nx, ny = check_positive_int(nx, "nx"), check_positive_int(ny, "ny")
        vals = np.asarray(values, dtype=float).ravel()
        if vals.shape != (nx * ny,) or not np.all(np.isfinite(vals)):
            raise ValueError(f"need {nx * ny} finite auxiliary values")
        object.__setattr__(self, "nx", nx)
        object.__setattr__(self, "ny", ny)
        object.__setattr__(self, "domain", tuple(float(v) for v in domain))
        object.__setattr__(self, "values", tuple(vals.tolist()))

    def _index(self, pts):
        x0, x1, y0, y1 = self.domain
        i = np.floor((pts[:, 0] - x0) / (x1 - x0) * self.nx).astype(np.int64)
        j = np.floor((pts[:, 1] - y0) / (y1 - y0) * self.ny).astype(np.int64)
        ok = (i >= 0) & (i < self.nx) & (j >= 0) & (j < self.ny)
        return i, j, ok

    def __call__(self, pts) -> np.ndarray:
        pts = np.atleast_2d(pts)
        i, j, ok = self._index(pts)
        out = np.zeros(len(pts))
        vals = np.asarray(self.values)
        out[ok] = vals[j[ok] * self.nx + i[ok]]
        return out

    def bounds(self):
        return self.domain

    def with_values(self, values) -> "PiecewiseConstantData":
        return PiecewiseConstantData(self.nx, self.ny, self.domain, values)


def _analytic_catalog(name, params):
    if name == "constant":
        c = float(params.get("value", 1.0))
        return lambda p: np.full(len(p), c)
    if name == "gaussian":
        cx, cy = params.get("center", (0.5, 0.5))
        s = float(params.get("width", 0.1))
        return lambda p: np.exp(-((p[:, 0] - cx) ** 2 + (p[:, 1] - cy) ** 2) / (2 * s * s))
    if name == "cosine_hill":
        cx, cy = params.get("center", (0.5, 0.5))
        r = float(params.get("radius", 0.25))

        def hill(p):
            d = np.hypot(p[:, 0] - cx, p[:, 1] - cy) / r
            return np.where(d < 1.0, 0.5 * (1.0 + np.cos(np.pi * np.minimum(d, 1.0))), 0.0)
        return hill
    raise ValueError(f"unknown analytic initial data {name!r}")


@dataclass(frozen=True)
class AnalyticData:
    """Catalog function: ``constant(value)``, ``gaussian(center, width)``, ``cosine_hill(center, radius)``."""

    name: str
    params: dict = field(default_factory=dict, hash=False)

    def __post_init__(self):
        _analytic_catalog(self.name, self.params)

    def __call__(self, pts) -> np.ndarray:
        return _analytic_catalog(self.name, self.params)(np.atleast_2d(pts))

    def bounds(self):
        return None


InitialData = IndicatorData | PiecewiseConstantData | AnalyticData


def _ccw(p):
    return p if geometry.signed_area(p) >= 0 else p[::-1].copy()


def _inside_box(bounds, domain, tol=1e-12) -> bool:
    x0, x1, y0, y1 = bounds
    d0, d1, e0, e1 = domain
    s = tol * max(d1 - d0, e1 - e0)
    return x0 >= d0 - s and x1 <= d1 + s and y0 >= e0 - s and y1 <= e1 + s


def project_initial(mesh, data, config: SchemeConfig = SchemeConfig()) -> GridFunction:
    """Cell averages of the initial data."""
    b = data.bounds()
    if b is not None and not _inside_box(b, mesh.domain):
        raise ValueError("initial data is not supported inside the mesh domain")
    if config.projection_mode == "sampled" or isinstance(data, AnalyticData):
        k = config.sample_density
        vals = quadrature.cell_integrals(mesh, data, "midpoint", k) / mesh.areas
    elif isinstance(data, IndicatorData):
        vals = _project_indicator(mesh, data)
    else:
        vals = _project_piecewise(mesh, data)
    return GridFunction(mesh, vals, 0, 0.0)


def _cell_boxes(mesh):
    lo = np.array([mesh.vertices[c].min(axis=0) for c in mesh.cells])
    hi = np.array([mesh.vertices[c].max(axis=0) for c in mesh.cells])
    return lo, hi


def _project_indicator(mesh, data: IndicatorData) -> np.ndarray:
    lo, hi = _cell_boxes(mesh)
    covered = np.zeros(mesh.n_cells)
    for poly in data.polygons:
        plo, phi = poly.min(axis=0), poly.max(axis=0)
        near = np.flatnonzero(np.all(hi > plo, axis=1) & np.all(lo < phi, axis=1))
        convex = geometry.is_convex(poly)
        for k in near:
            cell = mesh.cell_polygon(k)
            if convex and geometry.points_in_polygon(cell, poly).all():
                covered[k] += mesh.areas[k]
                continue
            covered[k] += geometry.intersection_area(cell, poly, _cell_tris(mesh, k))
    # exact averages of an indicator lie in [0, 1]; clipping round-off can overshoot by ulps
    return np.clip(covered / mesh.areas, 0.0, 1.0)


def _cell_tris(mesh, k):
    cache = mesh.__dict__.setdefault("_tris", {})
    if k not in cache:
        cell = mesh.cell_polygon(k)
        cache[k] = [cell] if geometry.is_convex(cell) else geometry.triangulate(cell)
    return cache[k]


def _project_piecewise(mesh, data: PiecewiseConstantData) -> np.ndarray:
    x0, x1, y0, y1 = data.domain
    dx, dy = (x1 - x0) / data.nx, (y1 - y0) / data.ny
    vals = np.asarray(data.values)
    lo, hi = _cell_boxes(mesh)
    out = np.zeros(mesh.n_cells)
    for k in range(mesh.n_cells):
        i0 = max(int(np.floor((lo[k, 0] - x0) / dx)), 0)
        i1 = min(int(np.ceil((hi[k, 0] - x0) / dx)), data.nx)
        j0 = max(int(np.floor((lo[k, 1] - y0) / dy)), 0)
        j1 = min(int(np.ceil((hi[k, 1] - y0) / dy)), data.ny)
        acc = []
        tris = None
        for j in range(j0, j1):
            for i in range(i0, i1):
                v = vals[j * data.nx + i]
                if v == 0.0:
                    continue
                ax0, ay0 = x0 + i * dx, y0 + j * dy
                rect = [(ax0, ay0), (ax0 + dx, ay0), (ax0 + dx, ay0 + dy), (ax0, ay0 + dy)]
                if tris is None:
                    tris = _cell_tris(mesh, k)
                acc.append(v * geometry.intersection_area(None, rect, tris))
        out[k] = math.fsum(acc) / mesh.areas[k]
    return out


# ---------------------------------------------------------------- time stepping


def inflow_sums(mesh, fluxes) -> np.ndarray:
    """Per cell, ``sum over inflow edges of |V_KL|``."""
    f = np.asarray(fluxes, dtype=float)
    recv = np.where(f > 0.0, mesh.right, mesh.left)
    active = (f != 0.0) & (recv != -1)
    return np.bincount(recv[active], weights=np.abs(f[active]), minlength=mesh.n_cells)


def cfl_bound(mesh, field: VelocityField, xi: float) -> float:
    """Largest ``dt`` allowed by the CFL condition at every time level.

    Uses ``max|g|`` and the larger of the inflow/outflow sums, so the bound
    holds whatever the sign of the time factor.
    """
    geo = geometric_fluxes(mesh, field)
    worst = np.maximum(inflow_sums(mesh, geo), inflow_sums(mesh, -geo)) * field.g_max()
    moving = worst > 0.0
    if not moving.any():
        return math.inf
    return float(np.min((1.0 - xi) * mesh.areas[moving] / worst[moving]))


def cfl_timestep(mesh, field: VelocityField, config: SchemeConfig, horizon: float) -> tuple[float, int]:
    """Largest ``dt = t/(N+1)`` meeting both CFL conditions; returns ``(dt, N)``."""
    horizon = check_real(horizon, "horizon", lo=0.0, lo_open=True)
    dt_max = min(cfl_bound(mesh, field, config.xi), config.c0 * mesh.h)
    if not math.isfinite(dt_max):
        dt_max = horizon
    steps = max(1, math.ceil(horizon / dt_max))
    # t / dt_max can land a few ulps above an integer when dt_max divides t exactly
    if steps > 1 and horizon / (steps - 1) <= dt_max * (1.0 + 4 * sys.float_info.epsilon):
        steps -= 1
    return horizon / steps, steps - 1


def upwind_step(u: GridFunction, fluxes, dt: float, xi: float = 0.0) -> GridFunction:
    """One explicit step in convex-combination form.

    Raises :class:`CFLViolationError` if some cell's inflow exceeds
    ``(1 - xi) |K|``.
    """
    mesh = u.mesh
    f = np.asarray(fluxes, dtype=float)
    recv = np.where(f > 0.0, mesh.right, mesh.left)
    donor = np.where(f > 0.0, mesh.left, mesh.right)
    active = (f != 0.0) & (recv != -1)
    recv, donor = recv[active], donor[active]
    moved = np.abs(f[active]) * dt

    inflow = np.bincount(recv, weights=moved, minlength=mesh.n_cells)
    limit = (1.0 - xi) * mesh.areas * (1.0 + CFL_RTOL)
    bad = np.flatnonzero(inflow > limit)
    if bad.size:
        k = int(bad[np.argmax(inflow[bad] / mesh.areas[bad])])
        raise CFLViolationError(
            f"CFL violated in cell {k} at step {u.step}: inflow*dt/|K| = "
            f"{inflow[k] / mesh.areas[k]:.6g} > 1 - xi = {1.0 - xi:.6g}", cell=k, step=u.step)

    self_weight = 1.0 - inflow / mesh.areas
    gathered = np.bincount(recv, weights=moved * u.values[donor], minlength=mesh.n_cells)
    new = self_weight * u.values + gathered / mesh.areas
    return GridFunction(mesh, new, u.step + 1, (u.step + 1) * dt)


@dataclass
class StepReport:
    """Per-level ledger: ``times[n]``, ``mass[n]``, ... for ``n = 0..N+1``."""

    dt: float
    n_steps: int
    times: list = field(default_factory=list)
    mass: list = field(default_factory=list)
    min: list = field(default_factory=list)
    max: list = field(default_factory=list)
    l1: list = field(default_factory=list)
    l2: list = field(default_factory=list)

    def record(self, u: GridFunction) -> None:
        self.times.append(u.time)
        self.mass.append(u.mass())
        self.min.append(float(u.values.min()))
        self.max.append(float(u.values.max()))
        self.l1.append(u.l1())
        self.l2.append(math.sqrt(u.l2_squared()))

    def rows(self):
        return zip(self.times, self.mass, self.min, self.max, self.l1, self.l2)


StepObserver = Callable[[GridFunction, GridFunction, np.ndarray, float], None]


def run_to_time(mesh, field: VelocityField, data, config: SchemeConfig, t: float,
                snapshot_times: Sequence[float] | None = None,
                observers: Sequence[StepObserver] = (), keep_all: bool = False,
                initial: GridFunction | None = None):
    """Project, then advance ``N + 1`` steps to reach ``t`` exactly.

    Returns ``(trajectory, report)``. The trajectory holds the snapshots
    nearest to ``snapshot_times`` (default: ``0`` and ``t``), or every level
    when ``keep_all`` is set. Observers are called after every step as
    ``observer(u_n, u_next, fluxes_n, dt)``.
    """
    check_compatible(field, mesh.boundary_kind, mesh.domain)
    dt, N = cfl_timestep(mesh, field, config, t)
    u = project_initial(mesh, data, config) if initial is None else initial
    steps = N + 1
    if snapshot_times is None:
        wanted = {0, steps}
    else:
        wanted = {min(steps, max(0, int(round(s / dt)))) for s in snapshot_times}

    table = FluxTable(mesh, field, dt)
    report = StepReport(dt=dt, n_steps=steps)
    report.record(u)
    trajectory = [u] if (keep_all or 0 in wanted) else []
    for n in range(steps):
        f = table[n]
        nxt = upwind_step(u, f, dt, config.xi)
        if nxt.step == steps:
            nxt.time = t
        for obs in observers:
            obs(u, nxt, f, dt)
        u = nxt
        report.record(u)
        if keep_all or u.step in wanted:
            trajectory.append(u)
    return trajectory, report
