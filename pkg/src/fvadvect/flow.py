"""Divergence-free velocity fields given by stream functions.

The velocity is ``g(t) * (d psi/dy, -d psi/dx)``. Edge fluxes are the
stream-function increment along the oriented edge, times the time average of
``g`` over the step, so every cell's discrete divergence telescopes to zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_real


@dataclass(frozen=True)
class VelocityField:
    """Catalog field: ``stream`` in {"uniform", "cellular"}, ``time`` in {"constant", "cosine"}.

    ``uniform(a, b)`` has ``psi = a*y - b*x`` (velocity ``(a, b)``);
    ``cellular(A)`` has ``psi = (A/pi) sin(pi x) sin(pi y)``.
    """

    stream: str = "uniform"
    a: float = 1.0
    b: float = 0.0
    amplitude: float = 1.0
    time: str = "constant"
    omega: float = 1.0
    time_quadrature_points: int = field(default=3, compare=False)

    def __post_init__(self):
        if self.stream not in ("uniform", "cellular"):
            raise ValueError(f"unknown stream function {self.stream!r}")
        if self.time not in ("constant", "cosine"):
            raise ValueError(f"unknown time factor {self.time!r}")
        for name in ("a", "b", "amplitude", "omega"):
            check_real(getattr(self, name), name)
        if self.time_quadrature_points < 1:
            raise ValueError("time_quadrature_points must be >= 1")

    @classmethod
    def uniform(cls, a=1.0, b=0.0, **kw) -> "VelocityField":
        return cls(stream="uniform", a=a, b=b, **kw)

    @classmethod
    def cellular(cls, amplitude=1.0, **kw) -> "VelocityField":
        return cls(stream="cellular", amplitude=amplitude, **kw)

    @property
    def is_steady(self) -> bool:
        return self.time == "constant"

    def psi(self, xy) -> np.ndarray:
        xy = np.asarray(xy, dtype=float)
        x, y = xy[..., 0], xy[..., 1]
        if self.stream == "uniform":
            return self.a * y - self.b * x
        return (self.amplitude / math.pi) * np.sin(math.pi * x) * np.sin(math.pi * y)

    def g(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.time == "constant":
            return np.ones_like(t)
        return np.cos(self.omega * t)

    def g_integral(self, t) -> np.ndarray:
        """``int_0^t g``."""
        t = np.asarray(t, dtype=float)
        if self.time == "constant":
            return t
        if self.omega == 0.0:
            return t
        return np.sin(self.omega * t) / self.omega

    def g_max(self) -> float:
        return 1.0

    def g_average(self, t0: float, t1: float) -> float:
        """Gauss-Legendre average of ``g`` over ``[t0, t1]``."""
        if self.time == "constant":
            return 1.0
        nodes, weights = np.polynomial.legendre.leggauss(self.time_quadrature_points)
        mid, half = 0.5 * (t0 + t1), 0.5 * (t1 - t0)
        return 0.5 * float(np.dot(weights, self.g(mid + half * nodes)))

    def steady_velocity(self, xy) -> np.ndarray:
        """``(d psi/dy, -d psi/dx)`` without the time factor."""
        xy = np.asarray(xy, dtype=float)
        if self.stream == "uniform":
            out = np.empty(xy.shape)
            out[..., 0] = self.a
            out[..., 1] = self.b
            return out
        x, y = math.pi * xy[..., 0], math.pi * xy[..., 1]
        A = self.amplitude
        return np.stack([A * np.sin(x) * np.cos(y), -A * np.cos(x) * np.sin(y)], axis=-1)

    def velocity(self, xy, t) -> np.ndarray:
        v = self.steady_velocity(xy)
        return v * np.asarray(self.g(t))[..., None]

    def velocity_gradient(self, xy) -> np.ndarray:
        """Steady Jacobian ``dV_i/dx_j`` with shape ``(..., 2, 2)``."""
        xy = np.asarray(xy, dtype=float)
        out = np.zeros(xy.shape[:-1] + (2, 2))
        if self.stream == "cellular":
            x, y = math.pi * xy[..., 0], math.pi * xy[..., 1]
            c = math.pi * self.amplitude
            out[..., 0, 0] = c * np.cos(x) * np.cos(y)
            out[..., 0, 1] = -c * np.sin(x) * np.sin(y)
            out[..., 1, 0] = c * np.sin(x) * np.sin(y)
            out[..., 1, 1] = -c * np.cos(x) * np.cos(y)
        return out

    def w1inf_bound(self) -> float:
        """Bound on ``max(sup|V|, sup|grad V|)`` over the plane and all times."""
        if self.stream == "uniform":
            return math.hypot(self.a, self.b) * self.g_max()
        return max(abs(self.amplitude), math.pi * abs(self.amplitude)) * self.g_max()

    def speed_bound(self) -> float:
        if self.stream == "uniform":
            return math.hypot(self.a, self.b) * self.g_max()
        return abs(self.amplitude) * self.g_max()

    def is_tangent_on(self, domain) -> bool:
        """Whether the normal velocity vanishes on the sides of the box."""
        x0, x1, y0, y1 = domain
        if self.stream == "uniform":
            return self.a == 0.0 and self.b == 0.0
        if self.amplitude == 0.0:
            return True
        return all(float(v).is_integer() for v in (x0, x1, y0, y1))

    def is_periodic_on(self, domain) -> bool:
        x0, x1, y0, y1 = domain
        if self.stream == "uniform" or self.amplitude == 0.0:
            return True
        return all(float(w).is_integer() and int(w) % 2 == 0 for w in (x1 - x0, y1 - y0))


def check_compatible(field: VelocityField, boundary_kind: str, domain) -> None:
    """Reject field/boundary combinations that would let mass cross the box."""
    if boundary_kind == "impermeable" and not field.is_tangent_on(domain):
        hint = "; uniform fields require periodic boundaries" if field.stream == "uniform" else ""
        raise ValueError(f"{field.stream} field is not tangent to the boundary of {domain}{hint}")
    if boundary_kind == "periodic" and not field.is_periodic_on(domain):
        raise ValueError(f"{field.stream} field is not periodic on {domain}")


def geometric_fluxes(mesh, field: VelocityField) -> np.ndarray:
    """Per-edge ``psi(b) - psi(a)``: the steady flux from left to right cell.

    Impermeable boundary edges are set to exactly zero.
    """
    psi = field.psi(mesh.vertices)
    f = psi[mesh.edges[:, 1]] - psi[mesh.edges[:, 0]]
    f[~mesh.interior] = 0.0
    return f


def edge_time_flux(mesh, field: VelocityField, n: int, dt: float, geometric=None) -> np.ndarray:
    """Fluxes ``V_KL^n`` for step ``n`` (left-to-right orientation, one per edge)."""
    dt = check_real(dt, "dt", lo=0.0, lo_open=True)
    base = geometric_fluxes(mesh, field) if geometric is None else geometric
    if field.is_steady:
        return base.copy()
    return base * field.g_average(n * dt, (n + 1) * dt)


class FluxTable:
    """Lazily evaluated ``V_KL^n`` for all steps of a run with fixed ``dt``."""

    def __init__(self, mesh, field: VelocityField, dt: float):
        self.mesh = mesh
        self.field = field
        self.dt = check_real(dt, "dt", lo=0.0, lo_open=True)
        self.geometric = geometric_fluxes(mesh, field)
        self.geometric.setflags(write=False)

    def __getitem__(self, n: int) -> np.ndarray:
        return edge_time_flux(self.mesh, self.field, n, self.dt, self.geometric)


def discrete_divergence(mesh, fluxes) -> np.ndarray:
    """Per-cell sum of outward fluxes."""
    fluxes = np.asarray(fluxes, dtype=float)
    div = np.bincount(mesh.left, weights=fluxes, minlength=mesh.n_cells)
    inner = mesh.interior
    div -= np.bincount(mesh.right[inner], weights=fluxes[inner], minlength=mesh.n_cells)
    return div
