"""Characteristic flow maps and the exact solution ``u(x, t) = u0(X(x, t))``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .flow import VelocityField


@dataclass(frozen=True)
class FlowSampler:
    """Fixed-step classical RK4 integration of ``dZ/dtau = V(Z, tau)``.

    An integration over ``[0, t]`` uses ``ceil(t / dt_ref) * substeps_per_dt``
    uniform steps. Set ``periodic_box`` to wrap positions after every step.
    """

    field: VelocityField
    substeps_per_dt: int = 16
    dt_ref: float = 0.05
    periodic_box: tuple | None = None

    def __post_init__(self):
        if self.substeps_per_dt < 1:
            raise ValueError("substeps_per_dt must be >= 1")
        if not self.dt_ref > 0:
            raise ValueError("dt_ref must be positive")

    def n_steps(self, t: float) -> int:
        return max(1, math.ceil(t / self.dt_ref - 1e-12)) * self.substeps_per_dt

    def wrap(self, x: np.ndarray) -> np.ndarray:
        if self.periodic_box is None:
            return x
        x0, x1, y0, y1 = self.periodic_box
        out = np.empty_like(x)
        out[..., 0] = x0 + np.mod(x[..., 0] - x0, x1 - x0)
        out[..., 1] = y0 + np.mod(x[..., 1] - y0, y1 - y0)
        return out

    def _integrate(self, x, t_from, t_to, steps):
        z = np.array(x, dtype=float)
        h = (t_to - t_from) / steps
        V = self.field.velocity
        tau = t_from
        for i in range(steps):
            tau = t_from + i * h
            k1 = V(z, tau)
            k2 = V(z + 0.5 * h * k1, tau + 0.5 * h)
            k3 = V(z + 0.5 * h * k2, tau + 0.5 * h)
            k4 = V(z + h * k3, tau + h)
            z = self.wrap(z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
        return z

    def _shift(self, t):
        f = self.field
        return np.array([f.a, f.b]) * float(f.g_integral(t))

    def backward_flow(self, x, t: float, steps: int | None = None) -> np.ndarray:
        """``X(x, t)``: the foot at time 0 of the characteristic through ``(x, t)``."""
        if t < 0:
            raise ValueError("t must be >= 0")
        x = np.asarray(x, dtype=float)
        if t == 0:
            return x.copy()
        if self.field.stream == "uniform":
            return self.wrap(x - self._shift(t))
        return self._integrate(x, t, 0.0, steps or self.n_steps(t))

    def forward_flow(self, x, t: float, steps: int | None = None) -> np.ndarray:
        """``Y(x, t)``: position at time ``t`` of the particle starting at ``x``."""
        if t < 0:
            raise ValueError("t must be >= 0")
        x = np.asarray(x, dtype=float)
        if t == 0:
            return x.copy()
        if self.field.stream == "uniform":
            return self.wrap(x + self._shift(t))
        return self._integrate(x, 0.0, t, steps or self.n_steps(t))


@dataclass(frozen=True)
class ExactSolution:
    data: object
    sampler: FlowSampler

    def __call__(self, pts, t: float) -> np.ndarray:
        return self.data(self.sampler.backward_flow(np.atleast_2d(pts), t))


def exact_solution_at(sol: ExactSolution, x, t: float):
    """Value(s) of the exact solution; scalar in, scalar out."""
    x = np.asarray(x, dtype=float)
    out = sol(x.reshape(-1, 2), t)
    return float(out[0]) if x.ndim == 1 else out


def jacobian_check(sampler: FlowSampler, points, t: float, fd_step: float | None = None,
                   size: float = 1.0) -> float:
    """Worst ``|det grad X - 1|`` over ``points``, by central differences."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    eps = 1e-5 * size if fd_step is None else fd_step
    ex, ey = np.array([eps, 0.0]), np.array([0.0, eps])
    stacked = np.concatenate([p + ex, p - ex, p + ey, p - ey])
    X = sampler.backward_flow(stacked, t)
    n = len(p)
    dx = (X[:n] - X[n:2 * n]) / (2 * eps)
    dy = (X[2 * n:3 * n] - X[3 * n:]) / (2 * eps)
    det = dx[:, 0] * dy[:, 1] - dx[:, 1] * dy[:, 0]
    return float(np.max(np.abs(det - 1.0)))


def richardson_order(sampler: FlowSampler, x, t: float, steps: int = 4, forward: bool = False) -> float:
    """Observed order from three runs with ``steps``, ``2 steps`` and ``4 steps``."""
    run = sampler.forward_flow if forward else sampler.backward_flow
    a, b, c = (run(np.asarray(x, dtype=float), t, steps=s) for s in (steps, 2 * steps, 4 * steps))
    return math.log2(float(np.linalg.norm(a - b)) / float(np.linalg.norm(b - c)))
