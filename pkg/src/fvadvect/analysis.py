"""Error norms, discrete energy functionals, weak-form residuals and EOC fits."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import geometry, quadrature
from .characteristics import ExactSolution, FlowSampler
from .flow import VelocityField
from .scheme import GridFunction

# ---------------------------------------------------------------- L1 error


def l1_error(u_h: GridFunction, exact: ExactSolution, t: float, k: int = 8, chunk: int = 8192) -> float:
    """Midpoint-rule ``||u(., t) - u_h||_L1`` with ``k*k`` samples per cell."""
    mesh = u_h.mesh
    parts = []
    for pts, w, own in quadrature.cell_rule(mesh, "midpoint", k, chunk):
        parts.append(math.fsum(w * np.abs(u_h.values[own] - exact(pts, t))))
    return math.fsum(parts)


@dataclass(frozen=True)
class ErrorReport:
    l1_at_t: float
    linf_t_l1: float
    sampling_density: int
    estimated_quadrature_error: float
    times: tuple = ()
    l1_per_time: tuple = ()


def l1_error_estimated(u_h, exact, t, k=8, rtol=0.01, k_max=64):
    """Double ``k`` until the value moves by less than ``rtol`` (relative).

    Returns ``(error, k_used, estimate)`` where ``estimate`` is the last change.
    """
    prev = l1_error(u_h, exact, t, k)
    while True:
        cur = l1_error(u_h, exact, t, 2 * k)
        change = abs(cur - prev)
        k *= 2
        if change <= rtol * max(abs(cur), 1e-300) or 2 * k > k_max:
            return cur, k, change
        prev = cur


def error_report(snapshots, exact: ExactSolution, k: int = 8, adaptive: bool = False) -> ErrorReport:
    """L1 errors at every snapshot; the last snapshot defines ``l1_at_t``."""
    errs, est, k_used = [], 0.0, k
    for u in snapshots:
        if adaptive:
            e, k_used, d = l1_error_estimated(u, exact, u.time, k)
        else:
            e = l1_error(u, exact, u.time, k)
            d = abs(l1_error(u, exact, u.time, 2 * k) - e) if u is snapshots[-1] else 0.0
        errs.append(e)
        est = max(est, d)
    return ErrorReport(errs[-1], max(errs), k_used, est,
                       tuple(u.time for u in snapshots), tuple(errs))


def projection_error(u0: GridFunction, data, k: int = 8) -> float:
    """``||u_h(., 0) - u0||_L1`` by the same sampling as :func:`l1_error`."""
    exact = ExactSolution(data, FlowSampler(VelocityField.uniform(0.0, 0.0)))
    return l1_error(u0, exact, 0.0, k)


# ---------------------------------------------------------------- total variation


def discrete_total_variation(u_h: GridFunction) -> float:
    """Sum over interior edges of ``length * |jump|``."""
    mesh = u_h.mesh
    inner = mesh.interior
    jumps = np.abs(u_h.values[mesh.left[inner]] - u_h.values[mesh.right[inner]])
    return math.fsum(mesh.lengths[inner] * jumps)

# ---------------------------------------------------------------- energy


def _inflow_arrays(mesh, f, u):
    recv = np.where(f > 0.0, mesh.right, mesh.left)
    donor = np.where(f > 0.0, mesh.left, mesh.right)
    active = (f != 0.0) & (recv != -1)
    return recv[active], donor[active], np.abs(f[active])


@dataclass
class EnergyReport:
    E_h: float
    Q_h: float
    eps_h: float
    identity_residual: float
    identity_rhs: float = 0.0
    dissipation_first_sum: float = 0.0
    flux_jump_sum: float = 0.0
    cs_worst_excess: float = 0.0
    xi: float = 0.0

    def chain_holds(self, rtol: float = 1e-12) -> bool:
        """``xi E_h <= 2 eps_h (1 + rtol)`` and the per-cell bound never failed."""
        return self.xi * self.E_h <= 2.0 * self.eps_h * (1.0 + rtol) and self.cs_worst_excess <= 0.0


class EnergyAccumulator:
    """Step observer accumulating ``E_h``, ``Q_h`` and both sides of the energy identity.

    Pass an instance in ``observers=`` of :func:`fvadvect.scheme.run_to_time`,
    then call :meth:`report`.
    """

    def __init__(self, xi: float = 0.0):
        self.xi = xi
        self._time_sq, self._flux_sq, self._q = [], [], []
        self._first, self._second = [], []
        self.l2_first = None
        self.l2_last = None
        self.cs_worst_excess = -math.inf
        self.steps = 0

    def __call__(self, u: GridFunction, nxt: GridFunction, fluxes, dt: float) -> None:
        mesh = u.mesh
        area = mesh.areas
        if self.l2_first is None:
            self.l2_first = u.l2_squared()
        recv, donor, absf = _inflow_arrays(mesh, np.asarray(fluxes, dtype=float), u.values)
        w = absf * dt
        d = u.values[donor] - u.values[recv]
        C = mesh.n_cells
        W0 = np.bincount(recv, weights=w, minlength=C)
        Wd = np.bincount(recv, weights=w * d, minlength=C)
        Wd2 = np.bincount(recv, weights=w * d * d, minlength=C)

        du = nxt.values - u.values
        time_sq = area * du * du
        self._time_sq.append(float(np.sum(time_sq)))
        self._flux_sq.append(float(np.sum(w * d * d)))
        self._q.append(float(np.sum(w * np.abs(d))))

        self_w = 1.0 - W0 / area
        self._first.append(float(np.sum(self_w[recv] * w * d * d)))
        self._second.append(float(np.sum((W0 * Wd2 - Wd * Wd) / area)))

        cs_rhs = (W0 / area) * Wd2
        # du carries an absolute rounding error of a few ulps of max|u|
        delta = 1e-14 * max(1.0, float(np.max(np.abs(u.values))))
        excess = time_sq - cs_rhs * (1.0 + 1e-12) - area * delta * (2.0 * np.abs(du) + delta)
        self.cs_worst_excess = max(self.cs_worst_excess, float(np.max(excess)))

        self.l2_last = nxt.l2_squared()
        self.steps += 1

    def report(self) -> EnergyReport:
        if self.steps == 0:
            return EnergyReport(0.0, 0.0, 0.0, 0.0, xi=self.xi, cs_worst_excess=0.0)
        E = math.fsum(self._time_sq) + math.fsum(self._flux_sq)
        eps = self.l2_first - self.l2_last
        first, second = math.fsum(self._first), math.fsum(self._second)
        rhs = first + second
        resid = abs(eps - rhs) / max(1.0, abs(eps))
        return EnergyReport(
            E_h=E, Q_h=math.fsum(self._q), eps_h=eps, identity_residual=resid,
            identity_rhs=rhs, dissipation_first_sum=first,
            flux_jump_sum=math.fsum(self._flux_sq),
            cs_worst_excess=self.cs_worst_excess, xi=self.xi)


def energy_quantities(trajectory, fluxtables, xi: float = 0.0) -> EnergyReport:
    """``E_h``, ``Q_h``, ``eps_h`` over a full trajectory (every time level)."""
    n_steps = len(trajectory) - 1
    if hasattr(fluxtables, "__len__") and len(fluxtables) < n_steps:
        raise ValueError(f"{n_steps} steps but only {len(fluxtables)} flux tables")
    dt = _run_dt(trajectory, fluxtables)
    acc = EnergyAccumulator(xi)
    for n in range(n_steps):
        acc(trajectory[n], trajectory[n + 1], fluxtables[n], dt)
    return acc.report()


def energy_identity_residual(trajectory, fluxtables) -> float:
    return energy_quantities(trajectory, fluxtables).identity_residual


def _run_dt(trajectory, fluxtables):
    if hasattr(fluxtables, "dt"):
        return fluxtables.dt
    if len(trajectory) < 2:
        return 1.0
    return trajectory[1].time - trajectory[0].time

# ---------------------------------------------------------------- smooth ramps


def _f(z):
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    pos = z > 0
    out[pos] = np.exp(-1.0 / z[pos])
    return out


def _fp(z):
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    pos = z > 0
    out[pos] = np.exp(-1.0 / z[pos]) / z[pos] ** 2
    return out


def smoothstep(z):
    """C-infinity ramp: 0 for ``z <= 0``, 1 for ``z >= 1``."""
    a, b = _f(z), _f(1.0 - np.asarray(z, dtype=float))
    return a / (a + b)


def smoothstep_prime(z):
    z = np.asarray(z, dtype=float)
    a, b = _f(z), _f(1.0 - z)
    ap, bp = _fp(z), _fp(1.0 - z)
    return (ap * b + a * bp) / (a + b) ** 2


def gamma(R):
    """Ramp with ``gamma = 0`` for ``R <= 1/3`` and ``1`` for ``R >= 2/3``."""
    return smoothstep(3.0 * np.asarray(R, dtype=float) - 1.0)


def gamma_prime_max() -> float:
    z = np.linspace(0.0, 1.0, 200001)
    return 3.0 * float(np.max(smoothstep_prime(z)))

# ---------------------------------------------------------------- test functions


@dataclass(frozen=True)
class BumpTestFunction:
    """``(1 + tilt . (x - c)) * B(|x - c| / r) * T(s)``.

    ``B(rho) = exp(1 - 1/(1 - rho^2))`` on the unit disc; ``T`` is 1 before
    ``t_on``, 0 after ``t_off``, with a C-infinity ramp in between.
    """

    center: tuple = (0.5, 0.5)
    radius: float = 0.35
    t_on: float = 0.1
    t_off: float = 0.3
    tilt: tuple = (0.0, 0.0)

    def _parts(self, x, s):
        x = np.asarray(x, dtype=float)
        c = np.asarray(self.center, dtype=float)
        rel = (x - c) / self.radius
        rho2 = np.sum(rel * rel, axis=-1)
        inside = rho2 < 1.0
        denom = np.where(inside, 1.0 - rho2, 1.0)
        B = np.where(inside, np.exp(1.0 - 1.0 / denom), 0.0)
        gB = (B * (-2.0 / denom ** 2))[..., None] * rel / self.radius
        tilt = np.asarray(self.tilt, dtype=float)
        P = 1.0 + (x - c) @ tilt
        span = self.t_off - self.t_on
        z = (np.asarray(s, dtype=float) - self.t_on) / span
        T = 1.0 - smoothstep(z)
        Tp = -smoothstep_prime(z) / span
        return B, gB, P, tilt, T, Tp

    def value(self, x, s):
        B, _, P, _, T, _ = self._parts(x, s)
        return P * B * T

    def grad(self, x, s):
        B, gB, P, tilt, T, _ = self._parts(x, s)
        return (P[..., None] * gB + B[..., None] * tilt) * np.asarray(T)[..., None]

    def dt(self, x, s):
        B, _, P, _, _, Tp = self._parts(x, s)
        return P * B * Tp


class ProofTestFunction:
    """``phi(x, s) = phi0(X(x, s)) * T(s)`` built around a polygon union ``A``.

    ``phi0 = +/- gamma(d(x, dA) / sqrt(t h))`` with the sign given by
    membership in ``A``; ``T`` drops smoothly from 1 to 0 on ``[t, t + dt]``.
    Derivatives are central differences of step ``fd_step``.
    """

    def __init__(self, polygons, field, t: float, h: float, dt: float,
                 sampler: FlowSampler | None = None, fd_step: float = 1e-6):
        if not (t * h > 0):
            raise ValueError("t * h must be positive")
        self.polygons = [np.asarray(p, dtype=float) for p in polygons]
        self.t, self.h, self.dt_cut = float(t), float(h), float(dt)
        self.scale = 1.0 / math.sqrt(self.t * self.h)
        self.sampler = sampler or FlowSampler(field)
        self.fd_step = fd_step

    def phi0(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        inside = np.zeros(len(x), dtype=bool)
        for p in self.polygons:
            inside |= geometry.points_in_polygon(x, p)
        g = gamma(self.scale * geometry.distance_to_boundary(x, self.polygons))
        return np.where(inside, g, -g)

    def cutoff(self, s):
        return 1.0 - smoothstep((np.asarray(s, dtype=float) - self.t) / self.dt_cut)

    def value(self, x, s):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, 2)
        s = float(s)
        base = self.phi0(self.sampler.backward_flow(flat, min(s, self.t + self.dt_cut)))
        return (base * self.cutoff(s)).reshape(x.shape[:-1])

    def grad(self, x, s):
        x = np.asarray(x, dtype=float)
        e = self.fd_step
        gx = (self.value(x + [e, 0.0], s) - self.value(x - [e, 0.0], s)) / (2 * e)
        gy = (self.value(x + [0.0, e], s) - self.value(x - [0.0, e], s)) / (2 * e)
        return np.stack([gx, gy], axis=-1)

    def dt(self, x, s):
        e = self.fd_step
        lo = max(float(s) - e, 0.0)
        return (self.value(x, float(s) + e) - self.value(x, lo)) / (float(s) + e - lo)


def build_proof_test_function(polygons, field, t: float, h: float, dt: float, **kw) -> ProofTestFunction:
    return ProofTestFunction(polygons, field, t, h, dt, **kw)

# ---------------------------------------------------------------- weak form


@dataclass(frozen=True)
class WeakFormResult:
    lhs: float
    mu: float
    nu: float
    residual: float


def weak_form_residual(trajectory, fluxtables, phi, q: int = 4) -> WeakFormResult:
    """Both sides of the discrete weak formulation with Gauss order ``q``.

    ``trajectory`` must contain every time level; ``fluxtables`` is the
    :class:`~fvadvect.flow.FluxTable` of the run. ``phi`` must vanish from
    the last time level on.
    """
    mesh = trajectory[0].mesh
    field = fluxtables.field
    dt = fluxtables.dt
    n_steps = len(trajectory) - 1
    area = mesh.areas
    C = mesh.n_cells

    (P, Wp, own), = list(quadrature.cell_rule(mesh, "gauss", q))
    tau, omega = quadrature.rule_1d("gauss", q)
    EP, EW = quadrature.edge_rule(mesh, q)
    normals = mesh.normals

    if mesh.boundary_kind == "impermeable":
        on_bd = EP[~mesh.interior].reshape(-1, 2)
        if on_bd.size and np.any(np.abs(phi.value(on_bd, 0.0)) > 0.0):
            warnings.warn("test function does not vanish on the impermeable boundary", stacklevel=2)
    t_end = n_steps * dt
    if np.any(np.abs(phi.value(P, t_end)) > 0.0):
        warnings.warn("test function does not vanish at the final time level", stacklevel=2)

    def cell_sum(vals):
        return np.bincount(own, weights=Wp * vals, minlength=C)

    lhs_parts, mu_parts, nu_parts = [], [], []
    lhs_parts.append(math.fsum(trajectory[0].values * cell_sum(phi.value(P, 0.0))))
    for n in range(n_steps):
        u, nxt = trajectory[n].values, trajectory[n + 1].values
        t0 = n * dt
        svals = t0 + dt * tau
        space_time = np.zeros(C)
        mean_phi = np.zeros(C)
        edge_avg = np.zeros(mesh.n_edges)
        for s, om in zip(svals, omega):
            V = field.velocity(P, s)
            transport = phi.dt(P, s) + np.sum(V * phi.grad(P, s), axis=-1)
            space_time += om * dt * cell_sum(transport)
            mean_phi += om * cell_sum(phi.value(P, s))
            Ve = field.velocity(EP, s)
            vn = np.einsum("ekd,ed->ek", Ve, normals)
            edge_avg += om * np.sum(EW * vn * phi.value(EP, s), axis=1)
        mean_phi /= area
        edge_avg /= mesh.lengths
        end_phi = cell_sum(phi.value(P, t0 + dt)) / area

        lhs_parts.append(math.fsum(u * space_time))
        mu_parts.append(math.fsum(area * (nxt - u) * (mean_phi - end_phi)))

        f = np.asarray(fluxtables[n], dtype=float)
        into_right = f > 0.0
        recv = np.where(into_right, mesh.right, mesh.left)
        donor = np.where(into_right, mesh.left, mesh.right)
        active = (f != 0.0) & (recv != -1)
        # V_KL and <V.n phi>_KL seen from the receiving cell
        v_kl = np.where(into_right, -f, f)[active]
        vn_kl = np.where(into_right, -edge_avg, edge_avg)[active]
        r, d = recv[active], donor[active]
        terms = dt * (u[d] - u[r]) * (v_kl * mean_phi[r] - mesh.lengths[active] * vn_kl)
        nu_parts.append(math.fsum(terms))

    lhs, mu, nu = math.fsum(lhs_parts), math.fsum(mu_parts), math.fsum(nu_parts)
    return WeakFormResult(lhs, mu, nu, abs(lhs - (mu + nu)))

# ---------------------------------------------------------------- layer cake


def layer_cake_decompose(values):
    """Signed level-set decomposition of finitely valued data.

    Returns ``[(weight, indicator), ...]`` with ``indicator`` a 0/1 array;
    positive levels use ``{v >= eta}``, negative levels ``{v <= eta}`` with a
    negative weight. ``sum(w * ind)`` reproduces ``values``.
    """
    v = np.asarray(values, dtype=float)
    out = []
    prev = 0.0
    for eta in np.unique(v[v > 0]):
        out.append((float(eta - prev), (v >= eta).astype(float)))
        prev = eta
    prev = 0.0
    for eta in np.unique(v[v < 0])[::-1]:
        out.append((float(eta - prev), (v <= eta).astype(float)))
        prev = eta
    return out

# ---------------------------------------------------------------- EOC


def fit_eoc(h, err) -> tuple[float, float, float]:
    """Least-squares fit ``log e = p log h + c``; returns ``(p, c, rms residual)``."""
    h = np.asarray(h, dtype=float)
    e = np.asarray(err, dtype=float)
    if len(h) < 2:
        raise ValueError("need at least two rows to fit an order")
    if np.any(e <= 0):
        raise ValueError("errors must be positive to take logarithms")
    if len(np.unique(h)) != len(h):
        raise ValueError("mesh sizes must be distinct")
    x, y = np.log(h), np.log(e)
    if len(x) == 2:
        p = (y[0] - y[1]) / (x[0] - x[1])
    else:
        xc, yc = x - x.mean(), y - y.mean()
        p = float(np.sum(xc * yc) / np.sum(xc * xc))
    c = float(np.mean(y - p * x))
    res = float(np.sqrt(np.mean((p * x + c - y) ** 2)))
    return float(p), float(c), res


def estimate_eoc(rows) -> float:
    """Slope of ``log e`` against ``log h`` for rows ``(h, e)``."""
    rows = list(rows)
    return fit_eoc([r[0] for r in rows], [r[1] for r in rows])[0]


CONVERGENCE_HEADER = ("h", "dt", "xi", "mesh", "l1_error", "E_h", "Q_h", "eps_h", "identity_residual")


@dataclass
class ConvergenceTable:
    rows: list = field(default_factory=list)

    def add(self, h, dt, xi, mesh_kind, l1_error, energy: EnergyReport) -> None:
        self.rows.append((h, dt, xi, mesh_kind, l1_error, energy.E_h, energy.Q_h,
                          energy.eps_h, energy.identity_residual))
        self.rows.sort(key=lambda r: -r[0])

    def fit(self):
        return fit_eoc([r[0] for r in self.rows], [r[4] for r in self.rows])
