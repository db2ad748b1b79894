"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line; ``conftest.py`` prints them at the end of
the session. Run directly with ``python tests/test_acceptance.py``.
"""

import math
import sys
import time

import numpy as np
import pytest

from fvadvect.analysis import (
    BumpTestFunction, EnergyAccumulator, fit_eoc, l1_error, layer_cake_decompose, projection_error,
    weak_form_residual,
)
from fvadvect.characteristics import ExactSolution, FlowSampler, jacobian_check, richardson_order
from fvadvect.flow import FluxTable, VelocityField
from fvadvect.mesh import build_cartesian, build_perturbed_cartesian
from fvadvect.scheme import (
    GridFunction, IndicatorData, PiecewiseConstantData, SchemeConfig, cfl_bound, project_initial, run_to_time,
)

RESULTS = {}

LEVELS = (32, 64, 128, 256)
SQUARE = IndicatorData.rectangle(0.25, 0.5, 0.25, 0.5)
SHIFT = VelocityField.uniform(1.0, 0.0)
XI = 0.1
T = 0.5
PERTURBED_SEED = 7


def record(number, title, passed, detail):
    RESULTS[number] = f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {title}: {detail}"
    print(RESULTS[number])
    assert passed, RESULTS[number]


class Ledger:
    """Per-step observer for conservation and stability checks."""

    def __init__(self):
        self.worst_mass = 0.0
        self.worst_l1 = -math.inf
        self.worst_l2 = -math.inf
        self.lo = self.hi = None
        self.worst_bound = -math.inf
        self.mass0 = None

    def __call__(self, u, nxt, fluxes, dt):
        if self.mass0 is None:
            self.mass0 = u.mass()
            self.lo, self.hi = float(u.values.min()), float(u.values.max())
        scale = max(abs(self.mass0), u.l1())
        self.worst_mass = max(self.worst_mass, abs(nxt.mass() - self.mass0) / scale)
        self.worst_l1 = max(self.worst_l1, (nxt.l1() - u.l1()) / u.l1())
        self.worst_l2 = max(self.worst_l2, (nxt.l2_squared() - u.l2_squared()) / u.l2_squared())
        self.worst_bound = max(self.worst_bound, self.lo - float(nxt.values.min()),
                               float(nxt.values.max()) - self.hi)


def run_level(mesh, field, data, xi, t, **kw):
    acc, ledger = EnergyAccumulator(xi), Ledger()
    tr, rep = run_to_time(mesh, field, data, SchemeConfig(xi=xi), t, observers=[acc, ledger], **kw)
    return tr, rep, acc.report(), ledger


def study(kind):
    rows = []
    start = time.perf_counter()
    for n in LEVELS:
        if kind == "cartesian":
            m = build_cartesian(n, n, boundary_kind="periodic")
        else:
            m = build_perturbed_cartesian(n, n, magnitude=0.3, seed=PERTURBED_SEED, boundary_kind="periodic")
        tr, rep, energy, ledger = run_level(m, SHIFT, SQUARE, XI, T)
        exact = ExactSolution(SQUARE, FlowSampler(SHIFT, periodic_box=m.domain))
        rows.append({"n": n, "h": m.h, "error": l1_error(tr[-1], exact, T, 8), "energy": energy,
                     "ledger": ledger})
    return rows, time.perf_counter() - start


@pytest.fixture(scope="module")
def cartesian_study():
    return study("cartesian")


@pytest.fixture(scope="module")
def perturbed_study():
    return study("perturbed")


@pytest.fixture(scope="module")
def random_cellular_run():
    rng = np.random.default_rng(20240611)
    seed = int(rng.integers(2**31))
    m = build_perturbed_cartesian(8, 8, magnitude=0.3, seed=seed)
    field = VelocityField.cellular(float(rng.uniform(0.5, 2.0)), time="cosine", omega=float(rng.uniform(1.0, 6.0)))
    x0, x1 = sorted(rng.uniform(0.1, 0.9, 2))
    y0, y1 = sorted(rng.uniform(0.1, 0.9, 2))
    t = 20 * cfl_bound(m, field, XI) * (1 - 1e-9)
    tr, rep, energy, ledger = run_level(m, field, IndicatorData.rectangle(x0, x1, y0, y1), XI, t)
    return {"steps": rep.n_steps, "energy": energy, "ledger": ledger}


def all_runs(cart, pert, rand):
    return [r for r in cart[0]] + [r for r in pert[0]] + [rand]


def test_criterion_01_half_order_cartesian(cartesian_study):
    rows, seconds = cartesian_study
    p, _, _ = fit_eoc([r["h"] for r in rows], [r["error"] for r in rows])
    errs = ", ".join(f"{r['error']:.4g}" for r in rows)
    record(1, "EOC on cartesian meshes in [0.40, 0.65], < 60 s", 0.40 <= p <= 0.65 and seconds < 60,
           f"EOC = {p:.4f} (errors {errs}), {seconds:.1f} s")


def test_criterion_02_half_order_perturbed(perturbed_study):
    rows, seconds = perturbed_study
    p, _, _ = fit_eoc([r["h"] for r in rows], [r["error"] for r in rows])
    errs = ", ".join(f"{r['error']:.4g}" for r in rows)
    record(2, "EOC on perturbed meshes in [0.40, 0.75], < 120 s", 0.40 <= p <= 0.75 and seconds < 120,
           f"EOC = {p:.4f} (errors {errs}), {seconds:.1f} s")


def test_criterion_03_energy_identity(cartesian_study, perturbed_study, random_cellular_run):
    runs = all_runs(cartesian_study, perturbed_study, random_cellular_run)
    worst = max(r["energy"].identity_residual for r in runs)
    ok = worst <= 1e-12 and random_cellular_run["steps"] == 20
    record(3, "energy identity residual <= 1e-12", ok,
           f"worst residual {worst:.3g} over {len(runs)} runs (random cellular run: "
           f"{random_cellular_run['steps']} steps)")


def test_criterion_04_conservation_and_stability(cartesian_study, perturbed_study, random_cellular_run):
    ledgers = [r["ledger"] for r in all_runs(cartesian_study, perturbed_study, random_cellular_run)]
    mass = max(lg.worst_mass for lg in ledgers)
    bound = max(lg.worst_bound for lg in ledgers)
    l1 = max(lg.worst_l1 for lg in ledgers)
    l2 = max(lg.worst_l2 for lg in ledgers)
    ok = mass <= 1e-12 and bound <= 1e-14 and l1 <= 1e-12 and l2 <= 1e-12
    record(4, "mass, min/max, L1 and L2 ledgers", ok,
           f"mass drift {mass:.2g}, bound excess {bound:.2g}, L1 growth {l1:.2g}, L2 growth {l2:.2g}")


def test_criterion_05_energy_chain(cartesian_study, perturbed_study, random_cellular_run):
    reports = [r["energy"] for r in all_runs(cartesian_study, perturbed_study, random_cellular_run)]
    ratio = max(e.xi * e.E_h / (2 * e.eps_h) for e in reports)
    cs = max(e.cs_worst_excess for e in reports)
    ok = all(e.xi * e.E_h <= 2 * e.eps_h * (1 + 1e-12) for e in reports) and cs <= 0.0
    record(5, "xi E_h <= 2 eps_h and per-cell Cauchy-Schwarz", ok,
           f"max xi E_h / (2 eps_h) = {ratio:.4f}, worst per-cell excess {cs:.3g}")


def test_criterion_06_weak_form():
    m = build_cartesian(16, 16)
    field = VelocityField.cellular(1.0)
    tr, rep = run_to_time(m, field, IndicatorData.rectangle(0.25, 0.6, 0.3, 0.7), SchemeConfig(xi=XI), 0.5,
                          keep_all=True)
    table = FluxTable(m, field, rep.dt)
    phi = BumpTestFunction(center=(0.5, 0.5), radius=0.35, t_on=0.1, t_off=0.3, tilt=(0.3, -0.2))
    res = {q: weak_form_residual(tr, table, phi, q) for q in (2, 3, 4)}
    r4 = res[4]
    scale = max(abs(r4.mu) + abs(r4.nu), tr[-1].l1())
    ok = res[2].residual > res[3].residual > res[4].residual and r4.residual <= 1e-3 * scale
    record(6, "weak-form residual decreasing in q, <= 1e-3 relative at q = 4", ok,
           ", ".join(f"q={q}: {r.residual:.3g}" for q, r in res.items()) + f"; relative {r4.residual / scale:.3g}")


def test_criterion_07_characteristics():
    sampler = FlowSampler(VelocityField.cellular(1.0))
    pts = np.random.default_rng(7).uniform(0.0, 1.0, (200, 2))
    dev = jacobian_check(sampler, pts, 0.5)
    order = richardson_order(sampler, np.array([0.3, 0.4]), 0.5)
    record(7, "Jacobian <= 1e-4 and RK4 order in [3.7, 4.3]", dev <= 1e-4 and 3.7 <= order <= 4.3,
           f"max |det - 1| = {dev:.3g}, observed order {order:.3f}")


def test_criterion_08_superposition():
    rng = np.random.default_rng(8)
    data = PiecewiseConstantData(8, 8, (0, 1, 0, 1), rng.choice([0.0, 1.0, 2.5], size=64))
    m = build_perturbed_cartesian(16, 16, magnitude=0.3, seed=8)
    field = VelocityField.cellular(1.0)
    config = SchemeConfig(xi=XI)
    direct = run_to_time(m, field, data, config, 0.3)[0][-1]
    parts = layer_cake_decompose(np.asarray(data.values))
    combined = np.zeros(m.n_cells)
    for weight, ind in parts:
        combined += weight * run_to_time(m, field, data.with_values(ind), config, 0.3)[0][-1].values
    rel = GridFunction(m, combined - direct.values).l1() / direct.l1()
    record(8, "layer-cake superposition matches the direct run", len(parts) == 2 and rel <= 1e-12,
           f"{len(parts)} components, relative L1 difference {rel:.3g}")


def test_criterion_09_q_h_evidence(cartesian_study):
    rows, _ = cartesian_study
    q = [r["energy"].Q_h for r in rows]
    ratios = [b / a for a, b in zip(q, q[1:])]
    record(9, "Q_h(h/2) <= 1.5 Q_h(h) (empirical)", all(r <= 1.5 for r in ratios),
           "Q_h = " + ", ".join(f"{v:.6f}" for v in q) + "; ratios " + ", ".join(f"{r:.4f}" for r in ratios))


def test_criterion_10_exact_shift():
    data = IndicatorData.rectangle(0.2, 0.45, 0.2, 0.45)
    details, ok = [], True
    for n in (16, 32, 64):
        m = build_cartesian(n, n, boundary_kind="periodic")
        tr, rep = run_to_time(m, SHIFT, data, SchemeConfig(xi=0.0), T)
        u0, ut = tr[0], tr[-1]
        shifted = np.roll(u0.values.reshape(n, n), rep.n_steps, axis=1).ravel()
        diff = float(np.max(np.abs(ut.values - shifted)))
        exact = ExactSolution(data, FlowSampler(SHIFT, periodic_box=m.domain))
        err, proj = l1_error(ut, exact, T, 8), projection_error(u0, data, 8)
        unit = rep.dt * n == 1.0
        ok &= unit and diff <= 1e-14 and err <= proj * (1 + 1e-12)
        details.append(f"n={n}: CFL {rep.dt * n:g}, shift diff {diff:.2g}, error {err:.6g} vs projection {proj:.6g}")
    record(10, "unit-CFL transport is an exact shift", ok, "; ".join(details))


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
