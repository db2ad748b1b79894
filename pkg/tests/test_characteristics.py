import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fvadvect.characteristics import ExactSolution, FlowSampler, exact_solution_at, jacobian_check, richardson_order
from fvadvect.flow import VelocityField
from fvadvect.scheme import IndicatorData


def test_uniform_closed_forms():
    s = FlowSampler(VelocityField.uniform(1.0, 0.0))
    np.testing.assert_allclose(s.backward_flow([0.7, 0.2], 0.3), [0.4, 0.2], rtol=1e-15)
    np.testing.assert_allclose(s.forward_flow([0.7, 0.2], 0.3), [1.0, 0.2], rtol=1e-15)


def test_uniform_closed_form_matches_rk4_with_time_factor():
    f = VelocityField.uniform(0.8, -0.3, time="cosine", omega=2.0)
    closed = FlowSampler(f).backward_flow(np.array([[0.1, 0.9]]), 1.3)
    rk4 = FlowSampler(f)._integrate(np.array([[0.1, 0.9]]), 1.3, 0.0, 400)
    np.testing.assert_allclose(closed, rk4, atol=1e-12)


def test_periodic_wrap():
    s = FlowSampler(VelocityField.uniform(1.0, 0.0), periodic_box=(0, 1, 0, 1))
    np.testing.assert_allclose(s.backward_flow([0.1, 0.5], 0.3), [0.8, 0.5], atol=1e-15)


def test_stagnation_point():
    s = FlowSampler(VelocityField.cellular(1.0))
    for t in (0.1, 0.5, 2.0):
        np.testing.assert_allclose(s.backward_flow([0.5, 0.5], t), [0.5, 0.5], atol=1e-15)


def test_fourth_order_self_convergence():
    s = FlowSampler(VelocityField.cellular(1.0))
    x = np.array([0.3, 0.4])
    a, b, c = (s.backward_flow(x, 0.5, steps=n) for n in (4, 8, 16))
    ratio = np.linalg.norm(a - b) / np.linalg.norm(b - c)
    assert 12 <= ratio <= 20
    assert 3.7 <= richardson_order(s, x, 0.5) <= 4.3


@settings(max_examples=20, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(0.01, 0.99), st.floats(0.0, 2.0),
       st.sampled_from(["constant", "cosine"]))
def test_inverse_maps(x, y, t, time):
    s = FlowSampler(VelocityField.cellular(1.0, time=time, omega=1.5))
    p = np.array([x, y])
    np.testing.assert_allclose(s.backward_flow(s.forward_flow(p, t), t), p, atol=1e-8)


def test_stream_function_conserved():
    f = VelocityField.cellular(1.0)
    s = FlowSampler(f)
    pts = np.random.default_rng(0).uniform(0.05, 0.95, (50, 2))
    np.testing.assert_allclose(f.psi(s.forward_flow(pts, 1.0)), f.psi(pts), atol=1e-8)


def test_exact_solution_values():
    data = IndicatorData.rectangle(0.2, 0.4, 0.2, 0.4)
    sol = ExactSolution(data, FlowSampler(VelocityField.uniform(1.0, 0.0)))
    assert exact_solution_at(sol, [0.3, 0.3], 0.0) == 1.0
    assert exact_solution_at(sol, [0.45, 0.3], 0.1) == 1.0
    assert exact_solution_at(sol, [0.25, 0.3], 0.1) == 0.0
    grid = np.random.default_rng(1).uniform(0, 1, (500, 2))
    expected = ((grid[:, 0] > 0.3) & (grid[:, 0] < 0.5) & (grid[:, 1] > 0.2) & (grid[:, 1] < 0.4)).astype(float)
    np.testing.assert_array_equal(exact_solution_at(sol, grid, 0.1), expected)


def test_exact_solution_conserves_mass_under_cellular_flow():
    data = IndicatorData.rectangle(0.2, 0.5, 0.3, 0.6)
    sol = ExactSolution(data, FlowSampler(VelocityField.cellular(1.0)))
    g = (np.arange(200) + 0.5) / 200
    pts = np.stack(np.meshgrid(g, g), -1).reshape(-1, 2)
    mass = sol(pts, 0.7).mean()
    assert mass == pytest.approx(0.09, abs=2e-3)


def test_jacobian_checks():
    pts = np.random.default_rng(2).uniform(0, 1, (100, 2))
    assert jacobian_check(FlowSampler(VelocityField.uniform(0.3, 0.7)), pts, 0.8) <= 1e-9
    cell = FlowSampler(VelocityField.cellular(1.0))
    assert jacobian_check(cell, pts, 0.5) <= 1e-5
    assert jacobian_check(cell, pts, 0.0) <= 1e-10


def test_argument_checks():
    with pytest.raises(ValueError):
        FlowSampler(VelocityField.cellular(1.0), substeps_per_dt=0)
    with pytest.raises(ValueError):
        FlowSampler(VelocityField.cellular(1.0)).backward_flow([0.1, 0.1], -1.0)
