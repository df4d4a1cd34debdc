import numpy as np
import pytest

from heatdisc.assembly import PhysicalParams
from heatdisc.geometry import DiscGeometry
from heatdisc.gradient import (
    TERM_NAMES, BallDensity, ball_density, center_gradient, extract_traces, shape_gradient,
)
from heatdisc.mesh import MeshParams, interface_quadrature
from heatdisc.optimizer import Problem, adjoint_versus_oracle, evaluate
from heatdisc.solvers import ADJOINT, FORWARD, FunctionalSpec, TimeGrid, Trajectory

from conftest import DESK

GRID = TimeGrid(0.5, 10)


def constant_fields(mesh, value, kind):
    return Trajectory(np.full((GRID.n_steps + 1, mesh.n_nodes), value), kind, GRID, mesh)


@pytest.fixture(scope="module")
def state(offset_mesh):
    problem = Problem(PhysicalParams(), FunctionalSpec.constant(), n_steps=GRID.n_steps)
    return evaluate(offset_mesh.geometry, problem, mesh=offset_mesh)


def test_traces_of_constant_fields(coarse_mesh):
    u = constant_fields(coarse_mesh, 3.0, FORWARD)
    g = constant_fields(coarse_mesh, -2.0, ADJOINT)
    traces = extract_traces(coarse_mesh, u, g, np.zeros_like(u.fields))
    assert np.all(traces.u_s == 3.0) and np.all(traces.u_o == 3.0)
    assert np.all(traces.g_s == -2.0) and np.all(traces.g_o == -2.0)
    assert np.all(traces.du_s == 0.0) and np.all(traces.du_o == 0.0)
    assert np.abs(traces.tu_s).max() < 1e-10
    assert np.abs(traces.tg_o).max() < 1e-10


def test_tangential_derivative_of_linear_field(coarse_mesh):
    x = coarse_mesh.vertices[:, 0]
    u = Trajectory(np.tile(x, (GRID.n_steps + 1, 1)), FORWARD, GRID, coarse_mesh)
    g = constant_fields(coarse_mesh, 0.0, ADJOINT)
    traces = extract_traces(coarse_mesh, u, g, np.zeros_like(u.fields))
    tau_x = traces.quadrature.tangents[:, 0]
    np.testing.assert_allclose(traces.tu_s, np.broadcast_to(tau_x, traces.tu_s.shape), atol=1e-12)
    np.testing.assert_allclose(traces.tu_o, np.broadcast_to(tau_x, traces.tu_o.shape), atol=1e-12)


def test_rates_are_backward_differences(coarse_mesh):
    ramp = np.arange(GRID.n_steps + 1)[:, None] * np.ones(coarse_mesh.n_nodes)
    u = Trajectory(ramp, FORWARD, GRID, coarse_mesh)
    g = constant_fields(coarse_mesh, 0.0, ADJOINT)
    traces = extract_traces(coarse_mesh, u, g, np.zeros_like(ramp))
    assert np.all(traces.du_s[0] == 0.0)
    np.testing.assert_allclose(traces.du_s[1:], 1.0 / GRID.dt, rtol=1e-12)


def test_forward_state_has_a_jump(state):
    traces = extract_traces(state.mesh, state.u, state.adjoint, state.targets)
    assert np.abs(traces.u_o - traces.u_s).max() > 0


def test_no_heating_gives_zero_gradient(offset_mesh):
    problem = Problem(PhysicalParams(U_M=0.0), FunctionalSpec.constant(), n_steps=GRID.n_steps)
    cold = evaluate(offset_mesh.geometry, problem, mesh=offset_mesh)
    assert cold.J == 0.0
    assert np.all(cold.gradient.density == 0.0)
    assert np.all(cold.gradient.g_center == 0.0)


def test_density_ignores_tangent_orientation(state, physics):
    forward = extract_traces(state.mesh, state.u, state.adjoint, state.targets)
    backward = extract_traces(state.mesh, state.u, state.adjoint, state.targets,
                              orientation=-1.0)
    np.testing.assert_array_equal(backward.tu_s, -forward.tu_s)
    a = ball_density(forward, physics, state.geometry)
    b = ball_density(backward, physics, state.geometry)
    np.testing.assert_array_equal(a.total, b.total)
    np.testing.assert_array_equal(a.terms, b.terms)


def test_terms_add_up(state):
    gradient = state.gradient
    assert gradient.terms.shape == (len(TERM_NAMES), len(gradient.density))
    np.testing.assert_allclose(gradient.terms.sum(axis=0), gradient.density,
                               rtol=1e-12, atol=1e-12 * np.abs(gradient.density).max())
    np.testing.assert_allclose(gradient.diagnostics.sum(axis=0), gradient.g_center,
                               rtol=1e-10, atol=1e-12 * np.abs(gradient.g_center).max())


def test_constant_density_has_no_resultant(offset_mesh):
    q = interface_quadrature(offset_mesh)
    ones = np.ones(len(q.weights))
    gradient = center_gradient(BallDensity(ones, ones[None, :]), q, offset_mesh.geometry)
    assert np.abs(gradient.g_center).max() <= 1e-12 * offset_mesh.perimeter()


def test_directional_derivative_is_linear(state):
    gradient = state.gradient
    q = gradient.quadrature
    scale = float(np.sum(q.weights * np.abs(gradient.density)))
    gx, gy = gradient.g_center
    assert gradient.directional((1.0, 0.0)) == pytest.approx(gx, abs=1e-12 * scale)
    assert gradient.directional((0.0, 1.0)) == pytest.approx(gy, abs=1e-12 * scale)
    assert gradient.directional((2.0, -3.0)) == pytest.approx(2 * gx - 3 * gy, abs=1e-11 * scale)


def test_flipped_sign(state, physics):
    flipped = shape_gradient(state.mesh, state.u, state.adjoint, state.targets, physics,
                             sign=-1.0)
    np.testing.assert_array_equal(flipped.g_center, -state.gradient.g_center)


def test_mirror_symmetric_configuration(coarse_mesh):
    problem = Problem(PhysicalParams(), FunctionalSpec.constant(), n_steps=GRID.n_steps)
    centered = evaluate(coarse_mesh.geometry, problem, mesh=coarse_mesh)
    gx, gy = centered.gradient.g_center
    assert abs(gx) <= 1e-2 * abs(gy)


@pytest.fixture(scope="module")
def fidelity_problems(physics, recorded_spec):
    return {
        "constant": (Problem(physics, FunctionalSpec.constant(), DESK), (0.5, 0.5)),
        "recorded": (Problem(physics, recorded_spec, DESK), (0.5, 0.35)),
        "zero": (Problem(physics, FunctionalSpec.zero(), DESK), (0.5, 0.3)),
    }


@pytest.mark.slow
@pytest.mark.parametrize("variant", ["constant", "recorded", "zero"])
def test_adjoint_agrees_with_finite_differences(fidelity_problems, variant):
    problem, center = fidelity_problems[variant]
    state, check = adjoint_versus_oracle(DiscGeometry(center, 0.2), problem, delta=1e-3)
    assert check.passed, check
    assert np.isnan(check.rel_errors[0])
    assert np.sign(check.adjoint[1]) == np.sign(check.fd[1])


@pytest.mark.slow
def test_disagreement_shrinks_under_refinement(physics):
    geom = DiscGeometry((0.5, 0.5), 0.2)
    coarse = MeshParams(h=0.04, n_interface=32)
    errors = []
    for mesh_params, n_steps in ((coarse, 25), (coarse.refined(), 50)):
        problem = Problem(physics, FunctionalSpec.constant(), mesh_params, n_steps=n_steps)
        _, check = adjoint_versus_oracle(geom, problem, delta=1e-3, mode="deform")
        errors.append(check.rel_errors[1])
    assert errors[1] < errors[0]
