import numpy as np
import pytest

from heatdisc.assembly import PhysicalParams, apply_dirichlet, assemble
from heatdisc.errors import ContractViolation
from heatdisc.mesh import REGION_S
from heatdisc.solvers import (
    FORWARD, FunctionalSpec, RecordedTarget, TargetKind, TimeGrid, Trajectory, evaluate_J,
    solve_adjoint, solve_forward, solve_sensitivity,
)

GRID = TimeGrid(0.5, 10)


@pytest.fixture(scope="module")
def forward(coarse_ops, physics):
    return solve_forward(coarse_ops, GRID, physics)


def test_time_grid():
    assert GRID.dt == 0.05
    assert len(GRID.times) == 11
    assert GRID.times[-1] == pytest.approx(0.5)
    assert GRID.refined().n_steps == 20
    with pytest.raises(ContractViolation):
        TimeGrid(0.5, 0)


def test_no_heating_stays_cold(coarse_mesh):
    params = PhysicalParams(U_M=0.0)
    ops = assemble(coarse_mesh, params)
    u = solve_forward(ops, GRID, params)
    assert np.all(u.fields == 0.0)
    assert evaluate_J(u, FunctionalSpec.constant(), ops) == 0.0


def test_forward_starts_cold_and_holds_bottom(forward, coarse_ops, physics):
    assert forward.kind == FORWARD
    assert len(forward) == GRID.n_steps + 1
    assert np.all(forward.fields[0] == 0.0)
    assert np.all(forward.fields[1:, coarse_ops.dirichlet_nodes] == physics.U_M)


def test_forward_is_dissipative(forward, coarse_ops, physics):
    norms = forward.deviation_norms(coarse_ops.M, physics.U_M)
    assert np.all(np.diff(norms) <= 1e-12 * norms[0])
    assert norms[-1] < norms[GRID.n_steps // 2] < norms[0]


def test_interface_resistance_makes_a_jump(forward, coarse_mesh, physics):
    final = forward.fields[-1]
    jump = final[coarse_mesh.iface_o] - final[coarse_mesh.iface_s]
    assert np.abs(jump).max() > 1e-3 * physics.U_M


def test_long_horizon_reaches_heating_value(coarse_mesh):
    params = PhysicalParams(T=20.0)
    ops = assemble(coarse_mesh, params)
    u = solve_forward(ops, TimeGrid(20.0, 200), params)
    assert np.abs(u.fields[-1] - params.U_M).max() <= 0.5


def test_frozen_zero_state(coarse_ops, coarse_mesh, physics):
    cold = Trajectory(np.zeros((GRID.n_steps + 1, coarse_mesh.n_nodes)), FORWARD, GRID,
                      coarse_mesh)
    J = evaluate_J(cold, FunctionalSpec.constant(), coarse_ops)
    assert J == pytest.approx(500 ** 2 * 0.5 * coarse_mesh.region_area(REGION_S), rel=1e-12)
    assert J == pytest.approx(500 ** 2 * 0.5 * (1 - np.pi * 0.04), rel=2e-3)
    assert evaluate_J(cold, FunctionalSpec.zero(), coarse_ops) == 0.0


def test_functional_is_nonnegative(forward, coarse_ops):
    for spec in (FunctionalSpec.constant(), FunctionalSpec.zero()):
        assert evaluate_J(forward, spec, coarse_ops) >= 0.0


def test_self_recorded_target(forward, coarse_ops, coarse_mesh, physics):
    spec = FunctionalSpec.from_recording(RecordedTarget(coarse_mesh, forward, physics))
    assert spec.kind is TargetKind.RECORDED
    targets = spec.targets(coarse_mesh, GRID, physics)
    np.testing.assert_array_equal(targets, forward.fields)
    assert evaluate_J(forward, spec, coarse_ops, targets) == 0.0
    g = solve_adjoint(coarse_ops, GRID, physics, spec, forward, targets=targets)
    assert np.all(g.fields == 0.0)


def test_recorded_target_on_another_mesh(forward, coarse_mesh, offset_mesh, physics):
    spec = FunctionalSpec.from_recording(RecordedTarget(coarse_mesh, forward, physics))
    targets = spec.targets(offset_mesh, GRID, physics)
    assert targets.shape == (GRID.n_steps + 1, offset_mesh.n_nodes)
    assert np.all(targets[0] == 0.0)
    bottom = offset_mesh.dirichlet_nodes
    np.testing.assert_allclose(targets[1:, bottom], physics.U_M, rtol=1e-12)


def test_recorded_target_needs_matching_grid(forward, coarse_mesh, physics):
    spec = FunctionalSpec.from_recording(RecordedTarget(coarse_mesh, forward, physics))
    with pytest.raises(ContractViolation):
        spec.targets(coarse_mesh, TimeGrid(0.5, 20), physics)
    with pytest.raises(ContractViolation):
        FunctionalSpec(TargetKind.RECORDED)


def test_adjoint_final_condition(forward, coarse_ops, physics):
    g = solve_adjoint(coarse_ops, GRID, physics, FunctionalSpec.zero(), forward)
    assert np.all(g.fields[-1] == 0.0)
    assert np.all(g.fields[:, coarse_ops.dirichlet_nodes] == 0.0)
    assert np.abs(g.fields[0]).max() > 0


def test_adjoint_rejects_mismatched_state(forward, coarse_ops, physics):
    with pytest.raises(ContractViolation):
        solve_adjoint(coarse_ops, TimeGrid(0.5, 20), physics, FunctionalSpec.constant(), forward)


def test_duality_with_sensitivity(forward, coarse_ops, coarse_mesh, physics):
    spec = FunctionalSpec.constant()
    targets = spec.targets(coarse_mesh, GRID, physics)
    system = apply_dirichlet(coarse_ops, 0.0, GRID.dt)
    g = solve_adjoint(coarse_ops, GRID, physics, spec, forward, system, targets)

    sources = np.random.default_rng(3).normal(size=forward.fields.shape)
    w = solve_sensitivity(coarse_ops, GRID, sources, system)
    M_S = coarse_ops.M_S
    e = forward.fields - targets
    lhs = GRID.dt * sum(sources[k + 1] @ (M_S @ g.fields[k]) for k in range(GRID.n_steps))
    rhs = GRID.dt * sum(e[k] @ (M_S @ w.fields[k + 1]) for k in range(GRID.n_steps))
    assert lhs == pytest.approx(rhs, rel=1e-9)


def test_comparison_bounds(forward, physics):
    assert forward.comparison_violation(physics.U_M) < 0.1
