import math

from hypothesis import given, settings, strategies as st
import numpy as np
import pytest

from heatdisc.assembly import PhysicalParams, apply_dirichlet, assemble
from heatdisc.errors import ContractViolation
from heatdisc.mesh import REGION_O, REGION_S


def test_operators_are_exactly_symmetric(coarse_ops):
    for A in (coarse_ops.M, coarse_ops.K, coarse_ops.B, coarse_ops.M_S):
        assert (A != A.T).nnz == 0


def test_mass_integrates_areas(coarse_ops, coarse_mesh):
    one = np.ones(coarse_mesh.n_nodes)
    assert one @ coarse_ops.M @ one == pytest.approx(1.0, rel=1e-12)
    assert one @ coarse_ops.M_S @ one == pytest.approx(
        coarse_mesh.region_area(REGION_S), rel=1e-12)


def test_constants_are_in_the_kernel(coarse_ops, coarse_mesh):
    one = np.ones(coarse_mesh.n_nodes)
    assert np.abs(coarse_ops.K @ one).max() < 1e-9
    assert np.abs(coarse_ops.B @ one).max() < 1e-9


def test_constant_jump_energy_is_perimeter_over_R(coarse_ops, coarse_mesh, physics):
    z = (coarse_mesh.node_region == REGION_O).astype(float)
    energy = z @ coarse_ops.B @ z
    assert energy == pytest.approx(coarse_mesh.perimeter() / physics.R, rel=1e-12)
    assert energy == pytest.approx(64 * 0.2 * math.sin(math.pi / 32) / physics.R, rel=1e-12)
    # the jump costs nothing inside K
    assert abs(z @ coarse_ops.K @ z) < 1e-9


@settings(max_examples=20)
@given(st.integers(0, 2 ** 32 - 1))
def test_energy_is_nonnegative(coarse_ops, seed):
    v = np.random.default_rng(seed).normal(size=coarse_ops.M.shape[0])
    assert coarse_ops.energy(v) >= -1e-9 * (v @ v) * coarse_ops.params.kappa


def test_eliminated_system_is_positive_definite(coarse_ops):
    A = coarse_ops.A.toarray()
    free = np.setdiff1d(np.arange(len(A)), coarse_ops.dirichlet_nodes)
    np.linalg.cholesky(A[np.ix_(free, free)])


def test_kappa_weights_only_the_disc(coarse_mesh, physics):
    x = coarse_mesh.vertices[:, 0]
    inside = coarse_mesh.node_region == REGION_O
    low = assemble(coarse_mesh, PhysicalParams(kappa=2.0))
    high = assemble(coarse_mesh, PhysicalParams(kappa=4.0))
    # a field linear on S and zero on O has no κ dependence
    v = np.where(inside, 0.0, x)
    assert v @ low.K @ v == pytest.approx(v @ high.K @ v, rel=1e-12)
    # and one linear on O only scales with κ
    w = np.where(inside, x, 0.0)
    assert w @ high.K @ w == pytest.approx(2 * (w @ low.K @ w), rel=1e-12)
    assert w @ high.K @ w == pytest.approx(4.0 * coarse_mesh.region_area(REGION_O), rel=1e-12)


def test_dirichlet_values_are_exact(coarse_ops, coarse_mesh):
    system = apply_dirichlet(coarse_ops, 500.0, 0.01)
    rhs = coarse_ops.M @ np.full(coarse_mesh.n_nodes, 100.0)
    x = system.solve(rhs)
    assert np.all(x[coarse_ops.dirichlet_nodes] == 500.0)
    assert np.all(np.isfinite(x))


def test_zero_data_gives_zero(coarse_ops, coarse_mesh):
    system = apply_dirichlet(coarse_ops, 0.0, 0.01)
    assert np.all(system.solve(np.zeros(coarse_mesh.n_nodes)) == 0.0)


def test_factorization_is_shared(coarse_ops):
    system = apply_dirichlet(coarse_ops, 500.0, 0.01)
    other = system.with_value(0.0)
    assert other.factor is system.factor
    assert other.value == 0.0


def test_steady_solution_is_the_heating_value(coarse_ops, coarse_mesh):
    # with a huge step the backward Euler solve approaches the steady state u = U_M
    system = apply_dirichlet(coarse_ops, 500.0, 1e8)
    x = system.solve(np.zeros(coarse_mesh.n_nodes))
    np.testing.assert_allclose(x, 500.0, rtol=1e-6)


@pytest.mark.parametrize("kwargs", [{"kappa": 1.0}, {"R": 0.0}, {"T": -1.0}])
def test_bad_physics(kwargs):
    with pytest.raises(ContractViolation):
        PhysicalParams(**kwargs)
