import pytest

from heatdisc.assembly import PhysicalParams, assemble
from heatdisc.geometry import DiscGeometry
from heatdisc.mesh import MeshParams, generate_mesh
from heatdisc.optimizer import Problem, evaluate
from heatdisc.solvers import FunctionalSpec, RecordedTarget

COARSE = MeshParams(h=0.05, n_interface=32)
DESK = MeshParams(h=0.02, n_interface=64)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-resolution runs, deselect with -m 'not slow'")


@pytest.fixture(scope="session")
def physics():
    return PhysicalParams()


@pytest.fixture(scope="session")
def centered():
    return DiscGeometry((0.5, 0.5), 0.2)


@pytest.fixture(scope="session")
def coarse_mesh(centered):
    return generate_mesh(centered, COARSE)


@pytest.fixture(scope="session")
def offset_mesh():
    return generate_mesh(DiscGeometry((0.45, 0.4), 0.2), COARSE)


@pytest.fixture(scope="session")
def coarse_ops(coarse_mesh, physics):
    return assemble(coarse_mesh, physics)


@pytest.fixture
def coarse_problem(physics):
    return Problem(physics, FunctionalSpec.constant(), COARSE, n_steps=10)


@pytest.fixture(scope="session")
def recorded_spec(physics):
    """The state of the disc at (0.5, 0.75) on the desk-scale mesh, as a target."""
    desired = evaluate(DiscGeometry((0.5, 0.75), 0.2),
                       Problem(physics, FunctionalSpec.constant(), DESK), with_gradient=False)
    return FunctionalSpec.from_recording(RecordedTarget(desired.mesh, desired.u, physics))
