"""Optimal position of a conductive disc in a composite heated from one side.

The state is the transient two-material heat equation with interfacial
resistance, the gradient comes from its adjoint and the disc-specialized
Hadamard formula, and the center descends by projected gradient steps.
"""

from .assembly import PhysicalParams, SystemOperators, apply_dirichlet, assemble
from .errors import (
    ConfigError, ContractViolation, HeatDiscError, InfeasibleGeometryError, MeshError,
    SolverError, VerificationFailure,
)
from .geometry import DiscGeometry, DomainSpec, interface_frame, project_center
from .gradient import ShapeGradient, ball_density, center_gradient, extract_traces
from .mesh import (
    InterfaceMesh, MeshParams, deform_mesh, generate_mesh, interface_quadrature,
)
from .optimizer import (
    OptimizerConfig, Problem, evaluate, fd_gradient_oracle, gradient_check, optimize,
)
from .solvers import (
    FunctionalSpec, RecordedTarget, TimeGrid, Trajectory, evaluate_J, solve_adjoint,
    solve_forward, solve_sensitivity,
)

__version__ = "0.1.0"
