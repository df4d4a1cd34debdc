"""Backward Euler solves of the state and adjoint problems.

The state starts from zero and is held at U_M on Γ0.  The adjoint runs
backward from zero at t = T with homogeneous data on Γ0 and a source
M_S (u - target) that lives only on S.  Both use the same matrix
M + dt(K + B), so a single factorization serves a whole evaluation.
"""

from dataclasses import dataclass
import enum
import logging

import numpy as np

from .assembly import apply_dirichlet
from .errors import ContractViolation
from .mesh import transfer_matrix

logger = logging.getLogger(__name__)

FORWARD = "forward"
ADJOINT = "adjoint"
SENSITIVITY = "sensitivity"


@dataclass(frozen=True)
class TimeGrid:
    T: float
    n_steps: int = 50

    def __post_init__(self):
        if self.n_steps < 1:
            raise ContractViolation(f"n_steps must be at least 1, got {self.n_steps}")
        if not self.T > 0:
            raise ContractViolation(f"T must be positive, got {self.T}")

    @property
    def dt(self):
        return self.T / self.n_steps

    @property
    def times(self):
        return self.dt * np.arange(self.n_steps + 1)

    def refined(self):
        return TimeGrid(self.T, 2 * self.n_steps)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Nodal fields at t_0 .. t_N of one transient solve."""
    fields: np.ndarray
    kind: str
    grid: TimeGrid
    mesh: object

    def __len__(self):
        return len(self.fields)

    def deviation_norms(self, M, value):
        """‖u^k - value‖_M for every k."""
        v = self.fields - value
        return np.sqrt(np.einsum("ki,ki->k", v, (M @ v.T).T))

    def comparison_violation(self, U_M):
        """How far the field leaves [0, U_M], as a fraction of U_M."""
        if U_M == 0:
            return float(np.abs(self.fields).max())
        low = max(0.0, -self.fields.min())
        high = max(0.0, self.fields.max() - U_M)
        return max(low, high) / abs(U_M)


class TargetKind(enum.Enum):
    CONSTANT = "constant"
    RECORDED = "recorded"
    ZERO = "zero"


@dataclass(frozen=True, eq=False)
class RecordedTarget:
    """A stored state u_D together with the mesh it lives on."""
    mesh: object
    trajectory: Trajectory
    params: object = None


@dataclass(frozen=True, eq=False)
class FunctionalSpec:
    """Selects the tracking target of J = ∫∫_S |u - target|²."""
    kind: TargetKind = TargetKind.CONSTANT
    recorded: RecordedTarget = None

    def __post_init__(self):
        if self.kind is TargetKind.RECORDED and self.recorded is None:
            raise ContractViolation("a recorded target needs a stored trajectory")

    @classmethod
    def constant(cls):
        return cls(TargetKind.CONSTANT)

    @classmethod
    def zero(cls):
        return cls(TargetKind.ZERO)

    @classmethod
    def from_recording(cls, recorded):
        return cls(TargetKind.RECORDED, recorded)

    def targets(self, mesh, grid, params):
        """Target values at every node and time level, shape (N+1, n_nodes)."""
        shape = (grid.n_steps + 1, mesh.n_nodes)
        if self.kind is TargetKind.CONSTANT:
            return np.full(shape, float(params.U_M))
        if self.kind is TargetKind.ZERO:
            return np.zeros(shape)
        stored = self.recorded.trajectory
        if stored.grid != grid:
            raise ContractViolation(f"recorded target uses {stored.grid}, run uses {grid}")
        P = transfer_matrix(self.recorded.mesh, mesh.vertices, mesh.node_region)
        return (P @ stored.fields.T).T


def solve_forward(ops, grid, params, system=None):
    """Runs the state problem from u^0 = 0 with u = U_M on Γ0.

    Raises:
        SolverError: if a step produces a non-finite field.
    """
    if system is None:
        system = apply_dirichlet(ops, params.U_M, grid.dt)
    system = system.with_value(params.U_M)
    fields = np.zeros((grid.n_steps + 1, ops.mesh.n_nodes))
    for k in range(grid.n_steps):
        fields[k + 1] = system.solve(ops.M @ fields[k], step=k + 1)
    logger.debug("forward solve: %d steps, final mean %.6g", grid.n_steps, fields[-1].mean())
    return Trajectory(fields, FORWARD, grid, ops.mesh)


def solve_adjoint(ops, grid, params, spec, u, system=None, targets=None):
    """Runs the adjoint problem backward from g^N = 0.

    (M + dt(K + B)) g^k = M g^{k+1} + dt M_S (u^k - target^k), g = 0 on Γ0.
    """
    _check_pairing(ops, grid, u)
    if targets is None:
        targets = spec.targets(ops.mesh, grid, params)
    if system is None:
        system = apply_dirichlet(ops, 0.0, grid.dt)
    system = system.with_value(0.0)
    dt = grid.dt
    fields = np.zeros_like(u.fields)
    for k in range(grid.n_steps - 1, -1, -1):
        rhs = ops.M @ fields[k + 1] + dt * (ops.M_S @ (u.fields[k] - targets[k]))
        fields[k] = system.solve(rhs, step=k)
    return Trajectory(fields, ADJOINT, grid, ops.mesh)


def solve_sensitivity(ops, grid, sources, system=None):
    """Linearized state: w^0 = 0, (M + dt(K + B)) w^{k+1} = M w^k + dt M_S r^{k+1}.

    `sources` has shape (N+1, n_nodes); row 0 is unused.  Against the
    adjoint g of the same system it satisfies

        Σ_{k<N} dt r^{k+1}ᵀ M_S g^k = Σ_{k<N} dt (u^k - target^k)ᵀ M_S w^{k+1}.
    """
    if system is None:
        system = apply_dirichlet(ops, 0.0, grid.dt)
    system = system.with_value(0.0)
    fields = np.zeros((grid.n_steps + 1, ops.mesh.n_nodes))
    for k in range(grid.n_steps):
        rhs = ops.M @ fields[k] + grid.dt * (ops.M_S @ sources[k + 1])
        fields[k + 1] = system.solve(rhs, step=k + 1)
    return Trajectory(fields, SENSITIVITY, grid, ops.mesh)


def evaluate_J(u, spec, ops, targets=None):
    """Right-endpoint rule Σ_{k=1..N} dt (u^k - target^k)ᵀ M_S (u^k - target^k)."""
    if targets is None:
        targets = spec.targets(ops.mesh, u.grid, ops.params)
    e = u.fields[1:] - targets[1:]
    per_step = np.einsum("ki,ki->k", e, (ops.M_S @ e.T).T)
    return float(u.grid.dt * per_step.sum())


def _check_pairing(ops, grid, u):
    if u.kind != FORWARD:
        raise ContractViolation(f"expected a forward trajectory, got {u.kind}")
    if u.grid != grid or u.fields.shape != (grid.n_steps + 1, ops.mesh.n_nodes):
        raise ContractViolation("trajectory does not match the mesh or time grid")
