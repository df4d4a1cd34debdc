"""Sparse operators of the two-material heat equation.

For P1 fields on an InterfaceMesh the weak form reads

    d/dt vᵀ M u + vᵀ (K + B) u = 0,

with M the mass matrix over S ∪ O, K the stiffness matrix weighted 1 on S
and κ on O, and B the interface matrix (1/R)∫[v][u] coupling each
interface node with its duplicate.  Every operator is symmetrized as
(A + Aᵀ)/2 after assembly, which makes it exactly symmetric.
"""

from dataclasses import dataclass, replace
import logging

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .errors import ContractViolation, SolverError
from .mesh import REGION_O, REGION_S

logger = logging.getLogger(__name__)

_LOCAL_MASS = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0
_EDGE_MASS = np.array([[1.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 1.0 / 3.0]])
# unknown order per interface side: s_a, s_b, o_a, o_b; [v] = v_O - v_S
_JUMP_SIGN = np.array([-1.0, -1.0, 1.0, 1.0])
_JUMP_END = np.array([0, 1, 0, 1])


@dataclass(frozen=True)
class PhysicalParams:
    """Conductivity ratio, interface resistance, heating temperature and horizon."""
    kappa: float = 100.0
    R: float = 1e-2
    U_M: float = 500.0
    T: float = 0.5

    def __post_init__(self):
        if not self.kappa > 1:
            raise ContractViolation(f"kappa must exceed 1, got {self.kappa}")
        if not self.R > 0:
            raise ContractViolation(f"R must be positive, got {self.R}")
        if not self.T > 0:
            raise ContractViolation(f"T must be positive, got {self.T}")


@dataclass(frozen=True, eq=False)
class SystemOperators:
    mesh: object
    params: PhysicalParams
    M: sparse.csr_matrix
    K: sparse.csr_matrix
    B: sparse.csr_matrix
    M_S: sparse.csr_matrix
    dirichlet_nodes: np.ndarray

    @property
    def A(self):
        """The composite form K + B."""
        return (self.K + self.B).tocsr()

    def energy(self, v):
        """a(v, v) = vᵀ (K + B) v."""
        return float(v @ (self.K @ v) + v @ (self.B @ v))


def triangle_gradients(vertices, triangles):
    """Gradients of the P1 hat functions, shape (n_triangles, 3, 2), and areas."""
    p = vertices[triangles]
    x, y = p[..., 0], p[..., 1]
    det = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (y[:, 1] - y[:, 0]) * (x[:, 2] - x[:, 0])
    grads = np.empty(p.shape)
    grads[:, 0, 0] = y[:, 1] - y[:, 2]
    grads[:, 0, 1] = x[:, 2] - x[:, 1]
    grads[:, 1, 0] = y[:, 2] - y[:, 0]
    grads[:, 1, 1] = x[:, 0] - x[:, 2]
    grads[:, 2, 0] = y[:, 0] - y[:, 1]
    grads[:, 2, 1] = x[:, 1] - x[:, 0]
    grads /= det[:, None, None]
    return grads, 0.5 * det


def assemble(mesh, params):
    """Assembles M, K, B and the S-restricted mass M_S.

    Dirichlet nodes on Γ0 are recorded, not eliminated.
    """
    n = mesh.n_nodes
    tri = mesh.triangles
    grads, areas = triangle_gradients(mesh.vertices, tri)

    rows = np.broadcast_to(tri[:, :, None], (len(tri), 3, 3)).ravel()
    cols = np.broadcast_to(tri[:, None, :], (len(tri), 3, 3)).ravel()

    weight = np.where(mesh.region == REGION_O, params.kappa, 1.0)
    gg = (grads[:, :, None, 0] * grads[:, None, :, 0]
          + grads[:, :, None, 1] * grads[:, None, :, 1])
    k_local = (weight * areas)[:, None, None] * gg
    m_local = areas[:, None, None] * _LOCAL_MASS[None]
    s_local = np.where((mesh.region == REGION_S)[:, None, None], m_local, 0.0)

    M = _symmetric(m_local.ravel(), rows, cols, n)
    K = _symmetric(k_local.ravel(), rows, cols, n)
    M_S = _symmetric(s_local.ravel(), rows, cols, n)
    B = _symmetric(*_interface_entries(mesh, params.R), n)

    logger.debug("assembled %d x %d operators, %d nonzeros in K", n, n, K.nnz)
    return SystemOperators(mesh, params, M, K, B, M_S, mesh.dirichlet_nodes)


def _interface_entries(mesh, R):
    dofs = np.column_stack([mesh.iface_s, mesh.iface_o])
    local = (_JUMP_SIGN[:, None] * _JUMP_SIGN[None, :]
             * _EDGE_MASS[_JUMP_END[:, None], _JUMP_END[None, :]])
    values = (mesh.iface_length / R)[:, None, None] * local[None]
    rows = np.broadcast_to(dofs[:, :, None], values.shape).ravel()
    cols = np.broadcast_to(dofs[:, None, :], values.shape).ravel()
    return values.ravel(), rows, cols


def _symmetric(values, rows, cols, n):
    A = sparse.coo_matrix((values, (rows, cols)), shape=(n, n)).tocsr()
    A = ((A + A.T) * 0.5).tocsr()
    A.sort_indices()
    return A


@dataclass(frozen=True, eq=False)
class ConstrainedSystem:
    """M + dt(K + B) with the Γ0 nodes eliminated symmetrically.

    The factorization of the free block is shared by every copy made with
    `with_value`, so forward and adjoint solves reuse it.
    """
    ops: SystemOperators
    dt: float
    value: float
    free: np.ndarray
    A_fd: sparse.csr_matrix
    factor: object

    def with_value(self, value):
        return replace(self, value=float(value))

    def solve(self, rhs, step=None):
        """Solves the constrained system; the result equals `value` on Γ0."""
        d = self.ops.dirichlet_nodes
        b = rhs[self.free]
        if self.value != 0.0:
            b = b - self.A_fd @ np.full(len(d), self.value)
        x = np.empty(len(rhs))
        x[self.free] = self.factor.solve(b)
        x[d] = self.value
        if not np.all(np.isfinite(x)):
            raise SolverError("non-finite solution", step=step)
        return x


def apply_dirichlet(ops, value, dt):
    """Eliminates the Γ0 nodes from M + dt(K + B) and factorizes the rest.

    Raises:
        SolverError: if the free block is singular.
    """
    A = (ops.M + dt * (ops.K + ops.B)).tocsr()
    n = A.shape[0]
    mask = np.ones(n, dtype=bool)
    mask[ops.dirichlet_nodes] = False
    free = np.flatnonzero(mask)
    A_free = A[free]
    try:
        factor = splu(A_free[:, free].tocsc(), permc_spec="MMD_AT_PLUS_A")
    except RuntimeError as error:
        raise SolverError(f"factorization failed: {error}") from error
    logger.debug("factorized %d free unknowns, dt=%g", len(free), dt)
    return ConstrainedSystem(ops, float(dt), float(value), free,
                             A_free[:, ops.dirichlet_nodes].tocsr(), factor)
