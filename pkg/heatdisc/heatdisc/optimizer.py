"""Projected gradient descent on the disc center.

Each iteration remeshes, solves the state, evaluates J, and for accepted
centers solves the adjoint and integrates the shape gradient.  Gradient
components pushing a center already on its bound into the wall are dropped
before the step, and centers are clamped so the disc always keeps its
margin inside the square.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import logging
from typing import NamedTuple, Optional

import numpy as np

from .assembly import PhysicalParams, apply_dirichlet, assemble
from .errors import ContractViolation
from .geometry import DomainSpec, project_center
from .gradient import shape_gradient
from .mesh import MeshParams, deform_mesh, generate_mesh
from .solvers import FunctionalSpec, TimeGrid, evaluate_J, solve_adjoint, solve_forward

logger = logging.getLogger(__name__)

CONVERGED = "converged"
STALLED = "stalled"
STATIONARY = "stationary"
MAX_ITERS = "max_iters"

BOUND_TOL = 1e-12


@dataclass
class Problem:
    """Everything but the center that defines J."""
    params: PhysicalParams = field(default_factory=PhysicalParams)
    spec: FunctionalSpec = field(default_factory=FunctionalSpec.constant)
    mesh_params: MeshParams = field(default_factory=MeshParams)
    n_steps: int = 50
    domain: DomainSpec = field(default_factory=DomainSpec)
    density_sign: float = 1.0

    @property
    def grid(self):
        return TimeGrid(self.params.T, self.n_steps)


@dataclass(eq=False)
class Evaluation:
    """State, functional value and (on demand) gradient at one center."""
    geometry: object
    mesh: object
    ops: object
    system: object
    u: object
    targets: np.ndarray
    J: float
    adjoint: object = None
    gradient: object = None

    def compute_gradient(self, problem):
        if self.gradient is None:
            self.adjoint = solve_adjoint(self.ops, problem.grid, problem.params, problem.spec,
                                         self.u, self.system, self.targets)
            self.gradient = shape_gradient(self.mesh, self.u, self.adjoint, self.targets,
                                           problem.params, problem.density_sign)
        return self.gradient


def evaluate(geom, problem, with_gradient=True, mesh=None):
    """Solves the state on a fresh mesh (or on `mesh`) and evaluates J."""
    if mesh is None:
        mesh = generate_mesh(geom, problem.mesh_params, problem.domain)
    grid = problem.grid
    ops = assemble(mesh, problem.params)
    system = apply_dirichlet(ops, problem.params.U_M, grid.dt)
    u = solve_forward(ops, grid, problem.params, system)
    targets = problem.spec.targets(mesh, grid, problem.params)
    J = evaluate_J(u, problem.spec, ops, targets)
    evaluation = Evaluation(mesh.geometry, mesh, ops, system, u, targets, J)
    if with_gradient:
        evaluation.compute_gradient(problem)
    return evaluation


@dataclass
class OptimizerConfig:
    step: float = 0.1
    shrink: float = 0.5
    max_backtracks: int = 8
    normalize: bool = True
    max_iters: int = 50
    tol_x: float = 1e-3
    tol_J: float = 1e-4
    min_step: float = 1e-6
    patience: int = 2

    def __post_init__(self):
        if not self.step > 0:
            raise ContractViolation(f"step must be positive, got {self.step}")
        if self.max_iters < 1:
            raise ContractViolation(f"max_iters must be at least 1, got {self.max_iters}")
        if self.patience < 1:
            raise ContractViolation(f"patience must be at least 1, got {self.patience}")


class HistoryRow(NamedTuple):
    iter: int
    c_x: float
    c_y: float
    J: float
    dJ_dcx: float
    dJ_dcy: float
    step_length: float
    backtracks: int
    position_error: Optional[float] = None


class OptimizationResult(NamedTuple):
    geometry: object
    history: list
    status: str


def descent_direction(g, geom, margin, normalize=True, significance=1e-9):
    """Steepest descent restricted to the feasible box of centers.

    A component is dropped when its descent would push a coordinate that
    already sits on its bound out of the box, or when it is below
    `significance` times the gradient norm.  The remainder is normalized
    on request; all zeros means no feasible descent is left.
    """
    g = np.asarray(g, dtype=float)
    c = geom.c
    lo = geom.radius + margin
    hi = 1.0 - lo
    direction = -g
    blocked = (((c <= lo + BOUND_TOL) & (direction < 0))
               | ((c >= hi - BOUND_TOL) & (direction > 0))
               | (np.abs(g) <= significance * float(np.hypot(*g))))
    direction[blocked] = 0.0
    if normalize and np.any(direction):
        direction /= float(np.hypot(*direction))
    return direction


class Optimizer:
    """Represents one descent run.

    `on_iteration` is called with (iteration, Evaluation) for every accepted
    center, including the initial one.
    """

    def __init__(self, problem, config=None, target_center=None, on_iteration=None):
        self.problem = problem
        self.config = config or OptimizerConfig()
        self.target_center = None if target_center is None else np.asarray(target_center, float)
        self.on_iteration = on_iteration
        self.history = []
        self.current = None
        self.running = False
        self.status = None
        self.small_decreases = 0

    def run(self, initial):
        """Runs until a stopping rule fires; returns the final geometry and history."""
        initial.check_interior(self.problem.domain.margin)
        self.current = evaluate(initial, self.problem)
        self.record(0, 0.0)
        self.running = True
        while self.running:
            self.step()
        logger.info("optimizer stopped (%s) after %d iterations at %s, J=%.6g",
                    self.status, len(self.history) - 1, self.current.geometry.center,
                    self.current.J)
        return OptimizationResult(self.current.geometry, self.history, self.status)

    def step(self):
        """Performs one iteration with backtracking."""
        config = self.config
        current = self.current
        geom = current.geometry
        iteration = len(self.history)

        g = current.gradient.g_center
        g_norm = float(np.hypot(*g))
        if g_norm == 0.0:
            self.stop(STATIONARY)
            return
        direction = descent_direction(g, geom, self.problem.domain.margin, config.normalize)
        if not np.any(direction):
            # stationary within the box
            self.stop(CONVERGED)
            return

        alpha = config.step
        trial = None
        backtracks = 0
        for backtracks in range(config.max_backtracks + 1):
            center = project_center(geom.c + alpha * direction, geom.radius,
                                    self.problem.domain.margin)
            move = float(np.hypot(*(center - geom.c)))
            if move == 0.0:
                # pinned against the square
                self.stop(CONVERGED)
                return
            candidate = evaluate(geom.moved(center), self.problem, with_gradient=False)
            logger.debug("iteration %d, backtrack %d: center %s, J=%.6g",
                         iteration, backtracks, tuple(center), candidate.J)
            if candidate.J < current.J:
                trial = candidate
                break
            alpha *= config.shrink
            if alpha < config.min_step:
                break

        if trial is None:
            logger.warning("no decrease after %d backtracks at %s; stopping",
                           backtracks, geom.center)
            self.stop(STALLED)
            return

        trial.compute_gradient(self.problem)
        decrease = (current.J - trial.J) / current.J
        self.current = trial
        self.record(backtracks, move)
        logger.info("iteration %d: center (%.6f, %.6f), J=%.8g, |g|=%.4g",
                    iteration, *trial.geometry.center, trial.J,
                    float(np.hypot(*trial.gradient.g_center)))

        self.small_decreases = self.small_decreases + 1 if decrease < config.tol_J else 0
        if move < config.tol_x or self.small_decreases >= config.patience:
            self.stop(CONVERGED)
        elif iteration >= config.max_iters:
            self.stop(MAX_ITERS)

    def record(self, backtracks, move):
        current = self.current
        iteration = len(self.history)
        cx, cy = current.geometry.center
        g = current.gradient.g_center
        error = None
        if self.target_center is not None:
            error = float(np.hypot(cx - self.target_center[0], cy - self.target_center[1]))
        self.history.append(HistoryRow(iteration, cx, cy, current.J, float(g[0]), float(g[1]),
                                       move, backtracks, error))
        if self.on_iteration is not None:
            self.on_iteration(iteration, current)

    def stop(self, status):
        self.status = status
        self.running = False


def optimize(initial, problem, config=None, target_center=None, on_iteration=None):
    """Projected gradient descent from `initial`; see Optimizer."""
    return Optimizer(problem, config, target_center, on_iteration).run(initial)


def fd_gradient_oracle(geom, problem, delta=1e-3, mode="remesh", workers=1):
    """Central differences (J(c + δe_i) - J(c - δe_i)) / 2δ.

    In "remesh" mode each perturbed center is meshed afresh.  In "deform"
    mode the perturbed meshes are the mesh at `geom` with the disc
    translated by ±δe_i (see deform_mesh), so all four evaluations share one
    topology.

    Raises:
        InfeasibleGeometryError: if a perturbed disc leaves the feasible set.
        ContractViolation: for an unknown mode.
    """
    margin = problem.domain.margin
    shifts = [sign * delta * e for e in np.eye(2) for sign in (1.0, -1.0)]
    for shift in shifts:
        geom.moved(geom.c + shift).check_interior(margin)

    if mode == "deform":
        base = generate_mesh(geom, problem.mesh_params, problem.domain)
        meshes = [deform_mesh(base, shift, problem.domain) for shift in shifts]
    elif mode == "remesh":
        meshes = [None] * len(shifts)
    else:
        raise ContractViolation(f"unknown oracle mode {mode!r}")

    def value(args):
        shift, mesh = args
        return evaluate(geom.moved(geom.c + shift), problem, with_gradient=False, mesh=mesh).J

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        values = list(pool.map(value, zip(shifts, meshes)))
    logger.debug("oracle values at %s: %s", geom.center, values)
    return np.array([(values[0] - values[1]) / (2 * delta),
                     (values[2] - values[3]) / (2 * delta)])


class GradientCheck(NamedTuple):
    adjoint: np.ndarray
    fd: np.ndarray
    rel_errors: np.ndarray
    max_error: float
    passed: bool


def gradient_check(adjoint, fd, tolerance=0.05, significance=1e-3):
    """Compares the adjoint gradient with the oracle component by component.

    Components smaller than `significance` times the oracle norm are
    skipped and reported as nan.
    """
    adjoint = np.asarray(adjoint, dtype=float)
    fd = np.asarray(fd, dtype=float)
    scale = float(np.hypot(*fd))
    rel = np.full(2, np.nan)
    for i in range(2):
        if abs(fd[i]) > significance * scale and fd[i] != 0.0:
            rel[i] = abs(adjoint[i] - fd[i]) / abs(fd[i])
    significant = rel[~np.isnan(rel)]
    max_error = float(significant.max()) if len(significant) else 0.0
    return GradientCheck(adjoint, fd, rel, max_error, bool(max_error <= tolerance))


def adjoint_versus_oracle(geom, problem, delta=1e-3, mode="remesh", tolerance=0.05):
    """Runs both gradients at `geom`; returns the Evaluation and the GradientCheck."""
    state = evaluate(geom, problem)
    fd = fd_gradient_oracle(geom, problem, delta, mode)
    check = gradient_check(state.gradient.g_center, fd, tolerance)
    logger.info("adjoint %s vs oracle %s: max relative error %.3g",
                check.adjoint, fd, check.max_error)
    return state, check


__all__ = [
    "CONVERGED", "MAX_ITERS", "STALLED", "STATIONARY", "Evaluation", "GradientCheck",
    "HistoryRow", "OptimizationResult", "Optimizer",
    "OptimizerConfig", "Problem", "adjoint_versus_oracle", "descent_direction", "evaluate",
    "fd_gradient_oracle", "gradient_check", "optimize",
]
