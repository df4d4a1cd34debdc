"""Result files: CSV tables, VTK dumps and recorded target archives."""

import csv
import logging
from pathlib import Path

import meshio
import numpy as np

from .assembly import PhysicalParams
from .errors import ContractViolation
from .gradient import TERM_NAMES
from .mesh import InterfaceMesh
from .solvers import FORWARD, RecordedTarget, TimeGrid, Trajectory

logger = logging.getLogger(__name__)

HISTORY_COLUMNS = ["iter", "c_x", "c_y", "J", "dJ_dcx", "dJ_dcy", "step_length",
                   "backtracks", "position_error"]


def fmt(value):
    """Floats with 17 significant digits, everything else as str()."""
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fp:
        writer = csv.writer(fp, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(value) for value in row])
    logger.debug("wrote %s", path)
    return path


def write_history(path, history):
    return write_csv(path, HISTORY_COLUMNS, [list(row) for row in history])


def write_summary(path, summary):
    """Writes a one-row table from a dict, keys as header."""
    return write_csv(path, list(summary), [list(summary.values())])


def write_density(path, gradient):
    """Per quadrature point: arc parameter, position, density and its terms."""
    q = gradient.quadrature
    header = ["arc_param", "x", "y", "G"] + [f"term{i + 1}" for i in range(len(TERM_NAMES))]
    rows = [[q.arc[i], q.points[i, 0], q.points[i, 1], gradient.density[i], *gradient.terms[:, i]]
            for i in range(len(q.weights))]
    return write_csv(path, header, rows)


def write_quadrature(path, quadrature):
    header = ["arc_param", "x", "y", "weight", "tau_x", "tau_y", "n_x", "n_y"]
    rows = [[quadrature.arc[i], *quadrature.points[i], quadrature.weights[i],
             *quadrature.tangents[i], *quadrature.normals[i]]
            for i in range(len(quadrature.weights))]
    return write_csv(path, header, rows)


def _meshio_mesh(mesh, point_data=None):
    points = np.column_stack([mesh.vertices, np.zeros(mesh.n_nodes)])
    return meshio.Mesh(points, [("triangle", mesh.triangles)],
                       point_data=point_data or {},
                       cell_data={"region": [mesh.region.astype(np.int32)]})


def write_mesh_vtk(path, mesh, point_data=None):
    """VTK legacy ASCII unstructured grid with the region tag as cell data."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meshio.write(path, _meshio_mesh(mesh, point_data), file_format="vtk", binary=False)
    logger.debug("wrote %s", path)
    return path


def write_trajectory_vtk(directory, trajectory):
    """One file per time level, named field_{kind}_{k:04}.vtk."""
    directory = Path(directory)
    paths = []
    for k, values in enumerate(trajectory.fields):
        path = directory / f"field_{trajectory.kind}_{k:04}.vtk"
        paths.append(write_mesh_vtk(path, trajectory.mesh, {trajectory.kind: values}))
    return paths


def save_target(path, trajectory, params):
    """Stores a forward trajectory with its mesh for later recorded-target runs."""
    if trajectory.kind != FORWARD:
        raise ContractViolation(f"only forward trajectories can be recorded, got {trajectory.kind}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays = trajectory.mesh.arrays()
    with open(path, "wb") as fp:
        np.savez(fp, fields=trajectory.fields, T=trajectory.grid.T,
                 n_steps=trajectory.grid.n_steps, kappa=params.kappa, R=params.R,
                 U_M=params.U_M, **arrays)
    logger.info("recorded target with %d time levels to %s", len(trajectory), path)
    return path


def load_target(path):
    with np.load(path, allow_pickle=False) as data:
        arrays = {key: data[key] for key in data.files}
    mesh = InterfaceMesh.from_arrays(arrays)
    grid = TimeGrid(float(arrays["T"]), int(arrays["n_steps"]))
    params = PhysicalParams(float(arrays["kappa"]), float(arrays["R"]),
                            float(arrays["U_M"]), float(arrays["T"]))
    trajectory = Trajectory(arrays["fields"], FORWARD, grid, mesh)
    return RecordedTarget(mesh, trajectory, params)
