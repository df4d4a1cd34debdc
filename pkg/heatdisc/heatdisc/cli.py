"""Command line entry point.

    heatdisc solve --config run.ini
    heatdisc record-target --config desired.ini target.npz
    heatdisc optimize --config run.ini --out results
    heatdisc fd-check --config run.ini
    heatdisc mesh-dump --config run.ini

Exit codes: 0 success, 2 configuration error, 3 solver error,
4 verification failure.
"""

import argparse
import logging
from pathlib import Path
import sys
import time

import numpy as np

from . import output
from .config import RunConfig, dump_config, load_config
from .errors import (
    ConfigError, ContractViolation, InfeasibleGeometryError, MeshError, SolverError,
    VerificationFailure,
)
from .mesh import generate_mesh, interface_quadrature
from .optimizer import adjoint_versus_oracle, evaluate, optimize
from .solvers import FunctionalSpec, RecordedTarget, evaluate_J

logger = logging.getLogger("heatdisc")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_VERIFICATION = 4


def _prepare(args):
    config = load_config(args.config) if args.config else RunConfig().validate()
    if args.out:
        config.output.directory = args.out
    out = Path(config.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    (out / "effective_config.ini").write_text(dump_config(config))
    return config, out


def _finish_summary(config, summary, started):
    if not config.output.deterministic:
        summary["seconds"] = time.perf_counter() - started
    return summary


def cmd_solve(args):
    """Single forward solve; writes summary.csv and the mesh."""
    started = time.perf_counter()
    config, out = _prepare(args)
    problem = config.problem()
    state = evaluate(config.disc(), problem, with_gradient=False)
    norms = state.u.deviation_norms(state.ops.M, problem.params.U_M)
    violation = state.u.comparison_violation(problem.params.U_M)
    if violation > 1e-3:
        logger.warning("state leaves [0, U_M] by %.3g U_M", violation)
    summary = {
        "J": state.J,
        "nodes": state.mesh.n_nodes,
        "triangles": len(state.mesh.triangles),
        "steps": problem.n_steps,
        "c_x": state.geometry.center[0],
        "c_y": state.geometry.center[1],
        "dissipative": bool(np.all(np.diff(norms) <= 1e-12 * max(norms[0], 1.0))),
        "comparison_violation": violation,
    }
    output.write_summary(out / "summary.csv", _finish_summary(config, summary, started))
    output.write_mesh_vtk(out / "mesh.vtk", state.mesh, {"u_final": state.u.fields[-1]})
    if config.output.dump_fields:
        output.write_trajectory_vtk(out / "fields", state.u)
    print(f"J = {state.J:.17g}")
    return EXIT_OK


def cmd_record_target(args):
    """Stores the state at the configured disc for recorded-target runs."""
    started = time.perf_counter()
    config, out = _prepare(args)
    problem = config.problem(spec=FunctionalSpec.constant())
    state = evaluate(config.disc(), problem, with_gradient=False)
    output.save_target(args.target, state.u, problem.params)

    recorded = FunctionalSpec.from_recording(RecordedTarget(state.mesh, state.u, problem.params))
    targets = recorded.targets(state.mesh, problem.grid, problem.params)
    replay = evaluate_J(state.u, recorded, state.ops, targets)
    logger.info("replay of the recorded target gives J = %.3g", replay)
    summary = {"target": str(args.target), "nodes": state.mesh.n_nodes,
               "steps": problem.n_steps, "replay_J": replay}
    output.write_summary(out / "summary.csv", _finish_summary(config, summary, started))
    return EXIT_OK


def cmd_optimize(args):
    """Projected gradient descent; writes history.csv and summary.csv."""
    started = time.perf_counter()
    config, out = _prepare(args)
    problem = config.problem()

    def dump(iteration, state):
        if config.output.dump_fields:
            output.write_mesh_vtk(out / f"iteration_{iteration:03}.vtk", state.mesh,
                                  {"u_final": state.u.fields[-1]})

    result = optimize(config.disc(), problem, config.optimizer,
                      target_center=config.target_center(), on_iteration=dump)
    output.write_history(out / "history.csv", result.history)
    final = result.history[-1]
    summary = {"status": result.status, "iterations": final.iter,
               "c_x": final.c_x, "c_y": final.c_y, "J": final.J}
    output.write_summary(out / "summary.csv", _finish_summary(config, summary, started))
    print(f"{result.status}: center ({final.c_x:.17g}, {final.c_y:.17g}), J = {final.J:.17g}")
    return EXIT_OK


def cmd_fd_check(args):
    """Adjoint gradient against central differences; exit 4 above tolerance."""
    config, out = _prepare(args)
    if args.flip_density:
        config.verification.flip_density = True
    verification = config.verification
    state, check = adjoint_versus_oracle(config.disc(), config.problem(), verification.delta,
                                         verification.fd_mode, verification.tolerance)

    rows = [[name, check.adjoint[i], check.fd[i], check.rel_errors[i]]
            for i, name in enumerate(("c_x", "c_y"))]
    output.write_csv(out / "gradient_check.csv", ["component", "adjoint", "fd", "rel_error"], rows)
    output.write_density(out / "density.csv", state.gradient)
    for name, adjoint, fd_value, rel in rows:
        print(f"dJ/d{name}: adjoint {adjoint:.17g}  fd {fd_value:.17g}  rel error {rel:.3g}")
    if not check.passed:
        raise VerificationFailure(
            f"relative error {check.max_error:.3g} exceeds {config.verification.tolerance}")
    return EXIT_OK


def cmd_mesh_dump(args):
    config, out = _prepare(args)
    mesh = generate_mesh(config.disc(), config.mesh_params(), config.domain())
    output.write_mesh_vtk(out / "mesh.vtk", mesh)
    output.write_quadrature(out / "interface.csv", interface_quadrature(mesh))
    print(f"{mesh.n_nodes} nodes, {len(mesh.triangles)} triangles, "
          f"{mesh.n_interface} interface sides")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="heatdisc",
        description="Optimal placement of a conductive disc in a heated square")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI run configuration")
    common.add_argument("--out", help="output directory, overrides [output] directory")
    common.add_argument("--verbose", action="store_true", help="debug logging")

    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("solve", parents=[common], help=cmd_solve.__doc__) \
        .set_defaults(func=cmd_solve)
    record = commands.add_parser("record-target", parents=[common], help=cmd_record_target.__doc__)
    record.add_argument("target", help="archive to write, e.g. target.npz")
    record.set_defaults(func=cmd_record_target)
    commands.add_parser("optimize", parents=[common], help=cmd_optimize.__doc__) \
        .set_defaults(func=cmd_optimize)
    check = commands.add_parser("fd-check", parents=[common], help=cmd_fd_check.__doc__)
    check.add_argument("--flip-density", action="store_true",
                       help="reverse the density sign (the check must then fail)")
    check.set_defaults(func=cmd_fd_check)
    commands.add_parser("mesh-dump", parents=[common], help="write the mesh and interface rule") \
        .set_defaults(func=cmd_mesh_dump)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, InfeasibleGeometryError, ContractViolation) as error:
        logger.error("configuration error: %s", error)
        return EXIT_CONFIG
    except (MeshError, SolverError) as error:
        logger.error("solver error: %s", error)
        return EXIT_SOLVER
    except VerificationFailure as error:
        logger.error("verification failed: %s", error)
        return EXIT_VERIFICATION


if __name__ == "__main__":
    sys.exit(main())
