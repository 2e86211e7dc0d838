from .backends import ExternalBackend, available_backends, register_backend, solve
from .bnb import branch_and_bound, solve_relaxation
from .cones import Cut, cone_violation, separate_cone
from .lp import CutPool, revised_simplex, solve_lp
from .program import (Affine, ConicProgram, NodeEvent, SocConstraint, SolveResult, SolverError,
                      SolverOptions, read_program, read_result, write_node_trace, write_program,
                      write_result)

__all__ = [
    "Affine", "ConicProgram", "Cut", "CutPool", "ExternalBackend", "NodeEvent",
    "SocConstraint", "SolveResult", "SolverError", "SolverOptions", "available_backends",
    "branch_and_bound", "cone_violation", "read_program", "read_result", "register_backend",
    "revised_simplex", "separate_cone", "solve", "solve_lp", "solve_relaxation",
    "write_node_trace", "write_program", "write_result",
]
