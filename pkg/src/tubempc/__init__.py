"""Homothetic tube MPC with online disturbance-set learning.

A numpy/scipy toolkit that learns an unknown additive-disturbance set from
closed-loop data via linear programs and uses the learned set inside a
homothetic tube MPC quadratic program, plus a simulation harness for
set-membership, recursive-feasibility, and feasible-region experiments.
"""

from tubempc.solver import (
    LinearProgram,
    QuadraticProgram,
    SolveResult,
    Status,
    Tolerances,
    solve_lp,
    solve_qp,
)

__version__ = "0.1.0"
