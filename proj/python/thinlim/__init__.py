"""Thin-domain limits of fully nonlinear elliptic problems with oblique
boundary conditions: parse problems, check the structural hypotheses,
assemble the limit operator, and solve both the thin and limit problems
with a monotone finite-difference scheme."""

from ._core import (
    ProblemInstance,
    ProblemParseError,
    SolverDivergence,
    ValidationError,
    counterexample,
    eval_F,
    eval_G,
    mms,
    parse_problem,
    reduce_csv,
    run_checks,
    solve_limit,
    solve_thin,
    sweep,
)

__all__ = [
    "ProblemInstance",
    "ProblemParseError",
    "SolverDivergence",
    "ValidationError",
    "counterexample",
    "eval_F",
    "eval_G",
    "mms",
    "parse_problem",
    "reduce_csv",
    "run_checks",
    "solve_limit",
    "solve_thin",
    "sweep",
]
