"""Linear programs for repair: problem type, delta objective, solver backends."""

from .problem import (
    BACKENDS,
    DeltaObjective,
    LPProblem,
    SolveResult,
    SolveStatus,
    build_delta_objective,
    pick_backend,
    solve,
    write_lp,
)

__all__ = [
    "BACKENDS",
    "DeltaObjective",
    "LPProblem",
    "SolveResult",
    "SolveStatus",
    "build_delta_objective",
    "pick_backend",
    "solve",
    "write_lp",
]
