"""LP relaxations, anytime branch-and-bound and model export."""

from .bnb import DEFAULT_THRESHOLDS, MIPResult, SolveConfig, SolveEvent, gap, solve_mip
from .lp import Basis, BoundedSimplex, LPResult, NumericalFailure, solve_lp
from .problem import Constraint, MatrixForm, MIPModel, ModelError, Role, Variable, max_violation

__all__ = [
    "DEFAULT_THRESHOLDS",
    "Basis",
    "BoundedSimplex",
    "Constraint",
    "LPResult",
    "MIPModel",
    "MIPResult",
    "MatrixForm",
    "ModelError",
    "NumericalFailure",
    "Role",
    "SolveConfig",
    "SolveEvent",
    "Variable",
    "gap",
    "max_violation",
    "solve_lp",
    "solve_mip",
]
