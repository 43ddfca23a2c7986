"""Entropic vector quantile regression.

Discrete instances are solved by exact block-coordinate dual ascent
(:func:`evqr.solver.solve`) and certified on small problems by a global
Newton method (:mod:`evqr.oracle`). Jointly Gaussian data have closed-form
solutions in :mod:`evqr.gaussian`.
"""
from .errors import (
    ConstraintInfeasible,
    DimensionMismatch,
    DomainError,
    EVQRError,
    NoConvergence,
    NotPSD,
    Overflow,
    SingularMatrix,
    SizeGuard,
)
from .gaussian import (
    GaussianCoupling,
    GaussianModel,
    GaussianPotentials,
    gaussian_dual_potentials,
    lambda_eps,
    optimal_gaussian_coupling,
    sweep_epsilon,
    w2_exact,
    w2_first_order,
)
from .measures import DiscreteMeasure, Problem, cost_matrix, validate_problem
from .oracle import oracle_compare, oracle_solve
from .solver import (
    Coupling,
    Potentials,
    SolveReport,
    SolverOptions,
    dual_value,
    extend_f,
    extend_g,
    extend_h,
    gauge_fix,
    primal_value,
    solve,
)

__version__ = "0.1.0"

__all__ = [
    "ConstraintInfeasible", "DimensionMismatch", "DomainError", "EVQRError", "NoConvergence", "NotPSD",
    "Overflow", "SingularMatrix", "SizeGuard", "GaussianCoupling", "GaussianModel", "GaussianPotentials",
    "gaussian_dual_potentials", "lambda_eps", "optimal_gaussian_coupling", "sweep_epsilon", "w2_exact",
    "w2_first_order", "DiscreteMeasure", "Problem", "cost_matrix", "validate_problem", "oracle_compare",
    "oracle_solve", "Coupling", "Potentials", "SolveReport", "SolverOptions", "dual_value", "extend_f",
    "extend_g", "extend_h", "gauge_fix", "primal_value", "solve",
]
