"""pwq: piecewise (difference-max) quadratic programs.

Stationarity certificates, enumeration of directional/Bouligand stationary
values, and majorization-minimization for least-squares piecewise-affine
regression.
"""

from .core import (
    QuadraticFn,
    MaxOfQuadratics,
    DiffMaxProgram,
    Polyhedron,
    PLQFunction,
    evaluate,
    active_sets,
    directional_derivative,
    plq_to_diff_max,
)
from .linalg import (
    Polynomial,
    RationalCurve,
    null_space_basis,
    det_polynomial,
    parametric_inverse_curve,
    real_roots_in_interval,
)
from .stationarity import (
    StationarityCertificate,
    check_d_stationary,
    check_critical,
    is_f_differentiable_point,
    check_sc_membership,
    check_licq,
    classify_composite_point,
)
from .enumeration import (
    ValueSet,
    enumerate_qp_values,
    enumerate_plq_values,
    enumerate_convex_minus_max_concave,
    enumerate_problem5_values,
    enumerate_two_piece_diff_max,
    solve_simplex_newton,
)
from .bstat import (
    DQCProgram,
    BCertificate,
    linearization_cone,
    check_b_stationary,
    enumerate_b_values,
)
from .regression import (
    RegressionModel,
    Dataset,
    MMTrace,
    build_surrogate,
    minimize_surrogate,
    run_mm,
    cluster_values,
    PiecewiseAffineRegressor,
)

__version__ = "0.1.0"

__all__ = [
    "QuadraticFn", "MaxOfQuadratics", "DiffMaxProgram", "Polyhedron",
    "PLQFunction", "evaluate", "active_sets", "directional_derivative",
    "plq_to_diff_max",
    "Polynomial", "RationalCurve", "null_space_basis", "det_polynomial",
    "parametric_inverse_curve", "real_roots_in_interval",
    "StationarityCertificate", "check_d_stationary", "check_critical",
    "is_f_differentiable_point", "check_sc_membership", "check_licq",
    "classify_composite_point",
    "ValueSet", "enumerate_qp_values", "enumerate_plq_values",
    "enumerate_convex_minus_max_concave", "enumerate_problem5_values",
    "enumerate_two_piece_diff_max", "solve_simplex_newton",
    "DQCProgram", "BCertificate", "linearization_cone",
    "check_b_stationary", "enumerate_b_values",
    "RegressionModel", "Dataset", "MMTrace", "build_surrogate",
    "minimize_surrogate", "run_mm", "cluster_values",
    "PiecewiseAffineRegressor",
]
