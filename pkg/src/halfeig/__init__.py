"""Principal half-eigenvalues of positively homogeneous fully nonlinear
elliptic operators: pointwise operator algebra, monotone finite differences,
policy-iteration solvers, 1D shooting, and discrete property checks."""

from .grid import Grid, GridFunction, build_grid, tent
from .operators import (Band, DimensionError, Homotopy, InfSup, Jet, Linear, LinearCoeffs,
                        PucciMinus, PucciPlus, Shift, StarEnvelope, SubstarEnvelope,
                        check_homogeneity, check_structure, evaluate, flatten, pucci_minus,
                        pucci_plus, reflect, star_envelope)
from .reports import PropertyReport
from .scheme import apply_operator, check_monotone, discrete_jet, linearize_at_policy
from .shooting import lambda2_scan_1d, shoot_1d, shooting_principal
from .solvers import (EigenError, EigenOptions, EigenPair, SolveOptions, SolveReport,
                      continuation_sweep, principal_eigenpair, rayleigh_bounds, solve_dirichlet)

__all__ = [
    "Grid",
    "GridFunction",
    "build_grid",
    "tent",
    "Band",
    "DimensionError",
    "Homotopy",
    "InfSup",
    "Jet",
    "Linear",
    "LinearCoeffs",
    "PucciMinus",
    "PucciPlus",
    "Shift",
    "StarEnvelope",
    "SubstarEnvelope",
    "check_homogeneity",
    "check_structure",
    "evaluate",
    "flatten",
    "pucci_minus",
    "pucci_plus",
    "reflect",
    "star_envelope",
    "PropertyReport",
    "apply_operator",
    "check_monotone",
    "discrete_jet",
    "linearize_at_policy",
    "lambda2_scan_1d",
    "shoot_1d",
    "shooting_principal",
    "EigenError",
    "EigenOptions",
    "EigenPair",
    "SolveOptions",
    "SolveReport",
    "continuation_sweep",
    "principal_eigenpair",
    "rayleigh_bounds",
    "solve_dirichlet",
]

__version__ = "0.1.0"
