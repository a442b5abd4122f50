"""Translation-operator Chernoff approximations for parabolic Cauchy problems."""

from .chernoff import (
    BudgetExceededError,
    ChernoffConfig,
    NonFiniteError,
    TestFunction,
    apply_H,
    apply_S,
    apply_S_grid,
    iterate,
    solve,
    tangency_residual,
)
from .estimators import ChernoffPropagator, ExactChernoffRegressor, FeynmanKacRegressor
from .expr import parse
from .fields import CoefficientSet, ScalarField, estimate_bound, make_preset, validate_coefficients
from .grid import GridFunction, GridSpec, interp, sample, sup_distance, sup_norm
from .measure import PointMassMeasure, evaluate_exact, pair, propagate, step_measure
from .reference import GaussianProfile, McEstimate, exact_const, exact_const_quadrature, feynman_kac

__version__ = "0.1.0"
