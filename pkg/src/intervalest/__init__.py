"""Tight interval-valued state estimation for linear and switched linear systems."""

from .errors import (
    DimensionError,
    DominanceError,
    EmptyIntersectionError,
    HorizonError,
    IntervalEstError,
    InvalidIntervalError,
    JsrBudgetError,
    NonFiniteError,
    QStarError,
    RealizationError,
    ScenarioError,
    StabilityWarning,
)
from .interval import IntervalVector, psi, similarity_check, tightest_affine_image
from .lti import (
    BoundedSignal,
    EstimatorRun,
    LtiSystem,
    closed_loop_tight,
    closed_loop_truncated,
    constant_radius_open_loop,
    find_qstar,
    gain_family_intersection,
    tight_open_loop,
    truncated_open_loop,
)
from .realization import ho_kalman, radius_impulse_response, realizability_test
from .sls import SlsSystem, SwitchingSignal, tight_sls, transition_matrix, truncated_sls
from .spectral import MatrixSet, jsr_bounds, spectral_radius, ues_check
from .synthesis import synthesize_lti, synthesize_sls_diagonal, synthesize_sls_nondiagonal

__version__ = "0.1.0"
