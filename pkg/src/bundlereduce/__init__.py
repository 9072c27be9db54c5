"""Geometry and path-integral reduction on principal fibre bundles.

Modules
-------
tensor_core   finite differences, symmetric factorisation, inverse/determinant
bundle        bundle specification, projectors, connection, adapted metric
curvature     Christoffel symbols, Ricci blocks, scalar-curvature decomposition, Jtilde
stochastic    original and reduced diffusions, Girsanov weights, Green's-function pairings
scenarios     reference bundles with oracle tables
cli           ``bundlereduce report | verify | simulate``
"""
from .errors import (
    ChartExitError,
    ConfigError,
    DegenerateOrbitError,
    GaugeError,
    GeometryError,
    NonFiniteFieldError,
    NotPositiveDefiniteError,
    ProjectionError,
    SingularMatrixError,
    UnsupportedOperationError,
)
from .tensor_core import CURVATURE_FD, DEFAULT_FD, FDConfig, SmoothField, fd_derivative, inverse_det, sym_factor
from .bundle import (
    BundleSpec,
    GroupChart,
    LocalFrame,
    ProjectorSet,
    adapted_determinant,
    adapted_metric,
    adapted_pseudoinverse,
    connection_curvature,
    faddeev_popov,
    horizontal_metric,
    local_frame,
    mechanical_connection,
    orbit_metric,
    project_to_surface,
    projectors,
    u1_chart,
)
from .curvature import (
    DEFAULT_EPS_F,
    ChristoffelTable,
    CurvatureReport,
    christoffel_coordinate,
    christoffel_horizontal,
    decomposition_report,
    f_squared,
    horizontal_scalar,
    jacobian_integrand,
    mean_curvature_base,
    mean_curvature_orbit,
    nonholonomic_christoffels,
    orbit_scalar,
    ricci_horizontal_block,
    ricci_vertical_block,
    scalar_curvature_bundle,
    scalar_curvature_direct,
    second_fundamental_form,
)
from .stochastic import (
    GreenEstimate,
    PathSample,
    SDEConfig,
    apply_generator,
    estimate_green,
    girsanov_log_factor,
    simulate_original,
    simulate_reduced,
    verify_reduction_relation,
)
from .scenarios import Scenario, make_scenario

__version__ = "0.1.0"
