"""Minkowskian product Finsler metrics with exact jet-based curvature."""

from .curvature import (
    CurvatureReport,
    EinsteinDiagnostics,
    curvature_report,
    einstein_diagnostics,
    ricci_scalar,
    ricci_tensor,
    riemann_curvature,
    spray_coefficients,
)
from .errors import DomainError, FinslerError, OrderExceededError, SceneError, SingularMatrixError
from .expr import ParseError, compile_expr, evaluate, parse, to_string
from .geodesics import GeodesicTrace, integrate_geodesic
from .jet import Jet, ScalarField, lift, partial
from .metrics import (
    Euclidean,
    EvaluatedMetric,
    Product,
    Randers,
    Riemannian,
    Square,
    evaluate_metric,
    fundamental_tensor,
    funk,
    randers,
    riemannian,
    square,
    validate_metric,
)
from .product import (
    Custom,
    Linear,
    RatioSquare,
    closed_form_blocks,
    closed_form_inverse,
    parse_product_function,
    product_metric,
    validate_product_function,
)
from .scene import Scene, load_scene
from .verify import TheoremCheck, run_all

__version__ = "0.1.0"
