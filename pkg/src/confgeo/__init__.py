"""Conformal geodesics, the fourth-order conformal flow, and their verification."""

from .dynamics import (
    ConformalGeodesicFlow,
    CurveState,
    FlatMercatorFlow,
    GeodesicFlow,
    MercatorFlow,
    D_adjoint,
    D_op,
    E_vector,
    K_vector,
    integrate,
    lagrangian_L,
    lagrangian_L1,
    mercator_C,
)
from .errors import (
    ConfGeoError,
    ConfigError,
    InputError,
    NoConvergence,
    NullVelocity,
    NumericalError,
)
from .geometry import (
    ConformalFactor,
    GeometryJet,
    MetricSpec,
    conformally_flat,
    flat_metric,
    from_expressions,
    geometry_jet,
    named_metric,
    rescale,
)
from .trajectory import Trajectory

__all__ = [
    "ConformalGeodesicFlow",
    "CurveState",
    "FlatMercatorFlow",
    "GeodesicFlow",
    "MercatorFlow",
    "D_adjoint",
    "D_op",
    "E_vector",
    "K_vector",
    "integrate",
    "lagrangian_L",
    "lagrangian_L1",
    "mercator_C",
    "ConfGeoError",
    "ConfigError",
    "InputError",
    "NoConvergence",
    "NullVelocity",
    "NumericalError",
    "ConformalFactor",
    "GeometryJet",
    "MetricSpec",
    "conformally_flat",
    "flat_metric",
    "from_expressions",
    "geometry_jet",
    "named_metric",
    "rescale",
    "Trajectory",
]

__version__ = "0.1.0"
