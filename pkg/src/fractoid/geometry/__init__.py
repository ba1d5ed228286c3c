"""Coordinate-chart differential geometry."""

from .calculus import (
    ConnectionCoefficients,
    TorsionValue,
    christoffel,
    christoffel_batch,
    covariant_derivative,
    gradient_fd,
    hessian_fd,
    laplace_beltrami,
    leibniz_residual,
    levi_civita_field,
    metric_derivative_fd,
    ricci,
    ricci_operator,
    torsion,
    vector_jacobian_fd,
)
from .charts import (
    MetricChart,
    available_charts,
    chart_from_json,
    get_chart,
    register_chart,
)

__all__ = [
    "ConnectionCoefficients",
    "MetricChart",
    "TorsionValue",
    "available_charts",
    "chart_from_json",
    "christoffel",
    "christoffel_batch",
    "covariant_derivative",
    "get_chart",
    "gradient_fd",
    "hessian_fd",
    "laplace_beltrami",
    "leibniz_residual",
    "levi_civita_field",
    "metric_derivative_fd",
    "register_chart",
    "ricci",
    "ricci_operator",
    "torsion",
    "vector_jacobian_fd",
]
