"""Coordinate charts with signature-aware metric fields.

A chart packages the metric tensor as a plain function of the coordinate
point, together with the signature, an optional analytic derivative and a
validity predicate.  Charts are immutable and safe to share across workers.

Metric callables are vectorized: they accept points of shape ``(..., n)``
and return ``(..., n, n)`` arrays.  The derivative callable returns
``(..., n, n, n)`` with ``deriv[..., k, i, j] = d g_ij / d x^k``.

Registered chart names: ``euclidean:n`` (any n >= 1), ``polar2``,
``sphere2``, ``hyperbolic2``, ``minkowski:1+3``.  Custom diagonal metrics
can be loaded from a JSON description, see :func:`chart_from_json`.
"""

from __future__ import annotations

import ast
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..errors import ConfigError, DomainError, SingularMetricError

DET_FLOOR = 1e-10

# Pole / origin exclusions keep finite-difference stencils and diffusion
# steps away from coordinate singularities.
SPHERE_POLE_MARGIN = 0.05
POLAR_MIN_RADIUS = 1e-3
HYPERBOLIC_MIN_THETA = 0.05


@dataclass(frozen=True)
class MetricChart:
    """A single coordinate chart with a metric field.

    signature is the pair (n_minus, n_plus): the count of negative and
    positive eigenvalues of the metric.  Lorentzian charts use (1, d) with
    the time coordinate first, i.e. the (-, +, +, +) convention.
    """

    name: str
    dimension: int
    signature: tuple[int, int]
    metric: Callable[[np.ndarray], np.ndarray]
    metric_derivative: Callable[[np.ndarray], np.ndarray] | None = None
    valid: Callable[[np.ndarray], np.ndarray] = field(default=lambda x: np.ones(np.shape(x)[:-1], dtype=bool))

    def metric_at(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.metric(x)

    def metric_inverse_at(self, x) -> np.ndarray:
        g = self.metric_at(x)
        det = np.linalg.det(g)
        if np.any(np.abs(det) <= DET_FLOOR):
            raise SingularMetricError(
                f"metric of chart '{self.name}' is degenerate (|det| <= {DET_FLOOR:g})"
            )
        return np.linalg.inv(g)

    def is_valid(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.asarray(self.valid(x))

    def require_valid(self, x) -> np.ndarray:
        """Return x as an array, raising DomainError if any point is outside."""
        x = np.asarray(x, dtype=float)
        ok = self.is_valid(x)
        if not np.all(ok):
            raise DomainError(f"point outside valid region of chart '{self.name}'")
        return x

    @property
    def is_lorentzian(self) -> bool:
        return self.signature[0] > 0

    def signature_matrix(self) -> np.ndarray:
        """diag(-1,...,-1,+1,...,+1) with n_minus leading entries."""
        p, q = self.signature
        return np.diag(np.concatenate([-np.ones(p), np.ones(q)]))


def _diag_metric(diag_fn):
    def metric(x):
        d = diag_fn(x)
        out = np.zeros(d.shape + (d.shape[-1],))
        idx = np.arange(d.shape[-1])
        out[..., idx, idx] = d
        return out

    return metric


def _euclidean(n: int) -> MetricChart:
    eye = np.eye(n)

    def metric(x):
        return np.broadcast_to(eye, np.shape(x)[:-1] + (n, n)).copy()

    def deriv(x):
        return np.zeros(np.shape(x)[:-1] + (n, n, n))

    return MetricChart(
        name=f"euclidean:{n}",
        dimension=n,
        signature=(0, n),
        metric=metric,
        metric_derivative=deriv,
    )


def _minkowski13() -> MetricChart:
    eta = np.diag([-1.0, 1.0, 1.0, 1.0])

    def metric(x):
        return np.broadcast_to(eta, np.shape(x)[:-1] + (4, 4)).copy()

    def deriv(x):
        return np.zeros(np.shape(x)[:-1] + (4, 4, 4))

    return MetricChart(
        name="minkowski:1+3",
        dimension=4,
        signature=(1, 3),
        metric=metric,
        metric_derivative=deriv,
    )


def _polar2() -> MetricChart:
    # coordinates (r, phi); g = diag(1, r^2)
    def diag(x):
        r = x[..., 0]
        return np.stack([np.ones_like(r), r**2], axis=-1)

    def deriv(x):
        r = x[..., 0]
        out = np.zeros(np.shape(x)[:-1] + (2, 2, 2))
        out[..., 0, 1, 1] = 2.0 * r
        return out

    return MetricChart(
        name="polar2",
        dimension=2,
        signature=(0, 2),
        metric=_diag_metric(diag),
        metric_derivative=deriv,
        valid=lambda x: x[..., 0] >= POLAR_MIN_RADIUS,
    )


def _sphere2() -> MetricChart:
    # coordinates (theta, phi) on the unit sphere; g = diag(1, sin^2 theta)
    def diag(x):
        th = x[..., 0]
        return np.stack([np.ones_like(th), np.sin(th) ** 2], axis=-1)

    def deriv(x):
        th = x[..., 0]
        out = np.zeros(np.shape(x)[:-1] + (2, 2, 2))
        out[..., 0, 1, 1] = np.sin(2.0 * th)
        return out

    return MetricChart(
        name="sphere2",
        dimension=2,
        signature=(0, 2),
        metric=_diag_metric(diag),
        metric_derivative=deriv,
        valid=lambda x: (x[..., 0] >= SPHERE_POLE_MARGIN)
        & (x[..., 0] <= math.pi - SPHERE_POLE_MARGIN),
    )


def _hyperbolic2() -> MetricChart:
    # coordinates (theta, phi); g = diag(1, sinh^2 theta)
    def diag(x):
        th = x[..., 0]
        return np.stack([np.ones_like(th), np.sinh(th) ** 2], axis=-1)

    def deriv(x):
        th = x[..., 0]
        out = np.zeros(np.shape(x)[:-1] + (2, 2, 2))
        out[..., 0, 1, 1] = np.sinh(2.0 * th)
        return out

    return MetricChart(
        name="hyperbolic2",
        dimension=2,
        signature=(0, 2),
        metric=_diag_metric(diag),
        metric_derivative=deriv,
        valid=lambda x: x[..., 0] >= HYPERBOLIC_MIN_THETA,
    )


_CUSTOM: dict[str, MetricChart] = {}


def register_chart(chart: MetricChart) -> None:
    _CUSTOM[chart.name] = chart


def available_charts() -> list[str]:
    return ["euclidean:<n>", "polar2", "sphere2", "hyperbolic2", "minkowski:1+3"] + sorted(_CUSTOM)


def get_chart(name: str) -> MetricChart:
    """Resolve a chart by registry name."""
    if name in _CUSTOM:
        return _CUSTOM[name]
    if name == "polar2":
        return _polar2()
    if name == "sphere2":
        return _sphere2()
    if name == "hyperbolic2":
        return _hyperbolic2()
    if name == "minkowski:1+3":
        return _minkowski13()
    if name.startswith("euclidean:"):
        try:
            n = int(name.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"bad euclidean chart name '{name}'") from None
        if n < 1:
            raise ConfigError(f"euclidean dimension must be >= 1, got {n}")
        return _euclidean(n)
    raise ConfigError(
        f"unknown chart '{name}'; available: {', '.join(available_charts())}"
    )


# --- custom diagonal metrics from expression strings ------------------------

_ALLOWED_FUNCS = {
    "sin": np.sin,
    "cos": np.cos,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "exp": np.exp,
    "log": np.log,
}

_ALLOWED_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)
_ALLOWED_UNARY = (ast.USub, ast.UAdd)


def _compile_expression(expr: str, dimension: int):
    """Compile one diagonal-entry expression into a vectorized callable.

    Grammar: +, -, *, /, ^ (power), sin, cos, sinh, cosh, exp, log and the
    coordinate symbols x0..x{n-1}.  Anything else is rejected.
    """
    src = expr.replace("^", "**")
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse metric expression '{expr}': {exc}") from None

    names = {f"x{i}" for i in range(dimension)}

    for node in ast.walk(tree):
        if isinstance(node, (ast.Expression, ast.Constant, ast.Load)):
            if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
                raise ConfigError(f"non-numeric constant in '{expr}'")
            continue
        if isinstance(node, ast.BinOp) and isinstance(node.op, _ALLOWED_BINOPS):
            continue
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, _ALLOWED_UNARY):
            continue
        if isinstance(node, (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd)):
            continue
        if isinstance(node, ast.Name):
            if node.id in names or node.id in _ALLOWED_FUNCS:
                continue
            raise ConfigError(f"unknown symbol '{node.id}' in metric expression '{expr}'")
        if isinstance(node, ast.Call):
            if isinstance(node.func, ast.Name) and node.func.id in _ALLOWED_FUNCS \
                    and not node.keywords and len(node.args) == 1:
                continue
            raise ConfigError(f"disallowed call in metric expression '{expr}'")
        raise ConfigError(f"disallowed syntax in metric expression '{expr}'")

    code = compile(tree, "<metric>", "eval")

    def fn(x):
        env = {f"x{i}": x[..., i] for i in range(dimension)}
        env.update(_ALLOWED_FUNCS)
        val = eval(code, {"__builtins__": {}}, env)  # noqa: S307 - whitelisted AST
        return np.broadcast_to(np.asarray(val, dtype=float), x.shape[:-1])

    return fn


def chart_from_json(spec) -> MetricChart:
    """Build a diagonal-metric chart from a JSON description.

    Accepts a dict, a JSON string, or a path to a JSON file with keys
    {name, dimension, signature, diagonal_entries}.
    """
    if isinstance(spec, str):
        try:
            spec = json.loads(spec)
        except json.JSONDecodeError:
            with open(spec, encoding="utf8") as fh:
                spec = json.load(fh)
    for key in ("name", "dimension", "signature", "diagonal_entries"):
        if key not in spec:
            raise ConfigError(f"custom chart description missing '{key}'")
    n = int(spec["dimension"])
    sig = tuple(int(s) for s in spec["signature"])
    if len(sig) != 2 or sig[0] < 0 or sig[1] < 0 or sig[0] + sig[1] != n:
        raise ConfigError(f"bad signature {sig} for dimension {n}")
    entries = spec["diagonal_entries"]
    if len(entries) != n:
        raise ConfigError(f"expected {n} diagonal entries, got {len(entries)}")
    fns = [_compile_expression(e, n) for e in entries]

    def diag(x):
        return np.stack([f(x) for f in fns], axis=-1)

    return MetricChart(
        name=str(spec["name"]),
        dimension=n,
        signature=sig,
        metric=_diag_metric(diag),
    )
