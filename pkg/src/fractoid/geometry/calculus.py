"""Christoffel symbols, curvature, Laplace-Beltrami, torsion, Leibniz rule.

All derivatives fall back to central finite differences when no analytic
form is available.  Step sizes follow the package convention: first
derivatives use h = 1e-5 * max(1, |x_i|), second derivatives
h = 1e-4 * max(1, |x_i|).  Ricci uses Richardson-extrapolated differences
of the connection so that its symmetry survives roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import SingularMetricError
from .charts import DET_FLOOR, MetricChart

FD_STEP_FIRST = 1e-5
FD_STEP_SECOND = 1e-4
LEVI_CIVITA_SYMMETRY_TOL = 1e-10


@dataclass(frozen=True)
class ConnectionCoefficients:
    """Gamma^k_{ij} at a point; gamma[k, i, j], symmetric in (i, j) if Levi-Civita."""

    gamma: np.ndarray
    levi_civita_flag: bool = True

    def __post_init__(self):
        if self.levi_civita_flag:
            skew = np.max(np.abs(self.gamma - np.swapaxes(self.gamma, -1, -2)))
            if skew > LEVI_CIVITA_SYMMETRY_TOL:
                raise SingularMetricError(
                    f"Levi-Civita coefficients not symmetric (defect {skew:.2e})"
                )


@dataclass(frozen=True)
class TorsionValue:
    """Tangent-vector value of the torsion tensor at a point."""

    components: np.ndarray


def _steps(x, scale):
    x = np.asarray(x, dtype=float)
    return scale * np.maximum(1.0, np.abs(x))


def metric_derivative_fd(chart: MetricChart, x, step=FD_STEP_FIRST) -> np.ndarray:
    """d g_ij / d x^k by central differences; shape (..., k, i, j)."""
    x = np.asarray(x, dtype=float)
    h = _steps(x, step)
    shifted = []
    for k in range(chart.dimension):
        xp = x.copy()
        xm = x.copy()
        xp[..., k] += h[..., k]
        xm[..., k] -= h[..., k]
        gp = chart.metric(xp)
        gm = chart.metric(xm)
        shifted.append((gp - gm) / (2.0 * h[..., k])[..., None, None])
    return np.stack(shifted, axis=-3)


def christoffel_batch(chart: MetricChart, x) -> np.ndarray:
    """Levi-Civita Gamma^k_{ij} for a batch of points; shape (..., k, i, j)."""
    x = np.asarray(x, dtype=float)
    g = chart.metric(x)
    det = np.linalg.det(g)
    if np.any(np.abs(det) <= DET_FLOOR):
        raise SingularMetricError(
            f"metric of chart '{chart.name}' degenerate at a requested point"
        )
    ginv = np.linalg.inv(g)
    if chart.metric_derivative is not None:
        dg = chart.metric_derivative(x)
    else:
        dg = metric_derivative_fd(chart, x)
    # dg[..., k, i, j] = d_k g_ij; build term[..., i, j, l] = d_i g_jl + d_j g_il - d_l g_ij
    term = dg + np.swapaxes(dg, -3, -2) - np.moveaxis(dg, -3, -1)
    gamma = 0.5 * np.einsum("...kl,...ijl->...kij", ginv, term)
    return gamma


def christoffel(chart: MetricChart, x) -> ConnectionCoefficients:
    """Levi-Civita connection coefficients at a single point."""
    x = chart.require_valid(x)
    gamma = christoffel_batch(chart, x)
    return ConnectionCoefficients(gamma=gamma, levi_civita_flag=True)


def levi_civita_field(chart: MetricChart) -> Callable[[np.ndarray], np.ndarray]:
    """The chart's connection as a field usable by torsion/leibniz_residual."""
    return lambda x: christoffel_batch(chart, x)


def ricci(chart: MetricChart, x) -> np.ndarray:
    """Ricci tensor Ric_{ij} from the contraction of the Riemann tensor.

    Derivatives of Gamma use Richardson-extrapolated central differences
    (base step 1e-4 * coordinate scale), which keeps the symmetry defect
    of the result near roundoff.
    """
    x = chart.require_valid(x)
    n = chart.dimension
    h = _steps(x, FD_STEP_SECOND)

    def dgamma(k):
        def diff(step):
            xp = x.copy()
            xm = x.copy()
            xp[k] += step
            xm[k] -= step
            return (christoffel_batch(chart, xp) - christoffel_batch(chart, xm)) / (2.0 * step)

        d1 = diff(h[k])
        d2 = diff(h[k] / 2.0)
        return (4.0 * d2 - d1) / 3.0

    dG = np.stack([dgamma(k) for k in range(n)])  # dG[m, r, a, b] = d_m Gamma^r_{ab}
    G = christoffel_batch(chart, x)
    # R^r_{s m n} = d_m G^r_{ns} - d_n G^r_{ms} + G^r_{ml} G^l_{ns} - G^r_{nl} G^l_{ms}
    riemann = (
        np.einsum("mrns->rsmn", dG)
        - np.einsum("nrms->rsmn", dG)
        + np.einsum("rml,lns->rsmn", G, G)
        - np.einsum("rnl,lms->rsmn", G, G)
    )
    return np.einsum("rsrn->sn", riemann)


def ricci_operator(chart: MetricChart, x) -> np.ndarray:
    """Ricci as a (1,1)-tensor: Ric^i_j = g^{ik} Ric_{kj}."""
    return chart.metric_inverse_at(x) @ ricci(chart, x)


def gradient_fd(f, x, step=FD_STEP_FIRST) -> np.ndarray:
    """Central-difference gradient of a scalar function at a point."""
    x = np.asarray(x, dtype=float)
    h = _steps(x, step)
    out = np.empty_like(x)
    for k in range(x.shape[-1]):
        xp = x.copy()
        xm = x.copy()
        xp[k] += h[k]
        xm[k] -= h[k]
        out[k] = (f(xp) - f(xm)) / (2.0 * h[k])
    return out


def hessian_fd(f, x, step=FD_STEP_SECOND) -> np.ndarray:
    """Central-difference Hessian of a scalar function at a point."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    h = _steps(x, step)
    out = np.empty((n, n))
    f0 = f(x)
    for i in range(n):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h[i]
        xm[i] -= h[i]
        out[i, i] = (f(xp) - 2.0 * f0 + f(xm)) / h[i] ** 2
    for i in range(n):
        for j in range(i + 1, n):
            xpp = x.copy()
            xpm = x.copy()
            xmp = x.copy()
            xmm = x.copy()
            xpp[i] += h[i]; xpp[j] += h[j]
            xpm[i] += h[i]; xpm[j] -= h[j]
            xmp[i] -= h[i]; xmp[j] += h[j]
            xmm[i] -= h[i]; xmm[j] -= h[j]
            out[i, j] = out[j, i] = (f(xpp) - f(xpm) - f(xmp) + f(xmm)) / (4.0 * h[i] * h[j])
    return out


def laplace_beltrami(chart: MetricChart, f, x) -> float:
    """g^{ij} (d^2 f / dx^i dx^j - Gamma^k_{ij} d_k f) at a point."""
    x = chart.require_valid(x)
    ginv = chart.metric_inverse_at(x)
    hess = hessian_fd(f, x)
    grad = gradient_fd(f, x)
    gamma = christoffel_batch(chart, x)
    return float(np.einsum("ij,ij->", ginv, hess - np.einsum("kij,k->ij", gamma, grad)))


def vector_jacobian_fd(X, x, step=FD_STEP_FIRST) -> np.ndarray:
    """J[k, j] = d X^k / d x^j by central differences."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    h = _steps(x, step)
    cols = []
    for j in range(n):
        xp = x.copy()
        xm = x.copy()
        xp[j] += h[j]
        xm[j] -= h[j]
        cols.append((np.asarray(X(xp), dtype=float) - np.asarray(X(xm), dtype=float)) / (2.0 * h[j]))
    return np.stack(cols, axis=-1)


def covariant_derivative(connection_field, X, v, x) -> np.ndarray:
    """(nabla_v X)^k = v^i d_i X^k + Gamma^k_{ij} v^i X^j at a point.

    The direction contracts with the first lower index of Gamma
    (nabla_{e_i} e_j = Gamma^k_{ij} e_k).
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    gamma = np.asarray(connection_field(x))
    jac = vector_jacobian_fd(X, x)
    return jac @ v + np.einsum("kij,i,j->k", gamma, v, np.asarray(X(x), dtype=float))


def commutator_fd(X, Y, x) -> np.ndarray:
    """[X, Y]^k = X^j d_j Y^k - Y^j d_j X^k by central differences."""
    x = np.asarray(x, dtype=float)
    jx = vector_jacobian_fd(X, x)
    jy = vector_jacobian_fd(Y, x)
    return jy @ np.asarray(X(x), dtype=float) - jx @ np.asarray(Y(x), dtype=float)


def torsion(connection_field, X, Y, x) -> TorsionValue:
    """nabla_X Y - nabla_Y X - [X, Y] evaluated at a point."""
    x = np.asarray(x, dtype=float)
    cxy = covariant_derivative(connection_field, Y, np.asarray(X(x), dtype=float), x)
    cyx = covariant_derivative(connection_field, X, np.asarray(Y(x), dtype=float), x)
    return TorsionValue(components=cxy - cyx - commutator_fd(X, Y, x))


def leibniz_residual(connection_field, f, X, Y, x) -> float:
    """|| nabla_X (f Y) - X(f) Y - f nabla_X Y || at a point."""
    x = np.asarray(x, dtype=float)
    Xx = np.asarray(X(x), dtype=float)

    def fY(p):
        return f(p) * np.asarray(Y(p), dtype=float)

    lhs = covariant_derivative(connection_field, fY, Xx, x)
    df_along_X = float(gradient_fd(f, x) @ Xx)
    rhs = df_along_X * np.asarray(Y(x), dtype=float) + f(x) * covariant_derivative(
        connection_field, Y, Xx, x
    )
    return float(np.linalg.norm(lhs - rhs))
