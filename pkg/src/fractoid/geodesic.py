"""Variational machinery: energy functionals, geodesic integration,
Euler-Lagrange residuals, first variation, and the stochastic-geodesic
criterion.

The curve energy is int g(xdot, xdot) dt (no 1/2), evaluated by trapezoid
quadrature with second-order finite-difference velocities.  The stochastic
criterion combines an analytic residual

    grad_w w + d_t w + (lap w + Ric o w) / 2

(the directionless first term is read as self-advection, the unique choice
consistent with the classical transport term and with the closed-form
solution w = x/(1+t)) with a Monte Carlo residual: the forward covariant
mean derivative of w along the ensemble.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .geometry import MetricChart, christoffel_batch, ricci_operator
from .meanderiv import EstimatorConfig, covariant_mean_derivative
from .meanderiv.covariant import chart_is_flat
from .stochastic import PathEnsemble

VARIATION_STEP = 1e-5
RESIDUAL_FD_STEP = 1e-3


@dataclass
class PathCurve:
    """A single discretized curve on a chart.

    velocity_data, when present (e.g. from the geodesic integrator), is
    used verbatim; otherwise velocities are finite differences of the
    points.
    """

    times: np.ndarray
    points: np.ndarray                # (K+1, dim)
    chart_name: str = "euclidean:1"
    velocity_data: np.ndarray | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim != 2 or self.times.shape != (self.points.shape[0],):
            raise ParameterError("curve needs times (K+1,) and points (K+1, dim)")
        d = np.diff(self.times)
        if np.any(d <= 0) or np.max(np.abs(d - d[0])) > 1e-12:
            raise ParameterError("curve time grid must be uniform and increasing")
        if self.velocity_data is not None:
            self.velocity_data = np.asarray(self.velocity_data, dtype=float)
            if self.velocity_data.shape != self.points.shape:
                raise ParameterError("velocity_data must match the points shape")

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def velocities(self) -> np.ndarray:
        """Integrator velocities if stored; otherwise central differences
        inside and 3-point one-sided stencils at the endpoints."""
        if self.velocity_data is not None:
            return self.velocity_data
        x = self.points
        dt = self.dt
        v = np.empty_like(x)
        v[1:-1] = (x[2:] - x[:-2]) / (2.0 * dt)
        v[0] = (-3.0 * x[0] + 4.0 * x[1] - x[2]) / (2.0 * dt)
        v[-1] = (3.0 * x[-1] - 4.0 * x[-2] + x[-3]) / (2.0 * dt)
        return v

    def reversed(self) -> "PathCurve":
        return PathCurve(self.times, self.points[::-1], self.chart_name)


@dataclass(frozen=True)
class LagrangianSpec:
    """L = (m/2) g(xdot, xdot) - E_u(x)."""

    potential: object | None            # callable x -> scalar (vectorized) or None
    mass: float = 1.0

    def __post_init__(self):
        if self.mass <= 0:
            raise ParameterError("mass must be positive")


def energy_functional(chart: MetricChart, curve: PathCurve) -> float:
    """Trapezoid quadrature of int g_ij(x) xdot^i xdot^j dt."""
    pts = chart.require_valid(curve.points)
    v = curve.velocities()
    g = chart.metric(pts)
    speed2 = np.einsum("ki,kij,kj->k", v, g, v)
    return float(np.trapezoid(speed2, curve.times))


def classical_geodesic(chart: MetricChart, x0, v0, T: float, dt: float) -> PathCurve:
    """RK4 integration of xddot^k + Gamma^k_{ij} xdot^i xdot^j = 0.

    If the trajectory leaves the valid region the curve is truncated at the
    last valid node with a warning.
    """
    x0 = chart.require_valid(np.asarray(x0, dtype=float))
    v0 = np.asarray(v0, dtype=float)
    K = int(round(T / dt))
    if K < 1 or abs(K * dt - T) > 1e-9 * max(1.0, T):
        raise ParameterError(f"T={T} is not an integer multiple of dt={dt}")

    def acc(x, v):
        gamma = christoffel_batch(chart, x)
        return -np.einsum("kij,i,j->k", gamma, v, v)

    xs = [x0.copy()]
    vs = [v0.copy()]
    x, v = x0.copy(), v0.copy()
    for k in range(K):
        k1x, k1v = v, acc(x, v)
        k2x, k2v = v + 0.5 * dt * k1v, acc(x + 0.5 * dt * k1x, v + 0.5 * dt * k1v)
        k3x, k3v = v + 0.5 * dt * k2v, acc(x + 0.5 * dt * k2x, v + 0.5 * dt * k2v)
        k4x, k4v = v + dt * k3v, acc(x + dt * k3x, v + dt * k3v)
        x = x + dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
        v = v + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
        if not np.all(chart.is_valid(x)):
            warnings.warn(f"geodesic left the valid region of '{chart.name}' at "
                          f"step {k + 1}; curve truncated", stacklevel=2)
            break
        xs.append(x.copy())
        vs.append(v.copy())
    pts = np.array(xs)
    times = np.arange(len(pts)) * dt
    return PathCurve(times=times, points=pts, chart_name=chart.name,
                     velocity_data=np.array(vs))


def euler_lagrange_residual(chart: MetricChart, curve: PathCurve,
                            lagrangian: LagrangianSpec) -> np.ndarray:
    """Discrete residual of d/dt (dL/dxdot) - dL/dx at interior nodes.

    Only pure central stencils are used (velocities at nodes 1..K-1, their
    time derivative at nodes 2..K-2), which keeps the residual uniformly
    second order; the returned array covers nodes 2..K-2.
    """
    if curve.points.shape[0] < 5:
        raise ParameterError("need at least K >= 4 intervals")
    pts = curve.points
    dt = curve.dt
    m = lagrangian.mass
    v = (pts[2:] - pts[:-2]) / (2.0 * dt)            # nodes 1..K-1
    g = chart.metric(pts[1:-1])
    p = m * np.einsum("kij,kj->ki", g, v)            # dL/dxdot at 1..K-1
    dpdt = (p[2:] - p[:-2]) / (2.0 * dt)             # nodes 2..K-2
    inner = pts[2:-2]
    v_in = v[1:-1]
    if chart.metric_derivative is not None:
        dg = chart.metric_derivative(inner)
    else:
        from .geometry import metric_derivative_fd
        dg = metric_derivative_fd(chart, inner)
    dLdx = 0.5 * m * np.einsum("skij,si,sj->sk", dg, v_in, v_in)
    if lagrangian.potential is not None:
        h = 1e-6
        grad = np.empty_like(inner)
        for a in range(inner.shape[1]):
            xp = inner.copy(); xp[:, a] += h
            xm = inner.copy(); xm[:, a] -= h
            grad[:, a] = (np.asarray(lagrangian.potential(xp))
                          - np.asarray(lagrangian.potential(xm))) / (2.0 * h)
        dLdx = dLdx - grad
    return dpdt - dLdx


def first_variation(chart: MetricChart, curve: PathCurve,
                    perturbation: np.ndarray, step: float = VARIATION_STEP) -> float:
    """dE/d eps at eps = 0 by symmetric differencing of the energy.

    The perturbation must vanish at both endpoints (fixed-endpoint
    variation); a violation raises ParameterError.
    """
    eta = np.asarray(perturbation, dtype=float)
    if eta.shape != curve.points.shape:
        raise ParameterError("perturbation must match the curve shape")
    tol = 1e-9 * max(1.0, float(np.max(np.abs(eta))))
    if np.linalg.norm(eta[0]) > tol or np.linalg.norm(eta[-1]) > tol:
        raise ParameterError("perturbation must vanish at both endpoints")
    plus = PathCurve(curve.times, curve.points + step * eta, curve.chart_name)
    minus = PathCurve(curve.times, curve.points - step * eta, curve.chart_name)
    return (energy_functional(chart, plus) - energy_functional(chart, minus)) / (2.0 * step)


def stochastic_energy(ensemble: PathEnsemble, chart: MetricChart, w,
                      config: EstimatorConfig) -> tuple[float, float]:
    """Monte Carlo E int ||D w(t, x_t)||^2 dt via the forward estimator.

    w names the drift field only for bookkeeping; the integrand uses the
    per-bin forward mean derivative of the ensemble itself, with the
    estimator variance subtracted so the plug-in square is unbiased.
    Returns (estimate, standard error over paths).
    """
    from .meanderiv import estimate_forward

    fwd = estimate_forward(ensemble, config)
    paths = ensemble.paths
    times = ensemble.times
    lag = config.lag
    n, dim = ensemble.n_paths, ensemble.dimension
    cond = paths[:, :-lag, :]
    t = np.broadcast_to(times[:-lag], (n, cond.shape[1])).reshape(-1)
    idx = config.flat_index(t, cond.reshape(-1, dim))
    flat_vals = fwd.values.reshape(-1, dim)
    flat_se = fwd.se.reshape(-1, dim)
    ok = idx >= 0
    g = chart.metric(cond.reshape(-1, dim))
    gdiag = g[:, np.arange(dim), np.arange(dim)]
    vals = np.where(ok[:, None], flat_vals[np.maximum(idx, 0)], np.nan)
    ses = np.where(ok[:, None], flat_se[np.maximum(idx, 0)], np.nan)
    norm2 = np.einsum("si,sij,sj->s", np.nan_to_num(vals), g, np.nan_to_num(vals))
    # E||Dhat||^2 exceeds ||D||^2 by the estimator variance; subtract it.
    corr = np.sum(gdiag * np.nan_to_num(ses) ** 2, axis=1)
    integrand = np.where(np.isfinite(vals).all(axis=1), norm2 - corr, np.nan)
    integrand = integrand.reshape(n, -1)
    per_path = np.nansum(integrand, axis=1) * ensemble.dt
    frac = np.mean(np.isfinite(integrand))
    if frac < 1.0:
        per_path = per_path / max(frac, 1e-12)   # renormalize for excluded bins
    est = float(np.mean(per_path))
    se_paths = float(np.std(per_path, ddof=1) / np.sqrt(n))
    # The bin estimates are shared across paths, so their noise does not
    # show up in the path-to-path spread; add it explicitly.
    mask = fwd.mask
    weights = fwd.count / max(int(np.sum(fwd.count[mask])), 1)
    duration = ensemble.t_final
    grad = 2.0 * np.abs(np.nan_to_num(fwd.values[mask]))
    var_bins = np.sum((weights[mask, None] * grad * fwd.se[mask]) ** 2) * duration**2
    return est, float(np.sqrt(se_paths**2 + var_bins))


def _richardson_grad(f, x, comp, h):
    """5-point (Richardson) derivative of f along coordinate comp."""
    def d(step):
        xp = x.copy(); xp[comp] += step
        xm = x.copy(); xm[comp] -= step
        return (f(xp) - f(xm)) / (2.0 * step)

    return (4.0 * d(h / 2.0) - d(h)) / 3.0


@dataclass
class GeodesicCriterion:
    analytic_residual: float           # max norm over probe points
    monte_carlo: object                # CovariantMeanDerivative (forward, X = w)
    max_z: float                       # max |mc| / se over populated bins


def stochastic_geodesic_criterion(chart: MetricChart, w, ensemble: PathEnsemble,
                                  config: EstimatorConfig,
                                  probes: np.ndarray | None = None,
                                  probe_times: np.ndarray | None = None) -> GeodesicCriterion:
    """Evaluate both residuals of the critical-path condition.

    (i)  analytic: || grad_w w + d_t w + (lap w + Ric o w)/2 || on probe
         points, derivatives by Richardson-extrapolated central differences;
    (ii) Monte Carlo: the forward covariant mean derivative of w along the
         ensemble, which should vanish within statistical error.
    """
    dim = chart.dimension
    if probes is None:
        lo = np.nanpercentile(ensemble.paths, 15, axis=(0, 1))
        hi = np.nanpercentile(ensemble.paths, 85, axis=(0, 1))
        axes = [np.linspace(lo[a], hi[a], 5) for a in range(dim)]
        probes = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
    if probe_times is None:
        probe_times = np.linspace(ensemble.times[1], ensemble.times[-2], 3)

    flat = chart_is_flat(chart)
    worst = 0.0
    for t in probe_times:
        for x in probes:
            if not np.all(chart.is_valid(x)):
                continue
            x = np.asarray(x, dtype=float)
            wx = np.asarray(w(t, x[None]), dtype=float)[0]
            jac = np.stack([_richardson_grad(lambda p: np.asarray(w(t, p[None]))[0],
                                             x, a, RESIDUAL_FD_STEP * max(1.0, abs(x[a])))
                            for a in range(dim)], axis=-1)
            adv = jac @ wx
            dt_w = _richardson_grad(lambda tt: np.asarray(w(tt[0], x[None]))[0],
                                    np.array([t]), 0, RESIDUAL_FD_STEP * max(1.0, abs(t)))
            lap = np.zeros(dim)
            for a in range(dim):
                h = 1e-3 * max(1.0, abs(x[a]))
                xp = x.copy(); xp[a] += h
                xm = x.copy(); xm[a] -= h
                lap += (np.asarray(w(t, xp[None]))[0] - 2.0 * wx
                        + np.asarray(w(t, xm[None]))[0]) / h**2
            ric = np.zeros(dim)
            if not flat:
                gamma = christoffel_batch(chart, x)
                adv = adv + np.einsum("kij,i,j->k", gamma, wx, wx)
                ric = ricci_operator(chart, x) @ wx
            resid = np.linalg.norm(adv + dt_w + 0.5 * (lap + ric))
            worst = max(worst, float(resid))

    mc = covariant_mean_derivative(chart, ensemble, w, config, direction="forward")
    mask = mc.monte_carlo.mask
    vals = np.abs(mc.monte_carlo.values[mask])
    ses = mc.monte_carlo.se[mask]
    with np.errstate(invalid="ignore", divide="ignore"):
        z = np.where(ses > 0, vals / ses, np.where(vals > 0, np.inf, 0.0))
    return GeodesicCriterion(analytic_residual=worst, monte_carlo=mc,
                             max_z=float(np.max(z)) if z.size else 0.0)
