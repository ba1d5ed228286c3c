"""Diffusions on curved charts, stochastic parallel transport, and the
orthonormal-frame-bundle construction of manifold Brownian motion.

The chart SDE integrated by :func:`simulate_manifold_diffusion` is

    dx^k = [w^k - (eps^2/2) g^{ij} Gamma^k_{ij}] dt + eps (g^{-1/2})^k_m dW^m

whose generator is (eps^2/2) Lap_g + w . grad.  The frame-bundle simulator
drives the base point with the frame columns and parallel-transports the
frame along its own path; both constructions agree in law.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import BoundaryError, InstabilityError, ParameterError
from ..geometry import MetricChart, christoffel_batch, gradient_fd, laplace_beltrami
from ..parallel import map_blocks
from .ensemble import PathEnsemble
from .rng import make_stream

FRAME_TOL = 1e-6
FRAME_DRIFT_LIMIT = 1e-3
RENORM_INTERVAL = 100
MAX_BOUNDARY_RETRIES = 100


@dataclass
class FrameState:
    """A base point with a g-orthonormal frame (columns are tangent vectors)."""

    base_point: np.ndarray
    frame: np.ndarray

    def orthonormality_defect(self, chart: MetricChart) -> float:
        g = chart.metric_at(self.base_point)
        eta = chart.signature_matrix()
        return float(np.max(np.abs(self.frame.T @ g @ self.frame - eta)))


@dataclass
class FrameBundleEnsemble:
    """Horizontal-lift sample paths: base points plus transported frames."""

    times: np.ndarray
    base_paths: np.ndarray            # (N, K+1, n)
    frames: np.ndarray                # (N, K+1, n, n)
    seed: int
    chart_name: str

    def max_orthonormality_defect(self, chart: MetricChart) -> float:
        g = chart.metric(self.base_paths)
        eta = chart.signature_matrix()
        gram = np.einsum("...ji,...jk,...kl->...il", self.frames, g, self.frames)
        return float(np.max(np.abs(gram - eta)))


def _is_diagonal(g: np.ndarray) -> bool:
    off = g - g * np.eye(g.shape[-1])
    return bool(np.max(np.abs(off)) == 0.0)


def _inverse(g: np.ndarray) -> np.ndarray:
    if _is_diagonal(g):
        out = np.zeros_like(g)
        idx = np.arange(g.shape[-1])
        out[..., idx, idx] = 1.0 / g[..., idx, idx]
        return out
    return np.linalg.inv(g)


def orthonormal_frame(chart: MetricChart, x) -> np.ndarray:
    """Symmetric square root of g^{-1}: columns form a g-orthonormal frame.

    For indefinite signatures the eigenvalue magnitudes are used, which
    reproduces the signature matrix exactly on diagonal metrics.
    """
    g = chart.metric(np.asarray(x, dtype=float))
    idx = np.arange(g.shape[-1])
    if _is_diagonal(g):
        out = np.zeros_like(g)
        out[..., idx, idx] = 1.0 / np.sqrt(np.abs(g[..., idx, idx]))
        return out
    vals, vecs = np.linalg.eigh(g)
    inv_sqrt = 1.0 / np.sqrt(np.abs(vals))
    return np.einsum("...ij,...j,...kj->...ik", vecs, inv_sqrt, vecs)


def _geometric_drift(chart: MetricChart, x: np.ndarray, epsilon: float) -> np.ndarray:
    """-(eps^2/2) g^{ij} Gamma^k_{ij} evaluated on a batch of points."""
    gamma = christoffel_batch(chart, x)
    ginv = _inverse(chart.metric(x))
    return -0.5 * epsilon**2 * np.einsum("...kij,...ij->...k", gamma, ginv)


def _step_fields(chart: MetricChart, x: np.ndarray, epsilon: float):
    """Geometric drift and scaled frame for one integrator step.

    Diagonal metrics (all registered charts) take an elementwise fast path;
    anything else falls back to the generic batched tensor algebra.
    """
    g = chart.metric(x)
    n = g.shape[-1]
    idx = np.arange(n)
    if chart.metric_derivative is not None and _is_diagonal(g):
        dg = chart.metric_derivative(x)
        gd = g[..., idx, idx]
        ginv_d = 1.0 / gd
        dgd = dg[..., :, idx, idx]                      # (..., k, i) = d_k g_ii
        own = dgd[..., idx, idx]                        # d_k g_kk
        trace = np.einsum("...i,...ki->...k", ginv_d, dgd)
        contraction = 0.5 * ginv_d * (2.0 * ginv_d * own - trace)
        drift = -0.5 * epsilon**2 * contraction
        frame = np.zeros_like(g)
        frame[..., idx, idx] = epsilon / np.sqrt(np.abs(gd))
        return drift, frame
    drift = _geometric_drift(chart, x, epsilon)
    return drift, epsilon * orthonormal_frame(chart, x)


def simulate_manifold_diffusion(chart: MetricChart, w, x0, T: float, dt: float,
                                N: int, seed: int, epsilon: float = 1.0) -> PathEnsemble:
    """Euler steps of the chart diffusion with reject-and-resample boundaries.

    w is a drift field (t, x) -> (B, n), or None for zero drift.  Steps that
    would leave the valid region are redrawn from the same per-path stream,
    up to MAX_BOUNDARY_RETRIES, then a BoundaryError reports the location.

    On Lorentzian charts coordinate time is the evolution parameter: the
    leading (negative-signature) coordinates advance deterministically by dt
    and only the spatial block diffuses, so increments satisfy the
    diffusive-scaling diagnostics.
    """
    if N < 1:
        raise ParameterError("N must be >= 1")
    if T <= 0 or dt <= 0:
        raise ParameterError("T and dt must be positive")
    K = int(round(T / dt))
    if abs(K * dt - T) > 1e-9 * max(1.0, T):
        raise ParameterError(f"T={T} is not an integer multiple of dt={dt}")
    n = chart.dimension
    n_time = chart.signature[0]
    x0 = np.asarray(x0, dtype=float)
    starts = np.broadcast_to(x0, (N, n)).copy() if x0.ndim == 1 else x0.copy()
    chart.require_valid(starts)
    times = np.arange(K + 1) * dt
    paths = np.empty((N, K + 1, n))
    sqdt = np.sqrt(dt)

    def run(lo, hi):
        gens = [make_stream(seed, p) for p in range(lo, hi)]
        dW = np.stack([g.normal(0.0, sqdt, (K, n)) for g in gens])
        x = starts[lo:hi].copy()
        paths[lo:hi, 0] = x
        for k in range(K):
            drift, frame = _step_fields(chart, x, epsilon)
            if w is not None:
                drift = drift + np.asarray(w(times[k], x), dtype=float)
            if n_time:
                # coordinate time advances deterministically on Lorentz charts
                drift = drift.copy()
                drift[..., :n_time] = 1.0
                frame = frame.copy()
                frame[..., :n_time, :] = 0.0
            step = drift * dt
            prop = x + step + np.einsum("bij,bj->bi", frame, dW[:, k, :])
            bad = ~np.asarray(chart.is_valid(prop), dtype=bool)
            retries = 0
            while np.any(bad):
                retries += 1
                if retries > MAX_BOUNDARY_RETRIES:
                    p = int(np.argmax(bad))
                    raise BoundaryError(
                        f"path {lo + p} stuck at {x[p]} near the boundary of "
                        f"chart '{chart.name}' (step {k + 1})")
                for p in np.nonzero(bad)[0]:
                    fresh = gens[p].normal(0.0, sqdt, (n,))
                    prop[p] = x[p] + step[p] + frame[p] @ fresh
                bad = ~np.asarray(chart.is_valid(prop), dtype=bool)
            x = prop
            paths[lo:hi, k + 1] = x

    map_blocks(run, N)
    return PathEnsemble(times, paths, seed=seed, chart_name=chart.name,
                        meta={"epsilon": epsilon, "integrator": "manifold-euler"})


def parallel_transport(chart: MetricChart, path: np.ndarray, v0) -> np.ndarray:
    """Transport v0 along a discretized path; returns v at every grid time.

    Uses the implicit midpoint rule for dv^k = -Gamma^k_{ij} v^i dx^j, the
    Stratonovich-consistent discretization, which keeps g(v, v) constant to
    second order per step.
    """
    path = chart.require_valid(np.asarray(path, dtype=float))
    v = np.asarray(v0, dtype=float).copy()
    out = np.empty_like(path)
    out[0] = v
    if path.shape[0] == 1:
        return out
    mids = 0.5 * (path[1:] + path[:-1])
    dxs = np.diff(path, axis=0)
    gammas = christoffel_batch(chart, mids)
    A = np.einsum("skij,sj->ski", gammas, dxs)
    eye = np.eye(chart.dimension)
    for s in range(len(dxs)):
        v = np.linalg.solve(eye + 0.5 * A[s], (eye - 0.5 * A[s]) @ v)
        out[s + 1] = v
    return out


def transport_steps(chart: MetricChart, x_from: np.ndarray, x_to: np.ndarray,
                    vectors: np.ndarray) -> np.ndarray:
    """One midpoint-rule transport step for a batch of (segment, vector) pairs."""
    mids = 0.5 * (x_from + x_to)
    gammas = christoffel_batch(chart, mids)
    A = np.einsum("...kij,...j->...ki", gammas, x_to - x_from)
    eye = np.eye(chart.dimension)
    rhs = np.einsum("...ki,...i->...k", eye - 0.5 * A, vectors)
    return np.linalg.solve(eye + 0.5 * A, rhs[..., None])[..., 0]


def transport_matrix_isometric(chart: MetricChart, x_from: np.ndarray,
                               x_to: np.ndarray) -> np.ndarray:
    """Batched transport matrices that preserve g-norms exactly.

    The midpoint map is conjugated into the orthonormal gauge and polar-
    projected onto the nearest rotation, so P^T g(x_to) P = g(x_from) holds
    to machine precision while the transport itself stays second order.
    Riemannian signatures only (the rotation projection is Euclidean).
    """
    mids = 0.5 * (x_from + x_to)
    gammas = christoffel_batch(chart, mids)
    A = np.einsum("...kij,...j->...ki", gammas, x_to - x_from)
    eye = np.eye(chart.dimension)
    T = np.linalg.solve(eye + 0.5 * A, eye - 0.5 * A)
    y_from = orthonormal_frame(chart, x_from)
    y_to = orthonormal_frame(chart, x_to)
    M = np.linalg.solve(y_to, T @ y_from)
    u, _, vt = np.linalg.svd(M)
    rot = u @ vt
    return y_to @ rot @ np.linalg.inv(y_from)


def gram_schmidt(chart: MetricChart, x: np.ndarray, frame: np.ndarray) -> np.ndarray:
    """g-orthonormalize frame columns at base points x (batched).

    Signed projections handle Lorentzian signatures; column order follows
    the chart signature (negative-norm directions first).
    """
    g = chart.metric(np.asarray(x, dtype=float))
    n = chart.dimension
    cols = [frame[..., :, j].copy() for j in range(n)]
    for j in range(n):
        for i in range(j):
            gi = np.einsum("...ij,...j->...i", g, cols[i])
            denom = np.einsum("...i,...i->...", cols[i], gi)
            num = np.einsum("...i,...i->...", cols[j], gi)
            cols[j] = cols[j] - (num / denom)[..., None] * cols[i]
        norm2 = np.einsum("...i,...ij,...j->...", cols[j], g, cols[j])
        cols[j] = cols[j] / np.sqrt(np.abs(norm2))[..., None]
    return np.stack(cols, axis=-1)


def frame_bundle_simulate(chart: MetricChart, x0, frame0: FrameState, T: float,
                          dt: float, N: int, seed: int,
                          report_every: int = RENORM_INTERVAL) -> FrameBundleEnsemble:
    """Horizontal lift: base point driven by frame columns times Wiener
    increments, frame parallel-transported along its own base path.

    Frames are re-orthonormalized (Gram-Schmidt against g) every
    ``report_every`` integration steps, which is also the reporting grid, so
    every reported frame meets the orthonormality contract.  If the defect
    exceeds FRAME_DRIFT_LIMIT before a renormalization the run aborts with a
    suggestion to reduce dt.
    """
    defect = frame0.orthonormality_defect(chart)
    if defect > FRAME_TOL:
        raise ParameterError(f"frame0 is not g-orthonormal (defect {defect:.2e})")
    if N < 1 or report_every < 1:
        raise ParameterError("N and report_every must be >= 1")
    K = int(round(T / dt))
    if K < 1 or abs(K * dt - T) > 1e-9 * max(1.0, T):
        raise ParameterError(f"T={T} is not an integer multiple of dt={dt}")
    n = chart.dimension
    x0 = np.asarray(x0, dtype=float)
    report_steps = list(range(report_every, K + 1, report_every))
    if not report_steps or report_steps[-1] != K:
        report_steps.append(K)
    times = np.array([0.0] + [k * dt for k in report_steps])
    base = np.empty((N, len(times), n))
    frames = np.empty((N, len(times), n, n))
    eta = chart.signature_matrix()
    sqdt = np.sqrt(dt)

    def run(lo, hi):
        B = hi - lo
        gens = [make_stream(seed, p) for p in range(lo, hi)]
        dW = np.stack([g.normal(0.0, sqdt, (K, n)) for g in gens])
        x = np.broadcast_to(x0, (B, n)).copy()
        e = np.broadcast_to(frame0.frame, (B, n, n)).copy()
        base[lo:hi, 0] = x
        frames[lo:hi, 0] = e
        out = 1
        for k in range(K):
            # Heun step for dx = e o dW: predict, transport, correct.
            dx0 = np.einsum("bij,bj->bi", e, dW[:, k, :])
            bad = ~np.asarray(chart.is_valid(x + dx0), dtype=bool)
            retries = 0
            while np.any(bad):
                retries += 1
                if retries > MAX_BOUNDARY_RETRIES:
                    p = int(np.argmax(bad))
                    raise BoundaryError(f"frame path {lo + p} stuck at {x[p]} on "
                                        f"chart '{chart.name}' (step {k + 1})")
                for p in np.nonzero(bad)[0]:
                    dW[p, k, :] = gens[p].normal(0.0, sqdt, (n,))
                    dx0[p] = e[p] @ dW[p, k, :]
                bad = ~np.asarray(chart.is_valid(x + dx0), dtype=bool)
            e_pred = transport_matrix_isometric(chart, x, x + dx0) @ e
            dx = 0.5 * (dx0 + np.einsum("bij,bj->bi", e_pred, dW[:, k, :]))
            x_new = x + dx
            invalid = ~np.asarray(chart.is_valid(x_new), dtype=bool)
            x_new[invalid] = (x + dx0)[invalid]  # fall back to the predictor point
            e = transport_matrix_isometric(chart, x, x_new) @ e
            x = x_new
            if (k + 1) % report_every == 0 or k + 1 == K:
                g = chart.metric(x)
                gram = np.einsum("bji,bjk,bkl->bil", e, g, e)
                drift_now = float(np.max(np.abs(gram - eta)))
                if drift_now > FRAME_DRIFT_LIMIT:
                    raise InstabilityError(
                        f"frame orthonormality drifted to {drift_now:.2e} before "
                        f"renormalization; reduce dt (currently {dt})")
                e = gram_schmidt(chart, x, e)
                if out < len(report_steps) + 1 and k + 1 == report_steps[out - 1]:
                    base[lo:hi, out] = x
                    frames[lo:hi, out] = e
                    out += 1

    map_blocks(run, N)
    return FrameBundleEnsemble(times, base, frames, seed=seed, chart_name=chart.name)


def generator_apply(chart: MetricChart, w, z, x) -> float:
    """(L_w z)(x) = (1/2) Lap_g z(x) + (w . grad z)(x)."""
    x = chart.require_valid(np.asarray(x, dtype=float))
    val = 0.5 * laplace_beltrami(chart, z, x)
    if w is not None:
        val += float(np.dot(np.asarray(w(x), dtype=float), gradient_fd(z, x)))
    return val
