"""Fractal path diagnostics: length-vs-resolution scaling and the empirical
diffusion coefficient.

At resampling step delta_t the measured path length obeys
l(delta_t) ~ delta_t^(1/D_f - 1), since each coarse increment fluctuates
like delta_t^(1/D_f); the fitted log-log slope s therefore gives
D_f = 1/(1 + s).  A rectifiable curve has s = 0 (D_f = 1), a Wiener path
s = -1/2 (D_f = 2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ParameterError
from .ensemble import PathEnsemble

MIN_SCALES = 4


@dataclass
class FractalScalingReport:
    scales: np.ndarray                 # resampling steps delta_t
    lengths: np.ndarray                # mean measured length per scale
    fitted_dimension: float            # D_f
    fluctuation_amplitudes: tuple[float, float]   # RMS forward/backward amplitudes
    diffusion_coefficient: float       # D_m = Var(displacement)/(2 t)
    reference_time: float              # tau scale used to normalize fluctuations


def fractal_scaling(ensemble: PathEnsemble, scales, reference_time: float = 1.0) -> FractalScalingReport:
    """Resample paths at the given step multiples and fit the length scaling."""
    scales = [int(m) for m in scales]
    if len(scales) < MIN_SCALES:
        raise ParameterError(f"need at least {MIN_SCALES} scales, got {len(scales)}")
    K = ensemble.n_steps
    for m in scales:
        if m < 1 or m > K // 2:
            raise ParameterError(f"scale {m} must be in [1, K/2] for K={K} steps")
    dt = ensemble.dt
    paths = ensemble.paths

    lengths = []
    for m in sorted(scales):
        sub = paths[:, ::m, :]
        seg = np.linalg.norm(np.diff(sub, axis=1), axis=-1)
        lengths.append(float(np.mean(np.sum(seg, axis=1))))
    delta_ts = np.array(sorted(scales)) * dt
    lengths = np.array(lengths)

    slope = np.polyfit(np.log(delta_ts), np.log(lengths), 1)[0]
    fitted_dimension = 1.0 / max(1.0 + slope, 1e-12)

    # RMS fluctuation amplitude at the base resolution, drift removed,
    # normalized by (dt / tau)^(1/D_f).
    inc = np.diff(paths, axis=1)
    fwd = inc - inc.mean(axis=(0, 1), keepdims=True)
    rms = float(np.sqrt(np.mean(np.sum(fwd**2, axis=-1) / paths.shape[2])))
    norm = (dt / reference_time) ** (1.0 / fitted_dimension)
    sigma = rms / norm
    # Forward and backward increments coincide on a uniform grid; both
    # amplitudes are reported for symmetry with the two difference quotients.
    amplitudes = (sigma, sigma)

    disp = paths[:, -1, :] - paths[:, 0, :]
    var = np.mean(np.var(disp, axis=0, ddof=1))
    diffusion = float(var / (2.0 * ensemble.t_final))

    return FractalScalingReport(
        scales=delta_ts,
        lengths=lengths,
        fitted_dimension=float(fitted_dimension),
        fluctuation_amplitudes=amplitudes,
        diffusion_coefficient=diffusion,
        reference_time=reference_time,
    )
