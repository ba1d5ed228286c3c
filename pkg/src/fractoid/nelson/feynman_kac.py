"""Monte Carlo Feynman-Kac representation of the Schrodinger semigroup
exp(-t S) for S = -(1/2) Lap + V on a flat chart (scalar potential only).
"""

from __future__ import annotations

import numpy as np

from ..errors import ParameterError, SimulationError
from ..parallel import BLOCK_SIZE, map_blocks
from ..stochastic import make_stream
from .wavefunctions import PotentialField


def feynman_kac_semigroup(V: PotentialField, phi, t: float, x, N: int, seed: int,
                          dt: float = 1e-3) -> tuple[float, float]:
    """Estimate (exp(-tS) phi)(x) = E[exp(-int V(x+W_s) ds) phi(x+W_t)].

    The time integral uses the trapezoid rule along each Brownian path;
    paths are drawn in fixed-size blocks with one counter stream per block,
    so the result is independent of worker scheduling.  Returns (estimate,
    standard error).
    """
    if t <= 0 or dt <= 0:
        raise ParameterError("t and dt must be positive")
    if N < 2:
        raise ParameterError("N must be >= 2")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    dim = x.shape[0]
    n_steps = max(1, int(round(t / dt)))
    step = t / n_steps
    sq = np.sqrt(step)

    sums = np.zeros(int(np.ceil(N / BLOCK_SIZE)))
    sqsums = np.zeros_like(sums)
    counts = np.zeros_like(sums, dtype=np.int64)

    def run(lo, hi):
        block = lo // BLOCK_SIZE
        B = hi - lo
        gen = make_stream(seed, block)
        pos = np.broadcast_to(x, (B, dim)).copy()
        v_prev = V(pos)
        integral = np.zeros(B)
        for _ in range(n_steps):
            pos = pos + gen.normal(0.0, sq, (B, dim))
            v_next = V(pos)
            integral += 0.5 * step * (v_prev + v_next)
            v_prev = v_next
        if not np.all(np.isfinite(integral)):
            raise SimulationError("Feynman-Kac exponent became non-finite; "
                                  "is the potential bounded below on the region?")
        weights = np.exp(-integral) * np.asarray(phi(pos), dtype=float)
        if not np.all(np.isfinite(weights)):
            raise SimulationError("Feynman-Kac weight became non-finite")
        sums[block] = np.sum(weights)
        sqsums[block] = np.sum(weights**2)
        counts[block] = B

    map_blocks(run, N)
    total = float(np.sum(sums))
    total_sq = float(np.sum(sqsums))
    n = int(np.sum(counts))
    mean = total / n
    var = max(total_sq / n - mean**2, 0.0) * n / (n - 1)
    return mean, float(np.sqrt(var / n))
