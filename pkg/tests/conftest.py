import numpy as np
import pytest

from fractoid.stochastic import ItoProcessSpec, make_stream, simulate_ito

SEED = 1234


@pytest.fixture(scope="session")
def wiener_ensemble():
    """Driftless unit-diffusion ensemble from the origin, T = 1."""
    spec = ItoProcessSpec(drift=lambda t, x: np.zeros_like(x),
                          diffusion_const=1.0, dimension=1)
    return simulate_ito(spec, 0.0, T=1.0, dt=0.01, N=40_000, seed=SEED)


@pytest.fixture(scope="session")
def ou_ensemble():
    """Stationary Ornstein-Uhlenbeck ensemble (rate 1, eps = 1)."""
    spec = ItoProcessSpec(drift=lambda t, x: -x, diffusion_const=1.0, dimension=1)
    x0 = make_stream(SEED, 1 << 32).normal(0.0, np.sqrt(0.5), (40_000, 1))
    return simulate_ito(spec, x0, T=1.0, dt=0.01, N=40_000, seed=SEED + 1)
