"""Schrodinger operator suite and Newton-Nelson dynamics verification."""

from .dynamics import (
    NewtonNelsonResult,
    QuadraticVariationLaw,
    newton_nelson_residual,
    quadratic_variation_law,
)
from .feynman_kac import feynman_kac_semigroup
from .operators import discrete_laplacian, free_propagator, grid_schrodinger_apply
from .wavefunctions import (
    NelsonProcessSpec,
    PotentialField,
    WaveFunctionGrid,
    drift_from_wavefunction,
    make_wavefunction,
)

__all__ = [
    "NelsonProcessSpec",
    "NewtonNelsonResult",
    "PotentialField",
    "QuadraticVariationLaw",
    "WaveFunctionGrid",
    "discrete_laplacian",
    "drift_from_wavefunction",
    "feynman_kac_semigroup",
    "free_propagator",
    "grid_schrodinger_apply",
    "make_wavefunction",
    "newton_nelson_residual",
    "quadratic_variation_law",
]
