"""fractoid: a numerical laboratory for stochastic mechanics on coordinate charts."""

__version__ = "0.1.0"
