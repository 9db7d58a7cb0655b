"""Classical and quantum Bernoulli maps: spectral representations and quasi-fractals."""

__version__ = "0.1.0"
