"""Spectral conditioning, pseudospectra and Gaussian regularization."""

__version__ = "0.1.0"
