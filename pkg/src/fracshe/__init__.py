"""Fractional stochastic heat equation with rough initial data: Green function, kernels, moments."""

__version__ = "0.1.0"
