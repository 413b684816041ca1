"""Numerics for discrete exponential attractors: covering certificates,
attractor construction, stability certifiers and dimension bounds."""

__version__ = "0.1.0"
