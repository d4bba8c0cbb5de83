"""Mixed finite-element solvers for coupled free-flow / porous-media models."""

__version__ = "0.1.0"
