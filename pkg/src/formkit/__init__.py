"""Numerical toolkit for solvable sesquilinear forms on finite truncations."""

__version__ = "0.1.0"
