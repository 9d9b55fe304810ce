"""Numerical toolkit for the axisymmetric sigma_k Nirenberg problem."""

__version__ = "0.1.0"
