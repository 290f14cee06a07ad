"""Parametric finite element evolution of curves in conformally flat 2-D metrics."""

__version__ = "0.1.0"
