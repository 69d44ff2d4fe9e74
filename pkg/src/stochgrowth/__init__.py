"""Stochastic growth, Gamma aggregation and growth/inequality estimation."""

__version__ = "0.1.0"
