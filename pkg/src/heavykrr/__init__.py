"""Kernel ridge regression under heavy-tailed noise: estimator, bounds and Monte-Carlo harness."""

__version__ = "0.1.0"
