"""Rate, distortion and generalization-error regions for regression on Wyner-Ziv coded data."""

__version__ = "0.1.0"
