"""Latent-factor counterfactual estimation under unobserved confounding.

Simulation of panels driven by a latent unit confounder, a PCR-based
synthetic estimator for ATE/ATT/ATU, truth-side diagnostics and a small
Monte Carlo harness.
"""

from factorate.errors import (
    DimensionError,
    EmptyCommonMeasurementsError,
    EmptyTargetError,
    FactorateError,
    RangeError,
    ValidationError,
)

__version__ = "0.1.0"

__all__ = [
    "DimensionError",
    "EmptyCommonMeasurementsError",
    "EmptyTargetError",
    "FactorateError",
    "RangeError",
    "ValidationError",
]
